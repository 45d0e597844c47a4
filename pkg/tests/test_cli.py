import json

import pytest

from utilimax.cli import main
from utilimax.evaluation.synthetic import bundled_mini_dir

from conftest import DATA, GOLDEN

MINI = bundled_mini_dir()


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def test_validate_ok(capsys):
    assert main(["validate", "--spec", str(DATA / "movie_diagram.json")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("OK")
    assert "ConditionallyIndependent" in out


def test_validate_invalid(tmp_path, capsys):
    spec = write_json(tmp_path / "d.json", {"task": "t", "nodes": [{"id": "A", "kind": "Decision"}], "edges": []})
    assert main(["validate", "--spec", spec]) == 1
    assert "min-chance-nodes" in capsys.readouterr().out


def test_validate_malformed_spec(tmp_path, capsys):
    path = tmp_path / "d.json"
    path.write_text("{oops")
    assert main(["validate", "--spec", str(path)]) == 1
    assert "line 1" in capsys.readouterr().err


def test_validate_missing_file(tmp_path):
    assert main(["validate", "--spec", str(tmp_path / "none.json")]) == 1


def test_compile_matches_golden(tmp_path):
    task = write_json(tmp_path / "task.json", {"description": "[TASK DESCRIPTION]"})
    out = tmp_path / "prompt.txt"
    assert main(["compile", "--spec", str(GOLDEN / "template_two_variable.json"), "--task", task, "--out", str(out)]) == 0
    assert out.read_bytes() == (GOLDEN / "template_two_variable.txt").read_bytes()


def test_compile_baseline_to_stdout(capsys):
    assert main(["compile", "--task", str(DATA / "movie_task.json"), "--variant", "harsh"]) == 0
    captured = capsys.readouterr()
    assert "should not suggest anything outside" in captured.out
    assert "fingerprint:" in captured.err


def test_compile_utilitymax_needs_spec():
    assert main(["compile", "--task", str(DATA / "movie_task.json")]) == 2


def test_compile_intractable(tmp_path, capsys):
    spec = write_json(tmp_path / "d.json", {
        "task": "t",
        "nodes": [
            {"id": "A", "kind": "Decision"},
            {"id": "X1", "kind": "Chance", "domain": "Categorical", "labels": ["1", "2"], "factor": "Identity",
             "description": "level"},
            {"id": "X2", "kind": "Chance", "domain": "Binary", "factor": "Identity", "description": "event"},
        ],
        "edges": [["A", "X1"], ["X1", "X2"]],
    })
    assert main(["compile", "--spec", spec, "--task", str(DATA / "movie_task.json")]) == 1
    assert "Intractable" in capsys.readouterr().err


def test_oracle_check_pass(capsys):
    assert main(["oracle-check", "--spec", str(DATA / "gated_chain.json"), "--trials", "200"]) == 0
    assert capsys.readouterr().out.startswith("PASS BinaryGated")


def test_eval_and_report(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["eval", "--config", str(MINI / "config.json"), "--out", str(out)]) == 0
    first = capsys.readouterr().out
    assert (out / "report.json").exists() and (out / "cells.csv").exists() and (out / "manifest.json").exists()
    assert main(["report", "--report", str(out)]) == 0
    assert capsys.readouterr().out in first


def test_eval_invalid_config(tmp_path):
    cfg = write_json(tmp_path / "c.json", {"data": {"ratings": "r"}, "provider": {"provider_name": "mock"}})
    assert main(["eval", "--config", cfg]) == 2


def test_eval_missing_config(tmp_path):
    assert main(["eval", "--config", str(tmp_path / "nope.json")]) == 2


def test_eval_missing_data(tmp_path):
    cfg = write_json(tmp_path / "c.json", {"data": {"ratings": "r.dat", "movies": "m.dat"}, "provider": {"provider_name": "mock"}})
    assert main(["eval", "--config", cfg, "--out", str(tmp_path / "o")]) == 1


def test_report_missing(tmp_path):
    assert main(["report", "--report", str(tmp_path / "missing.json")]) == 1


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["validate"], ["compile", "--task", "t", "--variant", "loud"]])
def test_usage_errors(argv):
    assert main(argv) == 2


def test_help_is_success():
    assert main(["--help"]) == 0
