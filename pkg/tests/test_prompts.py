import re

import pytest

from utilimax.diagram import Factor, load_diagram
from utilimax.evaluation.movies import movie_diagram
from utilimax.prompts import (
    CompileError,
    TaskSpec,
    Variant,
    compile_baseline_prompt,
    compile_prompt,
    compile_utilitymax_prompt,
    load_task,
    render_term,
    render_variable_block,
    task_from_dict,
)

from conftest import DATA, GOLDEN, binary, categorical, chain, decision, diagram, scalar

MOVIE_OBJECTIVE = "O(a) = E[S | A=a] x P(G1=1 | A=a) x P(G2=1 | A=a)"


@pytest.fixture
def movie_task():
    return load_task(DATA / "movie_task.json")


def test_golden_two_variable_template():
    d = load_diagram(GOLDEN / "template_two_variable.json")
    text = compile_utilitymax_prompt(TaskSpec("[TASK DESCRIPTION]"), d).text
    assert text.encode("utf-8") == (GOLDEN / "template_two_variable.txt").read_bytes()


def test_movie_objective_string(movie_task):
    artifact = compile_utilitymax_prompt(movie_task, movie_diagram())
    assert artifact.objective_rendering == MOVIE_OBJECTIVE
    assert MOVIE_OBJECTIVE in artifact.text


def test_binary_block():
    g1 = binary("G1", "the movie belongs to the comedy genre")
    assert render_variable_block(g1, []) == (
        "Let G1 | A=a be a random variable representing whether the movie belongs to the comedy genre given answer a."
    )


def test_categorical_block_lists_scores():
    s = categorical("S", [1, 2, 3, 4, 5], description="the rating")
    assert "scores 1, 2, 3, 4, 5" in render_variable_block(s, [])


def test_gated_chain_conditioning():
    d = chain(binary("X1"), binary("X2"))
    text = compile_utilitymax_prompt(TaskSpec("t"), d).text
    x2_block = next(line for line in text.splitlines() if line.startswith("Let X2"))
    assert "given X1 = 1" in x2_block
    assert "given that X1 = 1" in x2_block
    assert "P(X2=1 | X1=1, A=a)" in text


def test_render_term_kinds():
    assert render_term(binary("G1")) == "P(G1=1 | A=a)"
    assert render_term(scalar("X3"), [binary("X1")]) == "E[X3 | X1=1, A=a]"


def test_deterministic(movie_task):
    a = compile_utilitymax_prompt(movie_task, movie_diagram())
    b = compile_utilitymax_prompt(movie_task, movie_diagram())
    assert a.text == b.text
    assert a.fingerprint == b.fingerprint


def test_every_chance_node_defined_once_and_in_objective():
    d = diagram(
        [decision(), scalar("Y1"), binary("Y2"), categorical("Y3", [0.5, 1.5])],
        [("A", "Y1"), ("A", "Y2"), ("A", "Y3")],
    )
    artifact = compile_utilitymax_prompt(TaskSpec("t"), d)
    for node in d.chance_nodes:
        assert len(re.findall(rf"^Let {node.id} \|", artifact.text, flags=re.M)) == 1
        assert node.id in artifact.objective_rendering


def test_top_k_replaces_final_step(movie_task):
    text = compile_utilitymax_prompt(movie_task, movie_diagram()).text
    assert "3. Return the 10 candidate answers with the highest O(a), in descending order of O(a)." in text
    assert "Return the answer a* that maximises O." not in text


def test_baseline_contents(movie_task):
    basic = compile_baseline_prompt(movie_task, Variant.BASIC).text
    harsh = compile_baseline_prompt(movie_task, Variant.HARSH).text
    assert "in the mood for comedy and romance" in basic
    assert "should not suggest anything outside" in harsh
    assert "O(a)" not in basic and "O(a)" not in harsh


def test_basic_and_harsh_differ_only_in_preference(movie_task):
    basic = compile_baseline_prompt(movie_task, Variant.BASIC).text
    harsh = compile_baseline_prompt(movie_task, Variant.HARSH).text
    assert basic.replace(movie_task.basic_preference, "<PREF>") == harsh.replace(movie_task.harsh_preference, "<PREF>")


def test_candidate_pool_identical_across_variants(movie_task):
    texts = [compile_prompt(movie_task, movie_diagram(), v).text for v in Variant]
    for text in texts:
        assert movie_task.context in text
        assert movie_task.candidate_instruction in text
        assert text.startswith("I want you to solve the following task: " + movie_task.description)


def test_intractable_diagram_rejected():
    d = chain(categorical("X1", [1, 2, 3], factor=Factor.IDENTITY), binary("X2"))
    with pytest.raises(CompileError, match="Intractable"):
        compile_utilitymax_prompt(TaskSpec("t"), d)


def test_invalid_diagram_rejected():
    with pytest.raises(CompileError, match="invalid diagram"):
        compile_utilitymax_prompt(TaskSpec("t"), diagram([decision()], []))


def test_empty_task_description():
    with pytest.raises(CompileError):
        TaskSpec("  ")


def test_task_document_rejects_unknown_keys():
    with pytest.raises(CompileError, match="unknown key"):
        task_from_dict({"description": "t", "colour": "red"})


def test_utilitymax_needs_diagram(movie_task):
    with pytest.raises(CompileError):
        compile_prompt(movie_task, None, Variant.UTILITYMAX)


def test_variant_parse():
    assert Variant.parse("harsh") is Variant.HARSH
    with pytest.raises(ValueError):
        Variant.parse("gentle")
