"""Command-line entry point.

Exit codes: 0 success, 1 domain error (invalid diagram, failed check, data or
provider failure), 2 usage error (bad flags or invalid config).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .diagram import (
    DiagramSpecError,
    StructureTag,
    classify_tractability,
    load_diagram,
    validate_structure,
)
from .evaluation.data import MovieLensFormatError, NotEnoughUsersError
from .evaluation.experiment import ConfigError, load_config, load_report, run_experiment, write_report
from .evaluation.report import render_report
from .llm import ProviderConfigError
from .oracle import TOLERANCE, oracle_check
from .prompts import CompileError, Variant, compile_prompt, load_task
from .utility import JointTooLargeError, RegimeError

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


def _fail(message: str, code: int = EXIT_DOMAIN) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load(spec: str):
    try:
        return load_diagram(spec), None
    except FileNotFoundError:
        return None, f"cannot read spec file: {spec}"
    except DiagramSpecError as exc:
        return None, f"{spec}: {exc}"


def cmd_validate(args) -> int:
    d, err = _load(args.spec)
    if err:
        return _fail(err)
    report = validate_structure(d)
    if not report.ok:
        print("INVALID")
        for v in report.violations:
            where = f" [{', '.join(v.offenders)}]" if v.offenders else ""
            print(f"  {v.rule}: {v.message}{where}")
        return EXIT_DOMAIN
    structure = classify_tractability(d)
    print("OK")
    print(f"{structure.tag.value}: {structure.detail}")
    return EXIT_OK


def cmd_compile(args) -> int:
    variant = Variant.parse(args.variant)
    d = None
    if variant is Variant.UTILITYMAX or args.spec:
        if not args.spec:
            return _fail("--spec is required for the utilitymax variant", EXIT_USAGE)
        d, err = _load(args.spec)
        if err:
            return _fail(err)
    try:
        task = load_task(args.task)
        artifact = compile_prompt(task, d, variant)
    except FileNotFoundError:
        return _fail(f"cannot read task file: {args.task}")
    except (CompileError, TypeError) as exc:
        return _fail(str(exc))
    if args.out:
        Path(args.out).write_text(artifact.text, encoding="utf-8")
    else:
        sys.stdout.write(artifact.text)
    print(f"fingerprint: {artifact.fingerprint}", file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    d, err = _load(args.spec)
    if err:
        return _fail(err)
    report = validate_structure(d)
    if not report.ok:
        return _fail("invalid diagram: " + "; ".join(v.message for v in report.violations))
    if classify_tractability(d).tag is StructureTag.INTRACTABLE:
        return _fail(f"diagram is Intractable: {classify_tractability(d).detail}")
    try:
        summary = oracle_check(d, args.trials, args.seed)
    except (JointTooLargeError, RegimeError) as exc:
        return _fail(str(exc))
    status = "PASS" if summary.passed else "FAIL"
    print(f"{status} {summary.regime.value}: {summary.trials} trials, max |factorized - brute force| = "
          f"{summary.max_deviation:.3e} (tolerance {TOLERANCE:g})")
    return EXIT_OK if summary.passed else EXIT_DOMAIN


def cmd_eval(args) -> int:
    try:
        cfg = load_config(args.config)
    except FileNotFoundError:
        return _fail(f"cannot read config file: {args.config}", EXIT_USAGE)
    except ConfigError as exc:
        return _fail(f"invalid config: {exc}", EXIT_USAGE)
    out_dir = Path(args.out) if args.out else (cfg.output_dir or Path("utilimax-run"))
    try:
        report = run_experiment(cfg)
    except (FileNotFoundError, MovieLensFormatError, NotEnoughUsersError, ProviderConfigError, DiagramSpecError) as exc:
        return _fail(str(exc))
    paths = write_report(report, out_dir)
    sys.stdout.write(render_report(report))
    print()
    for name, path in paths.items():
        print(f"{name}: {path}")
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.report)
    if path.is_dir():
        path = path / "report.json"
    try:
        report = load_report(path)
    except FileNotFoundError:
        return _fail(f"cannot read report: {path}")
    except (json.JSONDecodeError, TypeError) as exc:
        return _fail(f"malformed report {path}: {exc}")
    sys.stdout.write(render_report(report))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="utilimax", description="UtilityMax influence-diagram prompting toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a diagram spec and classify its tractability")
    p.add_argument("--spec", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("compile", help="compile a prompt for one variant")
    p.add_argument("--spec")
    p.add_argument("--task", required=True)
    p.add_argument("--variant", choices=["utilitymax", "basic", "harsh"], default="utilitymax")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("oracle-check", help="compare factorized expected utility with brute-force enumeration")
    p.add_argument("--spec", required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("eval", help="run the evaluation protocol from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides the config)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="render tables from a report.json (or its directory)")
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
