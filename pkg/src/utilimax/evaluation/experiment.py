"""End-to-end runs: users x runs x prompt variants, scored and tested for significance."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import statistics
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..diagram import InfluenceDiagram, load_diagram
from ..llm import ProviderConfig, ProviderConfigError, make_provider, send_batch
from ..prompts import PromptArtifact, Variant, compile_prompt
from ..responses import ResponseParseError, Verdict, audit_consistency, parse_response
from .data import (
    EligibilityCriteria,
    build_user_task,
    load_movies,
    load_ratings,
    select_eligible_users,
)
from .metrics import InsufficientRecommendationsError, ndcg_at_k, precision_at_k
from .movies import movie_diagram, movie_task_spec
from .stats import DegenerateTestError, wilcoxon_one_sided_paired

log = logging.getLogger(__name__)

METRICS = ("precision_at_k", "ndcg_at_k")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    ratings_path: Path
    movies_path: Path
    provider: ProviderConfig
    seed: int = 0
    users: int = 20
    runs: int = 20
    variants: tuple[Variant, ...] = (Variant.UTILITYMAX, Variant.BASIC, Variant.HARSH)
    k: int = 10
    eligibility: EligibilityCriteria = field(default_factory=EligibilityCriteria)
    std_over: str = "users"
    gain: str = "binary"
    diagram_path: Path | None = None
    output_dir: Path | None = None
    config_hash: str = ""


_CONFIG_KEYS = {"data", "provider", "seed", "users", "runs", "variants", "k", "eligibility", "std_over", "gain", "diagram", "output_dir"}


def _resolve(base: Path, value: str | None) -> Path | None:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def config_from_dict(doc: dict, base_dir: Path = Path(".")) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    try:
        data = doc["data"]
        provider_doc = dict(doc["provider"])
    except (KeyError, TypeError):
        raise ConfigError("config needs 'data' and 'provider' sections") from None
    if not isinstance(data, dict) or set(data) != {"ratings", "movies"}:
        raise ConfigError("'data' needs exactly the keys 'ratings' and 'movies'")
    allowed = {f.name for f in fields(ProviderConfig)}
    if set(provider_doc) - allowed:
        raise ConfigError(f"unknown provider key(s): {', '.join(sorted(set(provider_doc) - allowed))}")
    if provider_doc.get("fixture_path"):
        provider_doc["fixture_path"] = str(_resolve(base_dir, provider_doc["fixture_path"]))
    try:
        provider = ProviderConfig(**provider_doc)
        variants = tuple(Variant.parse(v) for v in doc.get("variants", ["utilitymax", "basic", "harsh"]))
        eligibility = EligibilityCriteria(**doc.get("eligibility", {}))
        cfg = ExperimentConfig(
            ratings_path=_resolve(base_dir, data["ratings"]),
            movies_path=_resolve(base_dir, data["movies"]),
            provider=provider,
            seed=int(doc.get("seed", 0)),
            users=int(doc.get("users", 20)),
            runs=int(doc.get("runs", 20)),
            variants=variants,
            k=int(doc.get("k", 10)),
            eligibility=eligibility,
            std_over=doc.get("std_over", "users"),
            gain=doc.get("gain", "binary"),
            diagram_path=_resolve(base_dir, doc.get("diagram")),
            output_dir=_resolve(base_dir, doc.get("output_dir")),
            config_hash=hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest(),
        )
    except (TypeError, ValueError, ProviderConfigError) as exc:
        raise ConfigError(str(exc)) from None
    if not variants or len(set(variants)) != len(variants):
        raise ConfigError("variants must be a non-empty list without repeats")
    if cfg.users < 1 or cfg.runs < 1 or cfg.k < 1:
        raise ConfigError("users, runs and k must be positive")
    if cfg.k > cfg.eligibility.candidate_size:
        raise ConfigError("k cannot exceed the candidate pool size")
    if cfg.std_over not in ("users", "cells"):
        raise ConfigError("std_over must be 'users' or 'cells'")
    if cfg.gain not in ("binary", "graded"):
        raise ConfigError("gain must be 'binary' or 'graded'")
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return config_from_dict(doc, path.parent)


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CellResult:
    user_id: int
    run_index: int
    variant: str
    precision_at_k: float | None
    ndcg_at_k: float | None
    parse_failure: bool
    failure_kind: str | None = None
    consistency_verdict: str | None = None
    attempts: int = 1


@dataclass
class MetricsReport:
    per_cell: list[CellResult] = field(default_factory=list)
    aggregates: dict[str, dict[str, dict[str, float]]] = field(default_factory=dict)
    p_values: dict[str, float | None] = field(default_factory=dict)
    improvements: dict[str, dict[str, float | None]] = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "per_cell": [asdict(c) for c in self.per_cell],
            "aggregates": self.aggregates,
            "p_values": self.p_values,
            "improvements": self.improvements,
            "manifest": self.manifest,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> MetricsReport:
        return cls(
            per_cell=[CellResult(**c) for c in doc.get("per_cell", [])],
            aggregates=doc.get("aggregates", {}),
            p_values=doc.get("p_values", {}),
            improvements=doc.get("improvements", {}),
            manifest=doc.get("manifest", {}),
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = [f.name for f in fields(CellResult)]
        writer = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
        writer.writeheader()
        for c in self.per_cell:
            writer.writerow(asdict(c))
        return buf.getvalue()


def pair_key(a: str, b: str) -> str:
    return f"{a} vs {b}"


def relative_improvement(report: MetricsReport, pair: tuple[str, str], metric: str) -> float:
    """Percentage by which the first variant's mean exceeds the second's."""
    a, b = pair
    try:
        mean_a = report.aggregates[a][metric]["mean"]
        mean_b = report.aggregates[b][metric]["mean"]
    except KeyError:
        raise KeyError(f"both {a} and {b} need aggregates for {metric}") from None
    if mean_b == 0:
        raise ZeroDivisionError(f"baseline {b} has zero mean {metric}")
    return 100.0 * (mean_a / mean_b - 1.0)


def format_percentage(value: float) -> str:
    return f"{value:.1f}%"


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------


def _score(recommended: list[str], relevant: set[str], k: int, gains: dict[str, float] | None) -> tuple[float, float]:
    return precision_at_k(recommended, relevant, k), ndcg_at_k(recommended, relevant, k, gains)


def _evaluate_cell(text: str, variant: Variant, d: InfluenceDiagram, relevant, k, gains):
    """Return (precision, ndcg, failure_kind, verdict) for one successful query."""
    verdict = None
    try:
        parsed = parse_response(text, d, variant)
    except ResponseParseError as exc:
        return None, None, exc.kind, (Verdict.UNPARSEABLE.value if variant is Variant.UTILITYMAX else None)
    if variant is Variant.UTILITYMAX:
        audit = audit_consistency(parsed, d)
        verdict = audit.verdict.value
        if audit.verdict is Verdict.UNPARSEABLE:
            return None, None, "unevaluable", verdict
        # the recomputed ranking is authoritative, not the model's declared order
        recommended = list(audit.recomputed_ranking)
    else:
        recommended = list(parsed.declared_answer)
    try:
        p, n = _score(recommended, relevant, k, gains)
    except InsufficientRecommendationsError:
        return None, None, "too-few-recommendations", verdict
    except ValueError:
        return None, None, "duplicate-recommendations", verdict
    return p, n, None, verdict


def _aggregate(cells: list[CellResult], variants, std_over: str):
    aggregates: dict[str, dict[str, dict[str, float]]] = {}
    user_means: dict[str, dict[str, dict[int, float]]] = {}
    for v in variants:
        ok = [c for c in cells if c.variant == v and not c.parse_failure]
        aggregates[v] = {}
        user_means[v] = {}
        for metric in METRICS:
            values = [getattr(c, metric) for c in ok]
            by_user: dict[int, list[float]] = {}
            for c in ok:
                by_user.setdefault(c.user_id, []).append(getattr(c, metric))
            means = {u: statistics.fmean(vals) for u, vals in sorted(by_user.items())}
            user_means[v][metric] = means
            if not values:
                continue
            spread = list(means.values()) if std_over == "users" else values
            aggregates[v][metric] = {
                "mean": statistics.fmean(values),
                "std": statistics.pstdev(spread),
                "n": len(values),
            }
    return aggregates, user_means


def run_experiment(cfg: ExperimentConfig, provider=None) -> MetricsReport:
    """Run every (user, run, variant) cell and assemble the report.

    Individual failures (transport, parsing, too few answers) are recorded per
    cell and excluded from the aggregates; the run itself always completes.
    """
    ratings = load_ratings(cfg.ratings_path)
    movies = load_movies(cfg.movies_path)
    d = load_diagram(cfg.diagram_path) if cfg.diagram_path else movie_diagram(cfg.eligibility.required_genres)
    users = select_eligible_users(ratings, movies, cfg.eligibility, cfg.users, cfg.seed)
    tasks = {u: build_user_task(u, ratings, movies, cfg.eligibility) for u in users}

    prompts: dict[tuple[int, Variant], PromptArtifact] = {}
    for u in sorted(users):
        spec = movie_task_spec(tasks[u], cfg.k, cfg.eligibility)
        for v in cfg.variants:
            prompts[(u, v)] = compile_prompt(spec, d, v)

    keys = [(u, r, v) for u in sorted(users) for r in range(cfg.runs) for v in cfg.variants]
    provider = provider if provider is not None else make_provider(cfg.provider)
    records = send_batch([prompts[(u, v)] for u, _, v in keys], cfg.provider, provider)

    cells = []
    for (u, r, v), record in zip(keys, records):
        task = tasks[u]
        relevant = {str(m) for m in task.relevant}
        gains = {str(m): float(rating) for m, rating in task.candidate_ratings} if cfg.gain == "graded" else None
        if not record.outcome.ok:
            cells.append(CellResult(u, r, v.value, None, None, True, record.outcome.kind.value, None, record.attempt_count))
            continue
        p, n, failure, verdict = _evaluate_cell(record.outcome.text, v, d, relevant, cfg.k, gains)
        cells.append(CellResult(u, r, v.value, p, n, failure is not None, failure, verdict, record.attempt_count))

    names = [v.value for v in cfg.variants]
    aggregates, user_means = _aggregate(cells, names, cfg.std_over)

    p_values: dict[str, float | None] = {}
    improvements: dict[str, dict[str, float | None]] = {}
    report = MetricsReport(cells, aggregates, p_values, improvements)
    um = Variant.UTILITYMAX.value
    if um in names:
        for b in names:
            if b == um:
                continue
            key = pair_key(um, b)
            x_means, y_means = user_means[um]["ndcg_at_k"], user_means[b]["ndcg_at_k"]
            shared = sorted(set(x_means) & set(y_means))
            try:
                p_values[key] = wilcoxon_one_sided_paired([x_means[u] for u in shared], [y_means[u] for u in shared])
            except DegenerateTestError:
                p_values[key] = None
            improvements[key] = {}
            for metric in METRICS:
                try:
                    improvements[key][metric] = relative_improvement(report, (um, b), metric)
                except (KeyError, ZeroDivisionError):
                    improvements[key][metric] = None

    report.manifest = _manifest(cfg, users, cells)
    return report


def _manifest(cfg: ExperimentConfig, users: list[int], cells: list[CellResult]) -> dict:
    failures: dict[str, dict[str, int]] = {}
    verdicts: dict[str, int] = Counter()
    for c in cells:
        if c.parse_failure:
            failures.setdefault(c.variant, Counter())[c.failure_kind] += 1
        if c.consistency_verdict:
            verdicts[c.consistency_verdict] += 1
    total = Counter(c.variant for c in cells)
    return {
        "seed": cfg.seed,
        "config_hash": cfg.config_hash,
        "provider": cfg.provider.provider_name,
        "model_id": cfg.provider.model_id,
        "users": sorted(users),
        "runs": cfg.runs,
        "variants": [v.value for v in cfg.variants],
        "k": cfg.k,
        "std_over": cfg.std_over,
        "gain": cfg.gain,
        "cells": len(cells),
        "failure_counts": {v: dict(sorted(cnt.items())) for v, cnt in sorted(failures.items())},
        "failure_rate": {v: sum(failures.get(v, {}).values()) / n for v, n in sorted(total.items())},
        "consistency_verdicts": dict(sorted(verdicts.items())),
    }


def write_report(report: MetricsReport, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / "report.json",
        "cells": out / "cells.csv",
        "manifest": out / "manifest.json",
    }
    paths["report"].write_text(report.to_json(), encoding="utf-8")
    paths["cells"].write_text(report.to_csv(), encoding="utf-8")
    paths["manifest"].write_text(json.dumps(report.manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths


def load_report(path) -> MetricsReport:
    return MetricsReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
