"""Plain-text tables for a finished run."""

from __future__ import annotations

from .experiment import METRICS, MetricsReport, format_percentage, pair_key

_ORDER = ("Basic", "Harsh", "UtilityMax")


def _variants(report: MetricsReport) -> list[str]:
    names = report.manifest.get("variants") or list(report.aggregates)
    return sorted(names, key=lambda v: (_ORDER.index(v) if v in _ORDER else len(_ORDER), v))


def _cell(agg: dict, metric: str) -> str:
    stats = agg.get(metric)
    if not stats:
        return "n/a"
    return f"{stats['mean']:.3f} ({stats['std']:.3f})"


def render_report(report: MetricsReport) -> str:
    k = report.manifest.get("k", 10)
    headers = {"precision_at_k": f"Precision@{k}", "ndcg_at_k": f"NDCG@{k}"}
    variants = _variants(report)
    baselines = [v for v in variants if v != "UtilityMax"]
    std_over = report.manifest.get("std_over", "users")
    lines = [f"Mean (std) per prompt variant; std over {'per-user means' if std_over == 'users' else 'cells'}", ""]

    width = max([len("Prompt")] + [len(v) for v in variants]) + 2
    lines.append("Prompt".ljust(width) + "".join(headers[m].ljust(18) for m in METRICS).rstrip())
    for v in variants:
        row = v.ljust(width) + "".join(_cell(report.aggregates.get(v, {}), m).ljust(18) for m in METRICS)
        lines.append(row.rstrip())

    lines += ["", f"One-sided paired Wilcoxon signed-rank p-values, UtilityMax vs baseline (per-user mean NDCG@{k})", ""]
    if "UtilityMax" not in variants or not baselines:
        lines.append("n/a")
    else:
        lines.append("".ljust(width) + "".join(f"vs {b}".ljust(14) for b in baselines).rstrip())
        cells = []
        for b in baselines:
            p = report.p_values.get(pair_key("UtilityMax", b))
            cells.append(("n/a" if p is None else f"{p:.4f}").ljust(14))
        lines.append(("UtilityMax".ljust(width) + "".join(cells)).rstrip())

    lines += ["", "Relative improvement of UtilityMax", ""]
    if "UtilityMax" not in variants or not baselines:
        lines.append("n/a")
    for b in baselines if "UtilityMax" in variants else []:
        parts = []
        for m in METRICS:
            value = report.improvements.get(pair_key("UtilityMax", b), {}).get(m)
            parts.append(f"{headers[m]} {'n/a' if value is None else format_percentage(value)}")
        lines.append(f"vs {b}: " + ", ".join(parts))

    rates = report.manifest.get("failure_rate", {})
    if rates:
        lines += ["", "Failure rate per variant: " + ", ".join(f"{v} {rates[v]:.1%}" for v in sorted(rates))]
    verdicts = report.manifest.get("consistency_verdicts", {})
    if verdicts:
        lines.append("Consistency verdicts (UtilityMax): " + ", ".join(f"{k_} {n}" for k_, n in sorted(verdicts.items())))
    return "\n".join(lines) + "\n"
