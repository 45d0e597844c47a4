"""One-sided paired Wilcoxon signed-rank test."""

from __future__ import annotations

import math
from typing import Sequence

EXACT_MAX_N = 25


class DegenerateTestError(ValueError):
    """All paired differences are zero, so the p-value is undefined."""


def doubled_midranks(values: Sequence[float]) -> list[int]:
    """Midranks of ``values`` multiplied by two so tied ranks stay integral."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        # positions i..j (0-based) share the midrank (i+1 + j+1)/2
        for pos in range(i, j + 1):
            ranks[order[pos]] = i + j + 2
        i = j + 1
    return ranks


def _exact_upper_tail(ranks2: list[int], observed2: int) -> float:
    """P(W+ >= observed) by counting sign assignments, via a subset-sum table."""
    total = sum(ranks2)
    counts = [0] * (total + 1)
    counts[0] = 1
    reach = 0
    for r in ranks2:
        reach += r
        for s in range(reach, r - 1, -1):
            counts[s] += counts[s - r]
    hits = sum(counts[observed2:])
    return hits / 2 ** len(ranks2)


def _normal_upper_tail(ranks2: list[int], observed2: int) -> float:
    n = len(ranks2)
    w = observed2 / 2
    mean = n * (n + 1) / 4
    ties: dict[int, int] = {}
    for r in ranks2:
        ties[r] = ties.get(r, 0) + 1
    var = n * (n + 1) * (2 * n + 1) / 24 - sum(t**3 - t for t in ties.values()) / 48
    z = (w - mean - 0.5) / math.sqrt(var)
    return 0.5 * math.erfc(z / math.sqrt(2))


def wilcoxon_one_sided_paired(x: Sequence[float], y: Sequence[float]) -> float:
    """p-value for the alternative that ``x`` tends to exceed ``y``.

    Zero differences are dropped and ties get midranks. With at most 25 nonzero
    differences the p-value is exact over all sign assignments; beyond that a
    normal approximation with tie and continuity corrections is used.
    """
    if len(x) != len(y):
        raise ValueError("paired samples must have equal length")
    diffs = [a - b for a, b in zip(x, y) if a != b]
    if not diffs:
        raise DegenerateTestError("all paired differences are zero; p-value undefined")
    ranks2 = doubled_midranks([abs(d) for d in diffs])
    observed2 = sum(r for r, d in zip(ranks2, diffs) if d > 0)
    if len(diffs) <= EXACT_MAX_N:
        return _exact_upper_tail(ranks2, observed2)
    return _normal_upper_tail(ranks2, observed2)
