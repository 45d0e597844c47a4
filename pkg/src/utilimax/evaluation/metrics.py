"""Top-k ranking metrics with binary relevance (optionally graded gains)."""

from __future__ import annotations

import math
from typing import Collection, Mapping, Sequence


class InsufficientRecommendationsError(ValueError):
    pass


def _check(recommended: Sequence, k: int) -> None:
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(recommended) < k:
        raise InsufficientRecommendationsError(f"{len(recommended)} recommendations for k={k}")
    if len(set(recommended)) != len(recommended):
        raise ValueError("recommended list contains duplicates")


def precision_at_k(recommended: Sequence, relevant: Collection, k: int) -> float:
    _check(recommended, k)
    return sum(1 for item in recommended[:k] if item in relevant) / k


def ndcg_at_k(
    recommended: Sequence,
    relevant: Collection,
    k: int,
    gains: Mapping | None = None,
) -> float:
    """NDCG@k; gain is 1 for relevant items unless ``gains`` maps items to graded gains.

    Returns 0.0 when nothing is relevant.
    """
    _check(recommended, k)
    relevant = set(relevant)
    if not relevant:
        return 0.0

    def gain(item) -> float:
        if item not in relevant:
            return 0.0
        return float(gains[item]) if gains is not None else 1.0

    dcg = sum(gain(item) / math.log2(i + 2) for i, item in enumerate(recommended[:k]))
    ideal = sorted((gain(item) for item in relevant), reverse=True)[:k]
    idcg = sum(g / math.log2(i + 2) for i, g in enumerate(ideal))
    return dcg / idcg
