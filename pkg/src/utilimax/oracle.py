"""Randomized comparison of the factorized evaluators against full joint enumeration."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .diagram import Domain, InfluenceDiagram, StructureTag, classify_tractability
from .utility import (
    MAX_JOINT_SIZE,
    CandidateEstimates,
    CategoricalDist,
    JointTooLargeError,
    Probability,
    RegimeError,
    ScalarExpectation,
    brute_force_eu,
    derive_joint_from_estimates,
    expected_utility,
    joint_size,
)

TOLERANCE = 1e-12


def random_distribution(rng: random.Random, labels) -> CategoricalDist:
    weights = [rng.random() + 1e-3 for _ in labels]
    total = sum(weights)
    probs = [w / total for w in weights]
    # put the rounding residue on the last label so the row sums to 1 as closely as floats allow
    probs[-1] = 1.0 - sum(probs[:-1])
    return CategoricalDist(tuple(zip(labels, probs)))


def random_estimates(d: InfluenceDiagram, rng: random.Random, candidate_id: str = "a", scalar_max: float = 2.0) -> CandidateEstimates:
    per_node = {}
    for node in d.chance_nodes:
        if node.domain is Domain.BINARY:
            per_node[node.id] = Probability(rng.random())
        elif node.domain is Domain.CATEGORICAL and rng.random() < 0.5:
            per_node[node.id] = random_distribution(rng, node.labels)
        elif node.domain is Domain.CATEGORICAL:
            lo, hi = min(node.scores), max(node.scores)
            per_node[node.id] = ScalarExpectation(rng.uniform(lo, hi))
        else:
            per_node[node.id] = ScalarExpectation(rng.uniform(0.0, scalar_max))
    return CandidateEstimates(candidate_id, per_node)


def deviation(d: InfluenceDiagram, est: CandidateEstimates) -> float:
    return abs(expected_utility(d, est) - brute_force_eu(d, derive_joint_from_estimates(d, est)))


@dataclass(frozen=True)
class OracleSummary:
    trials: int
    max_deviation: float
    regime: StructureTag

    @property
    def passed(self) -> bool:
        return self.max_deviation <= TOLERANCE


def oracle_check(d: InfluenceDiagram, trials: int, seed: int) -> OracleSummary:
    tag = classify_tractability(d).tag
    if tag is StructureTag.INTRACTABLE:
        raise RegimeError("diagram is Intractable; nothing to check")
    size = joint_size(d)
    if size > MAX_JOINT_SIZE:
        raise JointTooLargeError(f"joint too large: up to {size} assignments > {MAX_JOINT_SIZE}")
    rng = random.Random(seed)
    worst = 0.0
    for _ in range(trials):
        worst = max(worst, deviation(d, random_estimates(d, rng)))
    return OracleSummary(trials, worst, tag)
