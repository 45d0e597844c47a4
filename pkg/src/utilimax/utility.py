"""Expected utility of candidate answers.

Three factorized evaluators cover the tractable regimes (conditionally
independent chance nodes, binary gating, and the all-binary special case).
``brute_force_eu`` is the independent check: it materializes the full joint
distribution from per-node tables and sums probability times utility over
every assignment.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Union

import numpy as np

from .diagram import (
    Domain,
    Factor,
    InfluenceDiagram,
    NodeSpec,
    StructureTag,
    classify_tractability,
    topological_order,
)

MAX_JOINT_SIZE = 2**20
DIST_TOLERANCE = 1e-6
ROW_TOLERANCE = 1e-12


class EstimateError(ValueError):
    """An estimate is missing, out of range, or does not fit its node."""

    def __init__(self, message: str, node_id: str | None = None):
        super().__init__(message)
        self.node_id = node_id


class RegimeError(ValueError):
    """The evaluator was called on a diagram outside its regime."""


class JointTooLargeError(ValueError):
    pass


class MissingRowError(KeyError):
    pass


@dataclass(frozen=True)
class Probability:
    p: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.p <= 1.0):
            raise EstimateError(f"probability out of range: {self.p}")


@dataclass(frozen=True)
class CategoricalDist:
    probs: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        for label, q in self.probs:
            if not (0.0 <= q <= 1.0):
                raise EstimateError(f"probability out of range for label {label!r}: {q}")
        if abs(math.fsum(q for _, q in self.probs) - 1.0) > DIST_TOLERANCE:
            raise EstimateError("categorical probabilities must sum to 1")

    @classmethod
    def of(cls, mapping: Mapping[str, float]) -> CategoricalDist:
        return cls(tuple((str(k), float(v)) for k, v in mapping.items()))

    def as_dict(self) -> dict[str, float]:
        return dict(self.probs)


@dataclass(frozen=True)
class ScalarExpectation:
    value: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise EstimateError(f"expectation must be finite: {self.value}")


EstimateEntry = Union[Probability, CategoricalDist, ScalarExpectation]


@dataclass(frozen=True)
class CandidateEstimates:
    candidate_id: str
    per_node: Mapping[str, EstimateEntry]
    answer_text: str = ""
    objective: float | None = None


@dataclass(frozen=True)
class SelectionResult:
    best_candidate_id: str
    ranked: tuple[tuple[str, float], ...]
    tie_note: str | None = None


@dataclass(frozen=True)
class NodeTable:
    """Conditional table of one chance node with the decision fixed to one candidate.

    ``rows`` maps an assignment of the chance parents (outcome labels, in
    ``parents`` order) to a distribution over ``outcomes``; ``values`` holds the
    factor value of each outcome.
    """

    parents: tuple[str, ...]
    outcomes: tuple[str, ...]
    values: tuple[float, ...]
    rows: Mapping[tuple[str, ...], tuple[float, ...]]


@dataclass(frozen=True)
class JointModel:
    tables: Mapping[str, NodeTable] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for node_id, table in self.tables.items():
            if len(table.values) != len(table.outcomes):
                raise ValueError(f"table for {node_id} has {len(table.values)} values for {len(table.outcomes)} outcomes")
            for key, row in table.rows.items():
                if len(row) != len(table.outcomes) or any(q < 0 for q in row):
                    raise ValueError(f"bad row {key} in table for {node_id}")
                if abs(math.fsum(row) - 1.0) > ROW_TOLERANCE:
                    raise ValueError(f"row {key} of {node_id} sums to {math.fsum(row)!r}")


# ---------------------------------------------------------------------------
# Per-node expectations
# ---------------------------------------------------------------------------


def _score_range(node: NodeSpec) -> tuple[float, float]:
    return min(node.scores), max(node.scores)


def node_expectation(node: NodeSpec, entry: EstimateEntry) -> float:
    """E[f(X) | conditioning] for one chance node from its elicited estimate."""
    if node.domain is Domain.BINARY:
        if not isinstance(entry, Probability):
            raise EstimateError(f"binary node {node.id} needs a probability estimate", node.id)
        value = entry.p
    elif node.domain is Domain.CATEGORICAL:
        if isinstance(entry, CategoricalDist):
            dist = entry.as_dict()
            unknown = set(dist) - set(node.labels)
            if unknown:
                raise EstimateError(f"unknown label(s) {sorted(unknown)} for node {node.id}", node.id)
            value = math.fsum(node.score_of(label) * q for label, q in entry.probs)
        elif isinstance(entry, ScalarExpectation):
            lo, hi = _score_range(node)
            if not lo <= entry.value <= hi:
                raise EstimateError(f"expectation out of range: {node.id}", node.id)
            value = entry.value
        else:
            raise EstimateError(f"categorical node {node.id} needs a distribution or expectation", node.id)
    else:
        if not isinstance(entry, ScalarExpectation):
            raise EstimateError(f"node {node.id} needs a scalar expectation", node.id)
        value = entry.value
    if node.factor is Factor.CONSTANT_ONE:
        return 1.0
    return value


def _checked_entries(d: InfluenceDiagram, est: CandidateEstimates) -> dict[str, EstimateEntry]:
    chance = {n.id for n in d.chance_nodes}
    for node_id in est.per_node:
        if node_id not in chance:
            raise EstimateError(f"unknown node id: {node_id}", node_id)
    for node_id in sorted(chance):
        if node_id not in est.per_node:
            raise EstimateError(f"missing estimate for node {node_id}", node_id)
    return dict(est.per_node)


def _product(d: InfluenceDiagram, est: CandidateEstimates) -> float:
    entries = _checked_entries(d, est)
    result = 1.0
    for node_id in topological_order(d)[1:]:
        result *= node_expectation(d.node(node_id), entries[node_id])
    return result


def _require_regime(d: InfluenceDiagram, *allowed: StructureTag) -> StructureTag:
    tag = classify_tractability(d).tag
    if tag not in allowed:
        raise RegimeError(f"diagram is {tag.value}; expected {' or '.join(t.value for t in allowed)}")
    return tag


def expected_utility_ci(d: InfluenceDiagram, est: CandidateEstimates) -> float:
    _require_regime(d, StructureTag.CONDITIONALLY_INDEPENDENT)
    return _product(d, est)


def expected_utility_gated(d: InfluenceDiagram, est: CandidateEstimates) -> float:
    """Product of gate probabilities of internal nodes and leaf expectations, all conditioned on active parents."""
    _require_regime(d, StructureTag.BINARY_GATED)
    for node in d.chance_nodes:
        if not d.is_leaf(node.id) and not isinstance(est.per_node.get(node.id, Probability(0.0)), Probability):
            raise EstimateError(f"internal node {node.id} needs a probability estimate", node.id)
    return _product(d, est)


def is_all_binary(d: InfluenceDiagram) -> bool:
    return all(n.domain is Domain.BINARY and n.factor is Factor.IDENTITY for n in d.chance_nodes)


def expected_utility_all_binary(d: InfluenceDiagram, est: CandidateEstimates) -> float:
    if not is_all_binary(d):
        bad = next(n.id for n in d.chance_nodes if n.domain is not Domain.BINARY or n.factor is not Factor.IDENTITY)
        raise RegimeError(f"non-binary node present: {bad}")
    _require_regime(d, StructureTag.CONDITIONALLY_INDEPENDENT, StructureTag.BINARY_GATED)
    return _product(d, est)


def expected_utility(d: InfluenceDiagram, est: CandidateEstimates) -> float:
    """Dispatch to the evaluator matching the diagram's regime."""
    tag = classify_tractability(d).tag
    if tag is StructureTag.CONDITIONALLY_INDEPENDENT:
        return expected_utility_ci(d, est)
    if tag is StructureTag.BINARY_GATED:
        return expected_utility_gated(d, est)
    raise RegimeError("diagram is Intractable; no factorized expected utility")


def evaluate_candidates(d: InfluenceDiagram, candidates: Iterable[CandidateEstimates]) -> list[CandidateEstimates]:
    return [replace(c, objective=expected_utility(d, c)) for c in candidates]


def select_optimal(results: Iterable[CandidateEstimates]) -> SelectionResult:
    results = list(results)
    if not results:
        raise ValueError("no candidates to select from")
    for c in results:
        if c.objective is None:
            raise ValueError(f"candidate {c.candidate_id} has no computed objective")
    ranked = sorted(((c.candidate_id, c.objective) for c in results), key=lambda item: (-item[1], item[0]))
    groups = [
        [cid for cid, _ in grp]
        for _, grp in itertools.groupby(ranked, key=lambda item: item[1])
    ]
    tied = [g for g in groups if len(g) > 1]
    note = None
    if tied:
        note = "; ".join(f"exact tie between {', '.join(g)} broken by candidate id" for g in tied)
    return SelectionResult(ranked[0][0], tuple(ranked), note)


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------


def _on_distribution(node: NodeSpec, entry: EstimateEntry) -> tuple[tuple[str, ...], tuple[float, ...], tuple[float, ...]]:
    """Outcomes, factor values and the active-parents distribution for one node."""
    node_expectation(node, entry)  # validates kind and range
    constant = node.factor is Factor.CONSTANT_ONE
    if node.domain is Domain.BINARY:
        values = (1.0, 1.0) if constant else (0.0, 1.0)
        return ("0", "1"), values, (1.0 - entry.p, entry.p)
    if isinstance(entry, CategoricalDist):
        dist = entry.as_dict()
        values = tuple(1.0 for _ in node.labels) if constant else node.scores
        return node.labels, values, tuple(dist.get(label, 0.0) for label in node.labels)
    # Only the expectation is elicited: a point mass on the elicited value, with a
    # zero-valued outcome that absorbs the mass when the gate is off.
    return ("off", "on"), (0.0, 1.0 if constant else entry.value), (0.0, 1.0)


def derive_joint_from_estimates(d: InfluenceDiagram, est: CandidateEstimates) -> JointModel:
    tag = _require_regime(d, StructureTag.CONDITIONALLY_INDEPENDENT, StructureTag.BINARY_GATED)
    entries = _checked_entries(d, est)
    tables: dict[str, NodeTable] = {}
    for node_id in topological_order(d)[1:]:
        node = d.node(node_id)
        entry = entries[node_id]
        if tag is StructureTag.BINARY_GATED and not d.is_leaf(node_id) and not isinstance(entry, Probability):
            raise EstimateError(f"internal node {node_id} needs a probability estimate", node_id)
        outcomes, values, on_row = _on_distribution(node, entry)
        parents = tuple(d.chance_parents(node_id)) if tag is StructureTag.BINARY_GATED else ()
        if not parents:
            tables[node_id] = NodeTable((), outcomes, values, {(): on_row})
            continue
        if node.domain is not Domain.BINARY and "off" not in outcomes:
            outcomes, values, on_row = outcomes + ("off",), values + (0.0,), on_row + (0.0,)
        off_index = outcomes.index("0") if node.domain is Domain.BINARY else outcomes.index("off")
        off_row = tuple(1.0 if i == off_index else 0.0 for i in range(len(outcomes)))
        parent_outcomes = [tables[p].outcomes for p in parents]
        rows = {}
        for assignment in itertools.product(*parent_outcomes):
            rows[assignment] = on_row if all(v == "1" for v in assignment) else off_row
        tables[node_id] = NodeTable(parents, outcomes, values, rows)
    return JointModel(tables)


def joint_size(d: InfluenceDiagram) -> int:
    """Upper bound on the number of joint assignments the oracle may enumerate."""
    size = 1
    for n in d.chance_nodes:
        if n.domain is Domain.CATEGORICAL:
            size *= len(n.labels) + 1
        else:
            size *= 2
    return size


def brute_force_eu(d: InfluenceDiagram, jm: JointModel) -> float:
    """Sum of P(x) * prod_i f_i(x_i) over every full assignment x of the chance nodes."""
    order = [node_id for node_id in topological_order(d)[1:]]
    missing = [node_id for node_id in order if node_id not in jm.tables]
    if missing:
        raise MissingRowError(f"no table for node(s) {', '.join(missing)}")
    axis = {node_id: i for i, node_id in enumerate(order)}
    shape = tuple(len(jm.tables[node_id].outcomes) for node_id in order)
    size = math.prod(shape)
    if size > MAX_JOINT_SIZE:
        raise JointTooLargeError(f"joint too large: {size} assignments > {MAX_JOINT_SIZE}")

    joint = np.ones(shape)
    utility = np.ones(shape)
    for node_id in order:
        table = jm.tables[node_id]
        involved = [axis[p] for p in table.parents] + [axis[node_id]]
        cpt = np.empty([shape[a] for a in involved])
        parent_outcomes = [jm.tables[p].outcomes for p in table.parents]
        for assignment in itertools.product(*[range(len(o)) for o in parent_outcomes]):
            key = tuple(parent_outcomes[i][j] for i, j in enumerate(assignment))
            if key not in table.rows:
                raise MissingRowError(f"no row {key} in table for {node_id}")
            cpt[assignment] = table.rows[key]
        perm = np.argsort(involved)
        cpt = np.transpose(cpt, perm)
        full = [1] * len(order)
        for a in involved:
            full[a] = shape[a]
        joint = joint * cpt.reshape(full)
        values = np.asarray(table.values).reshape([shape[a] if a == axis[node_id] else 1 for a in range(len(order))])
        utility = utility * values
    return math.fsum((joint * utility).ravel())
