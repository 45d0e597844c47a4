"""Influence diagrams with a single decision root and an implicit multiplicative utility.

A diagram is loaded from a JSON document with the top-level keys ``task``,
``nodes`` and ``edges``::

    {
      "task": "Recommend movies",
      "nodes": [
        {"id": "A", "kind": "Decision"},
        {"id": "G1", "kind": "Chance", "domain": "Binary", "factor": "Identity",
         "description": "the movie belongs to the comedy genre"}
      ],
      "edges": [["A", "G1"]]
    }

Every chance node contributes exactly one factor to the utility product, so the
utility node itself is never stored.
"""

from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable


class NodeKind(str, Enum):
    DECISION = "Decision"
    CHANCE = "Chance"


class Domain(str, Enum):
    BINARY = "Binary"
    CATEGORICAL = "Categorical"
    SCALAR = "ScalarExpectation"


class Factor(str, Enum):
    IDENTITY = "Identity"
    SCORE_MAP = "ScoreMap"
    CONSTANT_ONE = "ConstantOne"


class StructureTag(str, Enum):
    CONDITIONALLY_INDEPENDENT = "ConditionallyIndependent"
    BINARY_GATED = "BinaryGated"
    INTRACTABLE = "Intractable"


class DiagramSpecError(ValueError):
    """Raised when a diagram document cannot be parsed."""


class InvalidDiagramError(ValueError):
    """Raised when an operation needs a structurally valid diagram and gets something else."""


@dataclass(frozen=True)
class NodeSpec:
    id: str
    kind: NodeKind
    domain: Domain | None = None
    description: str = ""
    factor: Factor | None = None
    labels: tuple[str, ...] = ()
    scores: tuple[float, ...] = ()

    @property
    def is_decision(self) -> bool:
        return self.kind is NodeKind.DECISION

    def score_of(self, label: str) -> float:
        return self.scores[self.labels.index(label)]


@dataclass(frozen=True)
class InfluenceDiagram:
    nodes: tuple[NodeSpec, ...]
    edges: tuple[tuple[str, str], ...]
    task: str = ""
    _by_id: dict[str, NodeSpec] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_by_id", {n.id: n for n in self.nodes})

    def node(self, node_id: str) -> NodeSpec:
        return self._by_id[node_id]

    def __contains__(self, node_id: object) -> bool:
        return node_id in self._by_id

    @property
    def decision(self) -> NodeSpec:
        return next(n for n in self.nodes if n.is_decision)

    @property
    def chance_nodes(self) -> tuple[NodeSpec, ...]:
        return tuple(n for n in self.nodes if not n.is_decision)

    def parents(self, node_id: str) -> list[str]:
        return sorted({p for p, c in self.edges if c == node_id})

    def children(self, node_id: str) -> list[str]:
        return sorted({c for p, c in self.edges if p == node_id})

    def chance_parents(self, node_id: str) -> list[str]:
        return [p for p in self.parents(node_id) if p in self and not self.node(p).is_decision]

    def is_leaf(self, node_id: str) -> bool:
        return not self.children(node_id)


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str
    offenders: tuple[str, ...] = ()


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def rules(self) -> set[str]:
        return {v.rule for v in self.violations}


@dataclass(frozen=True)
class StructureClass:
    tag: StructureTag
    detail: str


# ---------------------------------------------------------------------------
# Parsing and serialization
# ---------------------------------------------------------------------------

_TOP_KEYS = {"task", "nodes", "edges"}
_NODE_KEYS = {"id", "kind", "domain", "labels", "scores", "description", "factor"}


def _enum_value(enum_cls: type[Enum], raw: object, what: str, node_id: str) -> Enum:
    if isinstance(raw, str):
        for member in enum_cls:
            if member.value.lower() == raw.lower():
                return member
    allowed = ", ".join(m.value for m in enum_cls)
    raise DiagramSpecError(f"unknown node {what} {raw!r} on node {node_id!r} (expected one of {allowed})")


def _parse_node(raw: object, index: int) -> NodeSpec:
    if not isinstance(raw, dict):
        raise DiagramSpecError(f"nodes[{index}] must be an object")
    unknown = set(raw) - _NODE_KEYS
    if unknown:
        raise DiagramSpecError(f"unknown key(s) in nodes[{index}]: {', '.join(sorted(unknown))}")
    node_id = raw.get("id")
    if not isinstance(node_id, str) or not node_id:
        raise DiagramSpecError(f"nodes[{index}] needs a non-empty string id")
    if "kind" not in raw:
        raise DiagramSpecError(f"node {node_id!r} is missing 'kind'")
    kind = _enum_value(NodeKind, raw["kind"], "kind", node_id)

    domain = factor = None
    if kind is NodeKind.CHANCE:
        if "domain" not in raw:
            raise DiagramSpecError(f"chance node {node_id!r} is missing 'domain'")
        domain = _enum_value(Domain, raw["domain"], "domain", node_id)
        factor = _enum_value(Factor, raw.get("factor", "Identity"), "factor", node_id)
    else:
        for key in ("domain", "factor", "labels", "scores"):
            if key in raw:
                raise DiagramSpecError(f"decision node {node_id!r} may not carry {key!r}")

    labels = raw.get("labels", [])
    scores = raw.get("scores", [])
    if not isinstance(labels, list) or not all(isinstance(x, (str, int, float)) for x in labels):
        raise DiagramSpecError(f"labels of node {node_id!r} must be a list of strings")
    if not isinstance(scores, list) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in scores
    ):
        raise DiagramSpecError(f"scores of node {node_id!r} must be a list of numbers")
    if domain is Domain.CATEGORICAL and labels and not scores:
        # numeric labels double as their own scores
        try:
            scores = [float(x) for x in labels]
        except ValueError:
            raise DiagramSpecError(f"categorical node {node_id!r} has non-numeric labels and no scores") from None

    description = raw.get("description", "")
    if not isinstance(description, str):
        raise DiagramSpecError(f"description of node {node_id!r} must be a string")
    return NodeSpec(
        id=node_id,
        kind=kind,
        domain=domain,
        description=description,
        factor=factor,
        labels=tuple(str(x) for x in labels),
        scores=tuple(float(x) for x in scores),
    )


def diagram_from_dict(doc: object) -> InfluenceDiagram:
    if not isinstance(doc, dict):
        raise DiagramSpecError("diagram document must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise DiagramSpecError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    task = doc.get("task", "")
    if not isinstance(task, str):
        raise DiagramSpecError("'task' must be a string")
    raw_nodes = doc.get("nodes")
    if not isinstance(raw_nodes, list):
        raise DiagramSpecError("'nodes' must be a list")
    nodes = tuple(_parse_node(raw, i) for i, raw in enumerate(raw_nodes))
    ids = {n.id for n in nodes}

    raw_edges = doc.get("edges", [])
    if not isinstance(raw_edges, list):
        raise DiagramSpecError("'edges' must be a list")
    edges = []
    for i, raw in enumerate(raw_edges):
        if not (isinstance(raw, list) and len(raw) == 2 and all(isinstance(x, str) for x in raw)):
            raise DiagramSpecError(f"edges[{i}] must be a [parent, child] pair of node ids")
        for endpoint in raw:
            if endpoint not in ids:
                raise DiagramSpecError(f"dangling edge reference: {endpoint}")
        edges.append((raw[0], raw[1]))
    return InfluenceDiagram(nodes=nodes, edges=tuple(edges), task=task)


def parse_diagram_spec(text: str) -> InfluenceDiagram:
    """Parse a JSON diagram document.

    Raises:
        DiagramSpecError: on malformed JSON (with line and column), unknown keys,
            unknown kinds/domains/factors, or edges naming undefined nodes.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DiagramSpecError(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return diagram_from_dict(doc)


def load_diagram(path) -> InfluenceDiagram:
    with open(path, encoding="utf-8") as fh:
        return parse_diagram_spec(fh.read())


def diagram_to_dict(d: InfluenceDiagram) -> dict:
    nodes = []
    for n in d.nodes:
        entry: dict = {"id": n.id, "kind": n.kind.value}
        if n.domain is not None:
            entry["domain"] = n.domain.value
        if n.labels:
            entry["labels"] = list(n.labels)
        if n.scores:
            entry["scores"] = list(n.scores)
        if n.description or not n.is_decision:
            entry["description"] = n.description
        if n.factor is not None:
            entry["factor"] = n.factor.value
        nodes.append(entry)
    return {"task": d.task, "nodes": nodes, "edges": [list(e) for e in d.edges]}


def serialize_diagram(d: InfluenceDiagram) -> str:
    return json.dumps(diagram_to_dict(d), indent=2, ensure_ascii=False) + "\n"


def diagram_fingerprint(d: InfluenceDiagram) -> str:
    canonical = json.dumps(diagram_to_dict(d), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Structural validation
# ---------------------------------------------------------------------------


def _find_cycle(ids: Iterable[str], edges: Iterable[tuple[str, str]]) -> list[str] | None:
    succ: dict[str, list[str]] = {i: [] for i in ids}
    for p, c in edges:
        if p in succ and c in succ and p != c:
            succ[p].append(c)
    state: dict[str, int] = {}
    stack: list[str] = []

    def visit(u: str) -> list[str] | None:
        state[u] = 1
        stack.append(u)
        for v in sorted(succ[u]):
            if state.get(v) == 1:
                return stack[stack.index(v):] + [v]
            if v not in state:
                found = visit(v)
                if found:
                    return found
        state[u] = 2
        stack.pop()
        return None

    for u in sorted(succ):
        if u not in state:
            found = visit(u)
            if found:
                return found
    return None


def _check_node(d: InfluenceDiagram, n: NodeSpec) -> list[Violation]:
    out = []
    if n.is_decision:
        return out
    if not n.description.strip():
        out.append(Violation("description", f"chance node {n.id} has an empty description", (n.id,)))
    if n.domain is Domain.CATEGORICAL:
        if len(n.labels) < 2:
            out.append(Violation("categorical-labels", f"categorical node {n.id} needs at least 2 labels", (n.id,)))
        if len(set(n.labels)) != len(n.labels):
            out.append(Violation("categorical-labels", f"categorical node {n.id} repeats a label", (n.id,)))
        if len(n.scores) != len(n.labels):
            out.append(Violation("categorical-labels", f"categorical node {n.id} needs one score per label", (n.id,)))
        elif len(set(n.scores)) != len(n.scores):
            out.append(Violation("categorical-labels", f"categorical node {n.id} has repeated scores", (n.id,)))
    elif n.labels or n.scores:
        out.append(Violation("categorical-labels", f"only categorical nodes carry labels/scores ({n.id})", (n.id,)))

    if n.factor is Factor.SCORE_MAP:
        if n.domain is not Domain.CATEGORICAL:
            out.append(Violation("factor-domain", f"ScoreMap factor needs a categorical domain ({n.id})", (n.id,)))
        if n.id in d and not d.is_leaf(n.id):
            out.append(Violation("factor-placement", f"ScoreMap factor is only allowed on leaf nodes ({n.id})", (n.id,)))
    return out


def validate_structure(d: InfluenceDiagram) -> ValidationReport:
    """Report every structural rule the diagram breaks. Never raises."""
    violations: list[Violation] = []
    ids = [n.id for n in d.nodes]
    seen: set[str] = set()
    for i in ids:
        if i in seen:
            violations.append(Violation("unique-ids", f"duplicate node id {i}", (i,)))
        seen.add(i)

    decisions = [n.id for n in d.nodes if n.is_decision]
    if len(decisions) != 1:
        violations.append(
            Violation("singular-decision-root", f"expected exactly one decision node, found {len(decisions)}", tuple(decisions))
        )
    if not d.chance_nodes:
        violations.append(Violation("min-chance-nodes", "at least one chance node is required"))

    seen_edges: set[tuple[str, str]] = set()
    for p, c in d.edges:
        for endpoint in (p, c):
            if endpoint not in seen:
                violations.append(Violation("dangling-edge", f"dangling edge reference: {endpoint}", (p, c)))
        if p == c:
            violations.append(Violation("self-edge", f"self edge on {p}", (p, c)))
        if (p, c) in seen_edges:
            violations.append(Violation("duplicate-edge", f"duplicate edge {p}->{c}", (p, c)))
        seen_edges.add((p, c))
        if c in d and d.node(c).is_decision:
            violations.append(Violation("singular-decision-root", f"decision node {c} has a parent ({p})", (p, c)))

    cycle = _find_cycle(seen, d.edges)
    if cycle:
        violations.append(Violation("acyclicity", "cycle " + " -> ".join(cycle), tuple(cycle[:-1])))

    if len(decisions) == 1:
        reached = {decisions[0]}
        frontier = [decisions[0]]
        while frontier:
            u = frontier.pop()
            for p, c in d.edges:
                if p == u and c not in reached:
                    reached.add(c)
                    frontier.append(c)
        unreachable = sorted(n.id for n in d.chance_nodes if n.id not in reached)
        if unreachable:
            violations.append(
                Violation("reachability", f"not reachable from decision node: {', '.join(unreachable)}", tuple(unreachable))
            )

    for n in d.nodes:
        violations.extend(_check_node(d, n))
    return ValidationReport(tuple(violations))


def _require_valid(d: InfluenceDiagram) -> None:
    report = validate_structure(d)
    if not report.ok:
        raise InvalidDiagramError("; ".join(v.message for v in report.violations))


def classify_tractability(d: InfluenceDiagram) -> StructureClass:
    _require_valid(d)
    decision = d.decision.id
    if all(d.parents(n.id) == [decision] for n in d.chance_nodes):
        return StructureClass(
            StructureTag.CONDITIONALLY_INDEPENDENT, "every chance node depends only on the decision node"
        )
    for node_id in topological_order(d)[1:]:
        n = d.node(node_id)
        if d.is_leaf(node_id):
            continue
        if n.domain is not Domain.BINARY:
            return StructureClass(
                StructureTag.INTRACTABLE, f"internal node {node_id} is {n.domain.value}, not Binary"
            )
        if n.factor is not Factor.IDENTITY:
            return StructureClass(
                StructureTag.INTRACTABLE, f"internal node {node_id} uses factor {n.factor.value}, not Identity"
            )
    return StructureClass(
        StructureTag.BINARY_GATED, "all internal chance nodes are binary with identity factors"
    )


def topological_order(d: InfluenceDiagram, key: Callable[[str], object] | None = None) -> list[str]:
    """Kahn's algorithm with a deterministic tie-break (node id unless ``key`` is given).

    The decision node always comes first because it is the only source of a
    valid diagram.
    """
    _require_valid(d)
    key = key or (lambda node_id: node_id)
    indegree = {n.id: 0 for n in d.nodes}
    for _, c in d.edges:
        indegree[c] += 1
    heap = [(key(i), i) for i, deg in indegree.items() if deg == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, u = heapq.heappop(heap)
        order.append(u)
        for c in d.children(u):
            indegree[c] -= 1
            if indegree[c] == 0:
                heapq.heappush(heap, (key(c), c))
    return order


def declaration_order(d: InfluenceDiagram) -> list[str]:
    """Topological order that breaks ties by position in the source document."""
    position = {n.id: i for i, n in enumerate(d.nodes)}
    return topological_order(d, key=position.__getitem__)


def regime(d: InfluenceDiagram) -> StructureTag:
    return classify_tractability(d).tag
