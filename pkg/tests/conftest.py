from __future__ import annotations

import random
from pathlib import Path

import pytest

from utilimax.diagram import Domain, Factor, InfluenceDiagram, NodeKind, NodeSpec

GOLDEN = Path(__file__).parent / "golden"
DATA = Path(__file__).resolve().parents[1] / "src" / "utilimax" / "data"

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def record_criterion():
    def record(name: str, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE.append((name, passed, detail))
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")


def decision(node_id: str = "A") -> NodeSpec:
    return NodeSpec(node_id, NodeKind.DECISION)


def binary(node_id: str, description: str = "", factor: Factor = Factor.IDENTITY) -> NodeSpec:
    return NodeSpec(node_id, NodeKind.CHANCE, Domain.BINARY, description or f"event {node_id} happens", factor)


def categorical(node_id: str, scores, labels=None, factor: Factor = Factor.SCORE_MAP, description: str = "") -> NodeSpec:
    labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(1, len(scores) + 1))
    return NodeSpec(
        node_id, NodeKind.CHANCE, Domain.CATEGORICAL, description or f"level of {node_id}", factor,
        labels=labels, scores=tuple(float(s) for s in scores),
    )


def scalar(node_id: str, description: str = "") -> NodeSpec:
    return NodeSpec(node_id, NodeKind.CHANCE, Domain.SCALAR, description or f"amount of {node_id}", Factor.IDENTITY)


def diagram(nodes, edges, task: str = "") -> InfluenceDiagram:
    return InfluenceDiagram(tuple(nodes), tuple(tuple(e) for e in edges), task)


def movie() -> InfluenceDiagram:
    return diagram(
        [decision(), categorical("S", [1, 2, 3, 4, 5]), binary("G1"), binary("G2")],
        [("A", "S"), ("A", "G1"), ("A", "G2")],
    )


def chain(*nodes: NodeSpec) -> InfluenceDiagram:
    ids = ["A"] + [n.id for n in nodes]
    return diagram([decision(), *nodes], list(zip(ids, ids[1:])))


def _random_leaf(rng: random.Random, node_id: str) -> NodeSpec:
    kind = rng.randrange(3)
    if kind == 0:
        return binary(node_id)
    if kind == 1:
        n = rng.randint(2, 4)
        scores = sorted(rng.sample(range(1, 200), n))
        return categorical(node_id, [s / 100 for s in scores])
    return scalar(node_id)


def random_ci_diagram(rng: random.Random, max_nodes: int = 10) -> InfluenceDiagram:
    n = rng.randint(1, max_nodes - 1)
    nodes = [_random_leaf(rng, f"X{i}") for i in range(1, n + 1)]
    return diagram([decision(), *nodes], [("A", x.id) for x in nodes])


def random_gated_diagram(rng: random.Random, max_nodes: int = 10, all_binary: bool = False) -> InfluenceDiagram:
    n = rng.randint(2, max_nodes - 1)
    ids = [f"X{i}" for i in range(1, n + 1)]
    edges: set[tuple[str, str]] = {("A", ids[0])}
    for j in range(1, n):
        parents = set(rng.sample(ids[:j], rng.randint(0, min(2, j))))
        if not parents or rng.random() < 0.3:
            parents.add("A")
        edges |= {(p, ids[j]) for p in parents}
    if all(p == "A" for p, _ in edges):
        edges.add((ids[0], ids[1]))
    internal = {p for p, _ in edges if p != "A"}
    nodes = [binary(i) if (i in internal or all_binary) else _random_leaf(rng, i) for i in ids]
    return diagram([decision(), *nodes], sorted(edges))


def eligibility_fixture():
    """Users placed just above or below each threshold; returns (ratings, movies, admitted ids)."""
    from utilimax.evaluation.data import MovieRecord, RatingEvent

    movies = [MovieRecord(i, f"Movie {i}", frozenset({"Drama"})) for i in range(1, 401)]
    movies += [MovieRecord(i, f"RomCom {i}", frozenset({"Comedy", "Romance"})) for i in range(401, 421)]
    movies.append(MovieRecord(421, "Comedy Only", frozenset({"Comedy"})))
    movies.append(MovieRecord(422, "Big RomCom Drama", frozenset({"Comedy", "Romance", "Drama"})))

    def user(uid, length, window_hits, rating=5, hit_movies=None, hit_positions=None):
        hit_movies = hit_movies or list(range(401, 401 + len(window_hits)))
        filler = iter(range(1, 401))
        placed = dict(zip(window_hits, hit_movies))
        events = []
        for pos in range(1, length + 1):
            movie_id = placed.get(pos) or next(filler)
            events.append(RatingEvent(uid, movie_id, rating if pos in placed else 3, 1_000_000 + uid * 10_000 + pos))
        return events

    window5 = [101, 110, 120, 140, 150]  # both ends of positions 101-150
    ratings = []
    ratings += user(1, 150, window5)                        # exactly at both thresholds: admitted
    ratings += user(2, 149, [101, 110, 120, 140, 149])      # 149 ratings: rejected
    ratings += user(3, 200, [101, 110, 120, 140])           # 4 positives: rejected
    ratings += user(4, 200, [100, 110, 120, 140, 150])      # one hit at position 100, outside window
    ratings += user(5, 200, [110, 120, 130, 140, 151])      # one hit at position 151, outside window
    ratings += user(6, 160, window5, rating=4)              # rating 4 counts: admitted
    ratings += user(7, 160, window5, hit_movies=[401, 402, 403, 404, 421])  # comedy-only hit: rejected
    ratings += user(8, 160, window5, hit_movies=[401, 402, 403, 404, 422])  # genre superset: admitted
    ratings += user(9, 160, [101, 110, 120, 140, 150, 130])  # six positives: admitted
    return ratings, movies, [1, 6, 8, 9]
