import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from utilimax.prompts import RESPONSE_TAG, Variant
from utilimax.responses import (
    DuplicateCandidateError,
    EstimateRangeError,
    MalformedBlockError,
    MissingEstimateError,
    NoBlockError,
    ParsedResponse,
    ResponseParseError,
    UnknownAnswerError,
    UnknownNodeError,
    Verdict,
    audit_consistency,
    parse_response,
    serialize_response,
)
from utilimax.utility import CandidateEstimates, CategoricalDist, Probability, ScalarExpectation

from conftest import movie


def block(doc) -> str:
    return f"Some reasoning first.\n\n```{RESPONSE_TAG}\n{json.dumps(doc)}\n```\n"


def cand(cid, s, g1, g2, objective=None):
    item = {"id": cid, "estimates": {"S": s, "G1": g1, "G2": g2}}
    if objective is not None:
        item["objective"] = objective
    return item


THREE = {
    "candidates": [cand("m1", 4.2, 0.9, 0.7, 2.646), cand("m2", 3.0, 0.5, 0.5, 0.75), cand("m3", 5.0, 0.1, 0.2, 0.1)],
    "answer": ["m1", "m2"],
}


def parse(doc, variant=Variant.UTILITYMAX):
    return parse_response(block(doc), movie(), variant)


class TestParse:
    def test_three_candidates(self):
        p = parse(THREE)
        assert len(p.candidates) == 3
        assert p.declared_answer == ("m1", "m2")
        assert p.candidates[0].per_node["G1"] == Probability(0.9)

    def test_baseline(self):
        ids = [f"m{i}" for i in (7, 2, 9, 4, 1, 3, 8, 5, 6, 10)]
        p = parse({"answer": ids}, Variant.BASIC)
        assert p.candidates == ()
        assert len(p.declared_answer) == 10

    def test_last_block_wins(self):
        draft = block({"answer": ["m9"]})
        p = parse_response(draft + block({"answer": ["m1"]}), None, Variant.HARSH)
        assert p.declared_answer == ("m1",)

    def test_numeric_ids_are_strings(self):
        p = parse({"answer": [12, 7]}, Variant.BASIC)
        assert p.declared_answer == ("12", "7")

    def test_categorical_distribution(self):
        doc = {"candidates": [cand("m1", {"4": 0.5, "5": 0.5}, 1, 1)], "answer": ["m1"]}
        p = parse(doc)
        assert isinstance(p.candidates[0].per_node["S"], CategoricalDist)
        assert audit_consistency(p, movie()).recomputed["m1"] == 4.5

    @pytest.mark.parametrize(
        "text, error, kind",
        [
            ("no fenced block here", NoBlockError, "no-block"),
            (f"```{RESPONSE_TAG}\n{{not json\n```", MalformedBlockError, "malformed-block"),
            (block([1, 2]), MalformedBlockError, "malformed-block"),
            (block({"candidates": [cand("m1", 4, 1.3, 0.5)], "answer": ["m1"]}), EstimateRangeError, "out-of-range"),
            (block({"candidates": [cand("m1", 6, 0.5, 0.5)], "answer": ["m1"]}), EstimateRangeError, "out-of-range"),
            (block({"candidates": [{"id": "m1", "estimates": {"S": 4, "G1": 1, "G2": 1, "G9": 1}}], "answer": ["m1"]}),
             UnknownNodeError, "unknown-node"),
            (block({"candidates": [{"id": "m1", "estimates": {"S": 4, "G1": 1}}], "answer": ["m1"]}),
             MissingEstimateError, "missing-estimate"),
            (block({"candidates": [cand("m1", 4, 1, 1), cand("m1", 3, 1, 1)], "answer": ["m1"]}),
             DuplicateCandidateError, "duplicate-candidate"),
            (block({"candidates": [cand("m1", 4, 1, 1)], "answer": ["m2"]}), UnknownAnswerError, "unknown-answer"),
        ],
    )
    def test_errors_are_distinguishable(self, text, error, kind):
        with pytest.raises(error) as info:
            parse_response(text, movie(), Variant.UTILITYMAX)
        assert info.value.kind == kind
        assert isinstance(info.value, ResponseParseError)

    def test_probability_message(self):
        with pytest.raises(EstimateRangeError, match="probability out of range: G1"):
            parse({"candidates": [cand("m1", 4, 1.3, 0.5)], "answer": ["m1"]})

    def test_baseline_needs_answer(self):
        with pytest.raises(MalformedBlockError):
            parse({"answer": []}, Variant.BASIC)


class TestAudit:
    def test_consistent(self):
        report = audit_consistency(parse(THREE), movie())
        assert report.verdict is Verdict.CONSISTENT
        assert report.recomputed["m1"] == pytest.approx(2.646, abs=1e-12)
        assert report.declared_matches_recomputed_ranking

    def test_arithmetic_drift(self):
        doc = {"candidates": [cand("m1", 4.2, 0.9, 0.7, 2.9)], "answer": ["m1"]}
        report = audit_consistency(parse(doc), movie())
        assert report.verdict is Verdict.ARITHMETIC_DRIFT
        (cid, model, actual), = report.arithmetic_deviations
        assert (cid, model) == ("m1", 2.9)
        assert actual == pytest.approx(2.646, abs=1e-12)

    def test_rounding_within_tolerance(self):
        doc = {"candidates": [cand("m1", 4.2, 0.9, 0.7, 2.647)], "answer": ["m1"]}
        assert audit_consistency(parse(doc), movie()).verdict is Verdict.CONSISTENT

    def test_ranking_mismatch(self):
        doc = dict(THREE, answer=["m2", "m1"])
        report = audit_consistency(parse(doc), movie())
        assert report.verdict is Verdict.RANKING_MISMATCH
        assert report.recomputed_ranking == ("m1", "m2", "m3")

    def test_unparseable(self):
        assert audit_consistency(None, movie()).verdict is Verdict.UNPARSEABLE
        assert audit_consistency(ParsedResponse((), ("m1",)), movie()).verdict is Verdict.UNPARSEABLE

    def test_ties_broken_by_id(self):
        doc = {"candidates": [cand("b", 2, 1, 1, 2), cand("a", 2, 1, 1, 2)], "answer": ["a", "b"]}
        assert audit_consistency(parse(doc), movie()).verdict is Verdict.CONSISTENT

    def test_order_invariant(self):
        rng = random.Random(5)
        base = parse(THREE)
        expected = audit_consistency(base, movie())
        for _ in range(10):
            shuffled = list(base.candidates)
            rng.shuffle(shuffled)
            again = audit_consistency(ParsedResponse(tuple(shuffled), base.declared_answer), movie())
            assert again == expected


_prob = st.floats(min_value=0, max_value=1, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(min_value=1, max_value=5), _prob, _prob), min_size=1, max_size=8), st.data())
def test_serialize_round_trip(rows, data):
    candidates = tuple(
        CandidateEstimates(f"c{i}", {"S": ScalarExpectation(s), "G1": Probability(g1), "G2": Probability(g2)},
                           objective=s * g1 * g2)
        for i, (s, g1, g2) in enumerate(rows)
    )
    ids = [c.candidate_id for c in candidates]
    answer = tuple(data.draw(st.permutations(ids)))
    p = ParsedResponse(candidates, answer)
    again = parse_response(serialize_response(p), movie(), Variant.UTILITYMAX)
    assert again.candidates == p.candidates
    assert again.declared_answer == p.declared_answer
