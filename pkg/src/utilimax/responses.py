"""Extract and audit the machine-readable block in model responses."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum

from .diagram import Domain, InfluenceDiagram
from .prompts import RESPONSE_TAG, Variant
from .utility import (
    CandidateEstimates,
    CategoricalDist,
    EstimateEntry,
    EstimateError,
    Probability,
    ScalarExpectation,
    expected_utility,
    node_expectation,
)

DRIFT_TOLERANCE = 1e-3

_BLOCK = re.compile(r"```" + re.escape(RESPONSE_TAG) + r"[ \t]*\r?\n(.*?)```", re.DOTALL)


class ResponseParseError(ValueError):
    """Base class; ``kind`` is a stable label used to count failure modes."""

    kind = "parse-error"


class NoBlockError(ResponseParseError):
    kind = "no-block"


class MalformedBlockError(ResponseParseError):
    kind = "malformed-block"


class EstimateRangeError(ResponseParseError):
    kind = "out-of-range"


class UnknownNodeError(ResponseParseError):
    kind = "unknown-node"


class MissingEstimateError(ResponseParseError):
    kind = "missing-estimate"


class DuplicateCandidateError(ResponseParseError):
    kind = "duplicate-candidate"


class UnknownAnswerError(ResponseParseError):
    kind = "unknown-answer"


class Verdict(str, Enum):
    CONSISTENT = "Consistent"
    ARITHMETIC_DRIFT = "ArithmeticDrift"
    RANKING_MISMATCH = "RankingMismatch"
    UNPARSEABLE = "Unparseable"


@dataclass(frozen=True)
class ParsedResponse:
    candidates: tuple[CandidateEstimates, ...]
    declared_answer: tuple[str, ...]
    raw_text: str = ""


@dataclass(frozen=True)
class ConsistencyReport:
    verdict: Verdict
    recomputed: dict[str, float] = field(default_factory=dict)
    declared_matches_recomputed_ranking: bool = False
    arithmetic_deviations: tuple[tuple[str, float, float], ...] = ()
    recomputed_ranking: tuple[str, ...] = ()


def _is_number(x: object) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _entry(d: InfluenceDiagram, node_id: str, raw: object) -> EstimateEntry:
    if node_id not in d or d.node(node_id).is_decision:
        raise UnknownNodeError(f"unknown node id: {node_id}")
    node = d.node(node_id)
    if isinstance(raw, dict) and node.domain is Domain.CATEGORICAL:
        if not all(_is_number(v) for v in raw.values()):
            raise MalformedBlockError(f"non-numeric distribution for {node_id}")
        if any(not 0.0 <= v <= 1.0 for v in raw.values()):
            raise EstimateRangeError(f"probability out of range: {node_id}")
        try:
            entry: EstimateEntry = CategoricalDist.of(raw)
        except EstimateError as exc:
            raise EstimateRangeError(f"{exc}: {node_id}") from None
    elif not _is_number(raw):
        raise MalformedBlockError(f"estimate for {node_id} is not a number")
    elif node.domain is Domain.BINARY:
        if not 0.0 <= raw <= 1.0:
            raise EstimateRangeError(f"probability out of range: {node_id}")
        entry = Probability(float(raw))
    else:
        entry = ScalarExpectation(float(raw))
    try:
        node_expectation(node, entry)
    except EstimateError as exc:
        raise EstimateRangeError(str(exc)) from None
    return entry


def _candidate(d: InfluenceDiagram, raw: object, index: int) -> CandidateEstimates:
    if not isinstance(raw, dict) or not isinstance(raw.get("estimates"), dict):
        raise MalformedBlockError(f"candidates[{index}] needs an object with 'estimates'")
    cid = raw.get("id")
    if isinstance(cid, (int, float)) and not isinstance(cid, bool):
        cid = str(cid)
    if not isinstance(cid, str) or not cid:
        raise MalformedBlockError(f"candidates[{index}] needs an id")
    per_node = {str(k): _entry(d, str(k), v) for k, v in raw["estimates"].items()}
    missing = sorted(n.id for n in d.chance_nodes if n.id not in per_node)
    if missing:
        raise MissingEstimateError(f"candidate {cid} is missing estimates for {', '.join(missing)}")
    objective = raw.get("objective")
    if objective is not None and not _is_number(objective):
        raise MalformedBlockError(f"objective of candidate {cid} is not a number")
    return CandidateEstimates(
        candidate_id=cid,
        per_node=per_node,
        answer_text=str(raw.get("text", "")),
        objective=None if objective is None else float(objective),
    )


def extract_block(text: str) -> object:
    """Decode the last fenced response block in ``text``."""
    blocks = _BLOCK.findall(text)
    if not blocks:
        raise NoBlockError(f"no {RESPONSE_TAG} block found")
    try:
        return json.loads(blocks[-1])
    except json.JSONDecodeError as exc:
        raise MalformedBlockError(f"block is not valid JSON: {exc.msg} (line {exc.lineno})") from None


def parse_response(text: str, d: InfluenceDiagram | None, variant: Variant) -> ParsedResponse:
    doc = extract_block(text)
    if not isinstance(doc, dict):
        raise MalformedBlockError("block must hold a JSON object")
    answer = doc.get("answer")
    if not isinstance(answer, list):
        raise MalformedBlockError("block needs an 'answer' list")
    answer_ids = tuple(str(a) if isinstance(a, (int, float)) and not isinstance(a, bool) else a for a in answer)
    if not all(isinstance(a, str) and a for a in answer_ids):
        raise MalformedBlockError("answer ids must be strings")

    if Variant(variant) is not Variant.UTILITYMAX:
        if not answer_ids:
            raise MalformedBlockError("empty answer list")
        return ParsedResponse((), answer_ids, text)

    if d is None:
        raise ValueError("UtilityMax responses are parsed against a diagram")
    raw_candidates = doc.get("candidates")
    if not isinstance(raw_candidates, list) or not raw_candidates:
        raise MalformedBlockError("block needs a non-empty 'candidates' list")
    candidates = []
    seen: set[str] = set()
    for i, raw in enumerate(raw_candidates):
        cand = _candidate(d, raw, i)
        if cand.candidate_id in seen:
            raise DuplicateCandidateError(f"duplicate candidate id: {cand.candidate_id}")
        seen.add(cand.candidate_id)
        candidates.append(cand)
    unknown = [a for a in answer_ids if a not in seen]
    if unknown:
        raise UnknownAnswerError(f"answer names unevaluated candidate(s): {', '.join(unknown)}")
    return ParsedResponse(tuple(candidates), answer_ids, text)


def _estimate_json(entry: EstimateEntry) -> object:
    if isinstance(entry, Probability):
        return entry.p
    if isinstance(entry, CategoricalDist):
        return entry.as_dict()
    return entry.value


def serialize_response(p: ParsedResponse) -> str:
    doc: dict = {}
    if p.candidates:
        doc["candidates"] = []
        for c in p.candidates:
            item: dict = {"id": c.candidate_id, "estimates": {k: _estimate_json(v) for k, v in c.per_node.items()}}
            if c.objective is not None:
                item["objective"] = c.objective
            if c.answer_text:
                item["text"] = c.answer_text
            doc["candidates"].append(item)
    doc["answer"] = list(p.declared_answer)
    return f"```{RESPONSE_TAG}\n{json.dumps(doc, ensure_ascii=False)}\n```\n"


def audit_consistency(p: ParsedResponse | None, d: InfluenceDiagram) -> ConsistencyReport:
    """Recompute each candidate's objective and compare with what the model reported."""
    if p is None or not p.candidates:
        return ConsistencyReport(Verdict.UNPARSEABLE)
    try:
        recomputed = {c.candidate_id: expected_utility(d, c) for c in p.candidates}
    except ValueError:
        return ConsistencyReport(Verdict.UNPARSEABLE)

    deviations = []
    for c in sorted(p.candidates, key=lambda c: c.candidate_id):
        actual = recomputed[c.candidate_id]
        if c.objective is None or abs(c.objective - actual) > DRIFT_TOLERANCE * max(1.0, abs(actual)):
            deviations.append((c.candidate_id, c.objective, actual))

    ranking = tuple(sorted(recomputed, key=lambda cid: (-recomputed[cid], cid)))
    matches = tuple(p.declared_answer) == ranking[: len(p.declared_answer)] and bool(p.declared_answer)
    if deviations:
        verdict = Verdict.ARITHMETIC_DRIFT
    elif not matches:
        verdict = Verdict.RANKING_MISMATCH
    else:
        verdict = Verdict.CONSISTENT
    return ConsistencyReport(verdict, recomputed, matches, tuple(deviations), ranking)
