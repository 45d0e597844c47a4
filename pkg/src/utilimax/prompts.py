"""Compile influence diagrams into UtilityMax prompts and build the natural-language baselines."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum

from .diagram import (
    Domain,
    Factor,
    InfluenceDiagram,
    NodeSpec,
    StructureTag,
    classify_tractability,
    declaration_order,
    diagram_fingerprint,
    validate_structure,
)

RESPONSE_TAG = "utilimax-json"


class Variant(str, Enum):
    UTILITYMAX = "UtilityMax"
    BASIC = "Basic"
    HARSH = "Harsh"

    @classmethod
    def parse(cls, raw: str) -> Variant:
        for v in cls:
            if v.value.lower() == raw.lower():
                return v
        raise ValueError(f"unknown variant {raw!r}")


class CompileError(ValueError):
    pass


@dataclass(frozen=True)
class TaskSpec:
    description: str
    context: str = ""
    candidate_instruction: str = ""
    top_k: int | None = None
    basic_preference: str = ""
    harsh_preference: str = ""

    def __post_init__(self) -> None:
        if not self.description.strip():
            raise CompileError("task description must be non-empty")
        if self.top_k is not None and self.top_k < 1:
            raise CompileError("top_k must be positive")


_TASK_KEYS = {"description", "context", "candidate_instruction", "top_k", "basic_preference", "harsh_preference"}


def task_from_dict(doc: dict) -> TaskSpec:
    if not isinstance(doc, dict):
        raise CompileError("task document must be a JSON object")
    unknown = set(doc) - _TASK_KEYS
    if unknown:
        raise CompileError(f"unknown key(s) in task document: {', '.join(sorted(unknown))}")
    return TaskSpec(**doc)


def load_task(path) -> TaskSpec:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CompileError(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return task_from_dict(doc)


@dataclass(frozen=True)
class PromptArtifact:
    variant: Variant
    text: str
    diagram_fingerprint: str = ""
    objective_rendering: str = ""

    @property
    def fingerprint(self) -> str:
        return prompt_fingerprint(self.text)


def prompt_fingerprint(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Rendering helpers
# ---------------------------------------------------------------------------

_K_PARAGRAPH = (
    "Formally, let K represent your knowledge. This includes all your internal knowledge stored "
    "through your parameters as well as any external knowledge provided in this prompt or chat history."
)
_A_PARAGRAPH = "Let P(A | K) represent your probability distribution over answers given K. Let a be an answer in A."


def _num(x: float) -> str:
    return f"{x:g}"


def _join(items: list[str]) -> str:
    if len(items) == 1:
        return items[0]
    return ", ".join(items[:-1]) + " and " + items[-1]


def _gate_condition(parents: list[NodeSpec]) -> str:
    return " and ".join(f"{p.id} = 1" for p in parents)


def render_term(node: NodeSpec, parents: list[NodeSpec] = ()) -> str:
    """The quantity elicited for one node, e.g. ``P(G1=1 | A=a)`` or ``E[X3 | X1=1, A=a]``."""
    given = ", ".join([f"{p.id}=1" for p in parents] + ["A=a"])
    if node.factor is Factor.CONSTANT_ONE:
        return f"E[f_{node.id}({node.id}) | {given}]"
    if node.domain is Domain.BINARY:
        return f"P({node.id}=1 | {given})"
    return f"E[{node.id} | {given}]"


def render_variable_block(n: NodeSpec, parents: list[NodeSpec]) -> str:
    description = n.description.strip().rstrip(".")
    if n.domain is Domain.BINARY and not description.lower().startswith("whether"):
        description = "whether " + description
    given = "given answer a"
    if parents:
        given += " and given " + _gate_condition(parents)
    text = f"Let {n.id} | A=a be a random variable representing {description} {given}."
    if n.domain is Domain.CATEGORICAL:
        labels = ", ".join(n.labels)
        scores = ", ".join(_num(s) for s in n.scores)
        text += f" {n.id} takes one of the labels {labels} with scores {scores} respectively."
    if n.factor is Factor.CONSTANT_ONE:
        text += f" f_{n.id}({n.id}) = 1 for every value of {n.id}."
    if parents:
        text += f" {n.id} can only be active given that {_gate_condition(parents)}."
    return text


def _response_format(variant: Variant, terms: dict[str, str] | None, top_k: int | None) -> str:
    if variant is Variant.UTILITYMAX:
        estimates = ", ".join(f'"{node_id}": <{term}>' for node_id, term in terms.items())
        example = (
            '{"candidates": [{"id": "<candidate id>", "estimates": {' + estimates + '}, "objective": <O(a)>}], '
            '"answer": ["<candidate id>"]}'
        )
        if top_k:
            answer = f'"answer" lists the {top_k} candidate ids with the highest O(a) in descending order of O(a).'
        else:
            answer = '"answer" holds the id of a*.'
        tail = f'Include one entry in "candidates" for every candidate answer you evaluated. {answer}'
    else:
        example = '{"answer": ["<candidate id>", ...]}'
        count = f"the {top_k} " if top_k else "the "
        tail = f'"answer" lists {count}ids of your chosen candidate answers, best first.'
    return (
        f"Respond with your final result in a fenced code block tagged {RESPONSE_TAG}, exactly in this form:\n\n"
        f"```{RESPONSE_TAG}\n{example}\n```\n\n{tail}"
    )


def _preamble(task: TaskSpec) -> list[str]:
    sections = [f"I want you to solve the following task: {task.description.strip().rstrip('.')}."]
    if task.candidate_instruction.strip():
        sections.append(task.candidate_instruction.strip())
    if task.context.strip():
        sections.append(task.context.strip())
    return sections


def _render(sections: list[str]) -> str:
    return "\n\n".join(sections) + "\n"


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def compile_utilitymax_prompt(task: TaskSpec, d: InfluenceDiagram) -> PromptArtifact:
    report = validate_structure(d)
    if not report.ok:
        raise CompileError("invalid diagram: " + "; ".join(v.message for v in report.violations))
    structure = classify_tractability(d)
    if structure.tag is StructureTag.INTRACTABLE:
        raise CompileError(f"diagram is Intractable: {structure.detail}")
    gated = structure.tag is StructureTag.BINARY_GATED

    order = declaration_order(d)[1:]
    blocks = []
    terms: dict[str, str] = {}
    for node_id in order:
        node = d.node(node_id)
        parents = [d.node(p) for p in d.chance_parents(node_id)] if gated else []
        blocks.append(render_variable_block(node, parents))
        terms[node_id] = render_term(node, parents)

    objective = "O(a) = " + " x ".join(terms.values())
    last_step = (
        f"3. Return the {task.top_k} candidate answers with the highest O(a), in descending order of O(a)."
        if task.top_k
        else "3. Return the answer a* that maximises O."
    )
    steps = "\n".join(
        [
            "1. Generate a set of candidate answers.",
            f"2. For each candidate answer, estimate {_join(list(terms.values()))} individually "
            "using your internal knowledge then compute O(a) for that candidate.",
            last_step,
        ]
    )
    sections = _preamble(task) + [_K_PARAGRAPH, _A_PARAGRAPH] + blocks
    sections.append(
        "Your task is to use your domain expertise to find the optimal answer a* that maximises "
        f"{objective}. To do this you must:"
    )
    sections.append(steps)
    sections.append(_response_format(Variant.UTILITYMAX, terms, task.top_k))
    return PromptArtifact(Variant.UTILITYMAX, _render(sections), diagram_fingerprint(d), objective)


def compile_baseline_prompt(task: TaskSpec, variant: Variant) -> PromptArtifact:
    variant = Variant(variant)
    if variant is Variant.UTILITYMAX:
        raise CompileError("baseline prompts are Basic or Harsh")
    preference = task.basic_preference if variant is Variant.BASIC else task.harsh_preference
    sections = _preamble(task)
    if preference.strip():
        sections.append(preference.strip())
    sections.append(_response_format(variant, None, task.top_k))
    return PromptArtifact(variant, _render(sections))


def compile_prompt(task: TaskSpec, d: InfluenceDiagram | None, variant: Variant) -> PromptArtifact:
    if Variant(variant) is Variant.UTILITYMAX:
        if d is None:
            raise CompileError("UtilityMax prompts need a diagram")
        return compile_utilitymax_prompt(task, d)
    return compile_baseline_prompt(task, variant)
