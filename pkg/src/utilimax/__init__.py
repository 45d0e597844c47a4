"""UtilityMax prompting: influence diagrams, expected-utility checks, prompt compilation and evaluation."""

from .diagram import (
    InfluenceDiagram,
    NodeSpec,
    StructureClass,
    StructureTag,
    ValidationReport,
    classify_tractability,
    parse_diagram_spec,
    serialize_diagram,
    topological_order,
    validate_structure,
)
from .prompts import PromptArtifact, TaskSpec, Variant, compile_baseline_prompt, compile_utilitymax_prompt
from .utility import (
    CandidateEstimates,
    CategoricalDist,
    Probability,
    ScalarExpectation,
    brute_force_eu,
    derive_joint_from_estimates,
    expected_utility,
    expected_utility_all_binary,
    expected_utility_ci,
    expected_utility_gated,
    select_optimal,
)

__version__ = "0.1.0"

__all__ = [
    "CandidateEstimates",
    "CategoricalDist",
    "InfluenceDiagram",
    "NodeSpec",
    "Probability",
    "PromptArtifact",
    "ScalarExpectation",
    "StructureClass",
    "StructureTag",
    "TaskSpec",
    "ValidationReport",
    "Variant",
    "brute_force_eu",
    "classify_tractability",
    "compile_baseline_prompt",
    "compile_utilitymax_prompt",
    "derive_joint_from_estimates",
    "expected_utility",
    "expected_utility_all_binary",
    "expected_utility_ci",
    "expected_utility_gated",
    "parse_diagram_spec",
    "select_optimal",
    "serialize_diagram",
    "topological_order",
    "validate_structure",
]
