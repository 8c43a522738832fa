"""Deployment recommendation: environment graph schema, candidate
generation, rule-table scoring, dialog engine, and a pluggable LLM client
with a deterministic rule-based expert fallback."""

from .engine import (
    AgentOutput,
    CandidateResult,
    DialogEngine,
    DialogState,
    Phase,
    Placement,
    Recommendation,
    UserPreferences,
    generate_candidates,
    is_feasible,
    score_candidate,
    select,
)
from .llmclient import LLMClient, LLMError, parse_agent_output
from .rules import DEFAULT_RULES, ScoringRules
from .schema import (
    EnvironmentGraph,
    EnvironmentParseError,
    SensorSpec,
    parse_environment,
    serialize_environment,
)

__all__ = [
    "AgentOutput",
    "CandidateResult",
    "DialogEngine",
    "DialogState",
    "Phase",
    "Placement",
    "Recommendation",
    "UserPreferences",
    "generate_candidates",
    "is_feasible",
    "score_candidate",
    "select",
    "LLMClient",
    "LLMError",
    "parse_agent_output",
    "DEFAULT_RULES",
    "ScoringRules",
    "EnvironmentGraph",
    "EnvironmentParseError",
    "SensorSpec",
    "parse_environment",
    "serialize_environment",
]
