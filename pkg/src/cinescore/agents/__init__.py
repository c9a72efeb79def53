"""Multi-agent assessment and arrangement over pluggable language-model backends."""

from .types import (
    AGENT_NAMES,
    ARRANGEMENT_ORDER,
    ASSESSMENT_ORDER,
    CRITERIA,
    MAX_SCORE,
    AgentError,
    AgentSpec,
    ArrangementError,
    AssessmentError,
    ChatTranscript,
    ChatTurn,
    CriterionResult,
    GateDecision,
    ScoreCard,
    criteria_for,
)
from .backends import HttpLlmBackend, LlmBackend, MockLlmBackend, ProcessLlmBackend
from .prompts import default_arrangement_agents, default_assessment_agents
from .assessment import (
    GatedResult,
    gate,
    mean_musicality,
    musicality_score,
    run_assessment,
    run_gated,
)
from .arrangement import REVISABLE_AGENTS, run_arrangement
from .transcript import read_transcript, write_transcript

__all__ = [
    "AGENT_NAMES",
    "ARRANGEMENT_ORDER",
    "ASSESSMENT_ORDER",
    "CRITERIA",
    "MAX_SCORE",
    "REVISABLE_AGENTS",
    "AgentError",
    "AgentSpec",
    "ArrangementError",
    "AssessmentError",
    "ChatTranscript",
    "ChatTurn",
    "CriterionResult",
    "GateDecision",
    "GatedResult",
    "HttpLlmBackend",
    "LlmBackend",
    "MockLlmBackend",
    "ProcessLlmBackend",
    "ScoreCard",
    "criteria_for",
    "default_arrangement_agents",
    "default_assessment_agents",
    "gate",
    "mean_musicality",
    "musicality_score",
    "read_transcript",
    "run_arrangement",
    "run_assessment",
    "run_gated",
    "write_transcript",
]
