"""Value types for the multi-agent assessment and arrangement chats."""

from __future__ import annotations

import enum
from dataclasses import dataclass

AGENT_NAMES = (
    "Mode", "Melody", "Harmony", "Rhythm", "Emotion",
    "Analyze", "Arrange", "Instrument", "Volume", "Mixing", "Reviewer",
    "Execution",
)

#: Assessment panel speaking order (a sequential chat: later agents see
#: earlier responses down the mode -> melody -> harmony chain).
ASSESSMENT_ORDER = ("Mode", "Melody", "Harmony", "Rhythm", "Emotion")

#: Arrangement group-chat speaking order, following the sequence of
#: music production: analysis, arrangement, orchestration, dynamics, mix.
ARRANGEMENT_ORDER = ("Analyze", "Arrange", "Instrument", "Volume", "Mixing", "Reviewer")

PROMPT_TECHNIQUES = frozenset({"role_play", "chain_of_thought", "few_shot"})

#: The 19 assessment criteria: id -> (agent that judges it, criterion text).
CRITERIA: dict[int, tuple[str, str]] = {
    1: ("Mode", "The mode is clear"),
    2: ("Mode", "The tonality is stable"),
    3: ("Melody", "Reasonable chord progression"),
    4: ("Melody", "The chords are diverse, not monotonous"),
    5: ("Melody", "Appropriate variation"),
    6: ("Melody", "Appropriate repetition"),
    7: ("Harmony", "Very harmonious"),
    8: ("Harmony", "Rich, not monotonous"),
    9: ("Harmony", "The orchestration is reasonable"),
    10: ("Harmony", "The instruments collaborate well"),
    11: ("Rhythm", "The rhythm is clear"),
    12: ("Rhythm", "The beat is consistently the same"),
    13: ("Rhythm", "The rhythmic pattern has appropriate variation"),
    14: ("Rhythm", "The rhythmic pattern has appropriate repetition"),
    15: ("Emotion", "The mode matches the emotion"),
    16: ("Emotion", "The chord progression matches the emotion"),
    17: ("Emotion", "The rhythm matches the emotion"),
    18: ("Emotion", "The choice of instruments matches the emotion"),
    19: ("Emotion", "The playing techniques fit the emotion (e.g., staccato, legato)"),
}

MAX_SCORE = len(CRITERIA)


def criteria_for(agent: str) -> tuple[int, ...]:
    """Criterion ids judged by ``agent``, ascending."""
    return tuple(cid for cid, (name, _) in sorted(CRITERIA.items()) if name == agent)


class AgentError(ValueError):
    """Invariant violation or failure inside the agent layer."""


class AssessmentError(AgentError):
    """Assessment could not finish; carries the partial transcript."""

    def __init__(self, message: str, transcript: "ChatTranscript"):
        super().__init__(message)
        self.transcript = transcript


class ArrangementError(AgentError):
    """Arrangement could not finish; carries the partial transcript."""

    def __init__(self, message: str, transcript: "ChatTranscript"):
        super().__init__(message)
        self.transcript = transcript


@dataclass(frozen=True)
class AgentSpec:
    """One agent: its name, persona prompt, and prompting techniques."""

    name: str
    role_prompt: str
    technique_flags: frozenset[str] = frozenset({"role_play"})
    few_shot_examples: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.name not in AGENT_NAMES:
            allowed = ", ".join(AGENT_NAMES)
            raise AgentError(f"unknown agent name {self.name!r} (known: {allowed})")
        if not self.role_prompt or not self.role_prompt.strip():
            raise AgentError(f"agent {self.name} needs a non-empty role prompt")
        flags = frozenset(self.technique_flags)
        if not flags <= PROMPT_TECHNIQUES:
            raise AgentError(f"unknown technique flags {sorted(flags - PROMPT_TECHNIQUES)}")
        object.__setattr__(self, "technique_flags", flags)
        object.__setattr__(self, "few_shot_examples", tuple(tuple(p) for p in self.few_shot_examples))
        if "few_shot" in flags and not self.few_shot_examples:
            raise AgentError(f"agent {self.name} is flagged few_shot but has no examples")


@dataclass(frozen=True)
class CriterionResult:
    """Verdict on one of the 19 criteria."""

    id: int
    agent: str
    verdict: bool
    rationale: str

    def __post_init__(self):
        if self.id not in CRITERIA:
            raise AgentError(f"criterion id {self.id} outside 1..{MAX_SCORE}")
        expected = CRITERIA[self.id][0]
        if self.agent != expected:
            raise AgentError(f"criterion {self.id} belongs to {expected}, not {self.agent}")


@dataclass(frozen=True)
class ScoreCard:
    """All 19 criterion verdicts; total is the count of passes."""

    criteria: tuple[CriterionResult, ...]
    total: int = -1

    def __post_init__(self):
        ordered = tuple(sorted(self.criteria, key=lambda c: c.id))
        ids = [c.id for c in ordered]
        if ids != list(range(1, MAX_SCORE + 1)):
            raise AgentError(f"score card must cover criteria 1..{MAX_SCORE} exactly once, got ids {ids}")
        object.__setattr__(self, "criteria", ordered)
        computed = sum(1 for c in ordered if c.verdict)
        if self.total >= 0 and self.total != computed:
            raise AgentError(f"total {self.total} does not match {computed} true verdicts")
        object.__setattr__(self, "total", computed)

    def by_agent(self, agent: str) -> tuple[CriterionResult, ...]:
        return tuple(c for c in self.criteria if c.agent == agent)

    def verdict(self, criterion_id: int) -> bool:
        return self.criteria[criterion_id - 1].verdict


@dataclass(frozen=True)
class ChatTurn:
    """One exchange: the full prompt sent and the response received.

    Timestamps are the turn counter of the run (0, 1, 2, ...) so that
    transcripts are reproducible with deterministic backends.
    """

    agent: str
    prompt: str
    response: str
    timestamp: int

    def __post_init__(self):
        if self.agent not in AGENT_NAMES:
            raise AgentError(f"unknown agent name {self.agent!r} in transcript")
        if self.timestamp < 0:
            raise AgentError("turn timestamp must be non-negative")


@dataclass(frozen=True)
class ChatTranscript:
    """Ordered record of every exchange in one chat session."""

    turns: tuple[ChatTurn, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple(self.turns))
        stamps = [t.timestamp for t in self.turns]
        if stamps != sorted(set(stamps)):
            raise AgentError("transcript timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.turns)

    def agents(self) -> tuple[str, ...]:
        return tuple(t.agent for t in self.turns)

    def positions(self, agent: str) -> tuple[int, ...]:
        return tuple(i for i, t in enumerate(self.turns) if t.agent == agent)

    def last_response(self, agent: str) -> str | None:
        for turn in reversed(self.turns):
            if turn.agent == agent:
                return turn.response
        return None


class GateDecision(enum.Enum):
    """Outcome of the assessment gate after one candidate melody."""

    PROCEED = "proceed"
    REGENERATE = "regenerate"
    GIVE_UP = "give_up"
