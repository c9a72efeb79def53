"""Sequential-chat melody assessment, the regenerate gate, and musicality scoring."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TypeVar

from ..audio import Waveform
from ..notation import AbcScore, MidiSong, NotationError, midi_to_abc, validate_abc
from ..diagnostics import has_errors
from .backends import LlmBackend
from .prompts import (
    RETRY_INSTRUCTION,
    assessment_prompt,
    check_roster,
    default_assessment_agents,
    parse_verdicts,
    system_prompt,
)
from .types import (
    ASSESSMENT_ORDER,
    AgentError,
    AgentSpec,
    AssessmentError,
    ChatTranscript,
    ChatTurn,
    CriterionResult,
    GateDecision,
    MAX_SCORE,
    ScoreCard,
    criteria_for,
)

#: Agents whose prompts embed the earlier agents' responses verbatim
#: (mode informs melody informs harmony); rhythm and emotion judge the
#: score alone.
_CHAINED_AGENTS = frozenset({"Melody", "Harmony"})


class _Chat:
    """Shared call bookkeeping: turn counter, transcript, transport retry."""

    def __init__(self, backend: LlmBackend, error_cls):
        self.backend = backend
        self.error_cls = error_cls
        self.turns: list[ChatTurn] = []
        self.counter = itertools.count()

    def transcript(self) -> ChatTranscript:
        return ChatTranscript(tuple(self.turns))

    def call(self, agent: str, system: str, conversation: list[tuple[str, str]]) -> str:
        last_error: Exception | None = None
        for _ in range(2):
            try:
                response = self.backend.complete(system, conversation)
                break
            except Exception as exc:  # noqa: BLE001 - backends may raise anything
                last_error = exc
        else:
            raise self.error_cls(
                f"backend failed for {agent} after retry: {last_error}", self.transcript()
            )
        prompt = system + "\n\n" + conversation[-1][1]
        self.turns.append(ChatTurn(agent=agent, prompt=prompt, response=response,
                                   timestamp=next(self.counter)))
        return response


def run_assessment(
    score: AbcScore,
    backend: LlmBackend,
    *,
    agents: Sequence[AgentSpec] | None = None,
) -> tuple[ScoreCard, ChatTranscript]:
    """Run the five-reviewer sequential chat over an ABC score.

    Replies that fail the verdict schema are retried once, then the
    agent's criteria are marked failed with rationale "unparseable".
    A backend that fails twice aborts with the partial transcript.
    """
    problems = validate_abc(score.text)
    if has_errors(problems):
        first = next(d for d in problems if d.severity == "error")
        raise AgentError(f"score does not validate: {first}")
    roster = check_roster(tuple(agents) if agents is not None else default_assessment_agents(),
                          ASSESSMENT_ORDER)

    chat = _Chat(backend, AssessmentError)
    prior: list[tuple[str, str]] = []
    results: list[CriterionResult] = []
    for name in ASSESSMENT_ORDER:
        spec = roster[name]
        ids = criteria_for(name)
        system = system_prompt(spec)
        user = assessment_prompt(spec, score.text, prior if name in _CHAINED_AGENTS else [])
        response = chat.call(name, system, [("user", user)])
        verdicts = parse_verdicts(response, ids)
        if verdicts is None:
            conversation = [("user", user), ("assistant", response), ("user", RETRY_INSTRUCTION)]
            response = chat.call(name, system, conversation)
            verdicts = parse_verdicts(response, ids)
        if verdicts is None:
            verdicts = {cid: (False, "unparseable") for cid in ids}
        results += [CriterionResult(id=cid, agent=name, verdict=v, rationale=r)
                    for cid, (v, r) in sorted(verdicts.items())]
        prior.append((name, response))
    return ScoreCard(tuple(results)), chat.transcript()


def gate(card: ScoreCard, threshold: int = 12, attempt: int = 1, max_attempts: int = 3) -> GateDecision:
    """Decide whether a scored melody proceeds, regenerates, or gives up."""
    if not 0 <= threshold <= MAX_SCORE:
        raise AgentError(f"threshold must lie in 0..{MAX_SCORE}, got {threshold}")
    if attempt < 1 or max_attempts < 1 or attempt > max_attempts:
        raise AgentError(f"need 1 <= attempt <= max_attempts, got {attempt}/{max_attempts}")
    if card.total >= threshold:
        return GateDecision.PROCEED
    if attempt < max_attempts:
        return GateDecision.REGENERATE
    return GateDecision.GIVE_UP


T = TypeVar("T")


@dataclass(frozen=True)
class GatedResult:
    """Outcome of the generate/assess/gate loop.

    When every attempt fell below the threshold the loop still returns
    the best-scoring candidate, with ``flagged`` set.
    """

    candidate: object
    card: ScoreCard
    decision: GateDecision
    attempts: int
    flagged: bool
    history: tuple[ScoreCard, ...]


def run_gated(
    generate: Callable[[int], T],
    assess: Callable[[T], tuple[ScoreCard, ChatTranscript]],
    *,
    threshold: int = 12,
    max_attempts: int = 3,
) -> GatedResult:
    """Generate candidates until one passes the gate, never exceeding
    ``max_attempts`` calls to ``generate``."""
    if max_attempts < 1:
        raise AgentError("max_attempts must be at least 1")
    best: tuple[T, ScoreCard] | None = None
    history: list[ScoreCard] = []
    for attempt in range(1, max_attempts + 1):
        candidate = generate(attempt)
        card, _transcript = assess(candidate)
        history.append(card)
        if best is None or card.total > best[1].total:
            best = (candidate, card)
        decision = gate(card, threshold, attempt, max_attempts)
        if decision is GateDecision.PROCEED:
            return GatedResult(candidate, card, decision, attempt, False, tuple(history))
        if decision is GateDecision.GIVE_UP:
            return GatedResult(best[0], best[1], decision, attempt, True, tuple(history))
    raise AssertionError("gate must proceed or give up by the last attempt")


def musicality_score(
    item: Waveform | MidiSong,
    backend: LlmBackend,
    *,
    transcriber=None,
    agents: Sequence[AgentSpec] | None = None,
) -> float:
    """Assessment total (0-19) for a song or an audio clip.

    Audio input needs a transcription backend to reach symbolic form;
    songs are converted to ABC notation directly.
    """
    if isinstance(item, Waveform):
        if transcriber is None:
            raise AgentError("scoring audio needs a transcription backend")
        item = transcriber.transcribe(item)
    if not isinstance(item, MidiSong):
        raise AgentError(f"cannot score {type(item).__name__}; expected Waveform or MidiSong")
    try:
        score = midi_to_abc(item)
    except NotationError as exc:
        raise AgentError(f"could not convert the song to ABC notation: {exc}") from exc
    card, _ = run_assessment(score, backend, agents=agents)
    return float(card.total)


def mean_musicality(items: Iterable[Waveform | MidiSong], backend: LlmBackend, **kwargs) -> float:
    totals = [musicality_score(item, backend, **kwargs) for item in items]
    if not totals:
        raise AgentError("cannot average an empty set")
    return sum(totals) / len(totals)
