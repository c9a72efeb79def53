"""Arrangement-and-mix group chat: fixed speaking order, reviewer-guided revision."""

from __future__ import annotations

from typing import Mapping, Sequence

from ..diagnostics import has_errors
from ..notation import AbcScore, abc_to_midi, validate_abc
from ..scheme import ArrangementScheme, SchemeParseError, parse_scheme
from ..scheme.registry import Instrument, load_instruments
from ..vision import VisualReport, build_description, validate_visual_report
from .assessment import _Chat
from .backends import LlmBackend
from .prompts import (
    FINAL_SCHEME_INSTRUCTION,
    RETRY_INSTRUCTION,
    arrangement_context,
    arrangement_prompt,
    check_roster,
    default_arrangement_agents,
    extract_json_block,
    load_json_block,
    revision_instruction,
    score_facts,
    system_prompt,
)
from .types import (
    ARRANGEMENT_ORDER,
    AgentError,
    AgentSpec,
    ArrangementError,
    ChatTranscript,
)

#: Only these agents may be asked to revise, and only one revision round runs.
REVISABLE_AGENTS = ("Instrument", "Volume")


def _try_scheme(response: str, registry: Mapping[str, Instrument]) -> ArrangementScheme | None:
    raw = extract_json_block(response)
    if raw is None:
        return None
    try:
        return parse_scheme(raw, registry=registry)
    except SchemeParseError:
        return None


def run_arrangement(
    score: AbcScore,
    report: VisualReport,
    backend: LlmBackend,
    *,
    agents: Sequence[AgentSpec] | None = None,
    registry: Mapping[str, Instrument] | None = None,
) -> tuple[ArrangementScheme, ChatTranscript]:
    """Run the six-agent group chat and return the reviewer's final scheme.

    The reviewer may request one revision round from the Instrument and
    Volume agents before producing the scheme.  A final reply that does
    not parse as a scheme is retried once, then the run fails with the
    transcript attached.
    """
    problems = validate_abc(score.text)
    if has_errors(problems):
        first = next(d for d in problems if d.severity == "error")
        raise AgentError(f"score does not validate: {first}")
    report_problems = validate_visual_report(report)
    if has_errors(report_problems):
        first = next(d for d in report_problems if d.severity == "error")
        raise AgentError(f"visual report does not validate: {first}")
    if registry is None:
        registry = load_instruments()
    roster = check_roster(tuple(agents) if agents is not None else default_arrangement_agents(),
                          ARRANGEMENT_ORDER)

    song = abc_to_midi(score)
    context = arrangement_context(
        build_description(report), score.text, score_facts(song), sorted(registry),
    )
    chat = _Chat(backend, ArrangementError)
    conversation: list[tuple[str, str]] = []

    def speak(name: str, extra: str | None = None, label: str | None = None) -> str:
        spec = roster[name]
        user = arrangement_prompt(spec, context, conversation, extra)
        response = chat.call(name, system_prompt(spec), [("user", user)])
        conversation.append((label or name, response))
        return response

    for name in ARRANGEMENT_ORDER[:-1]:
        speak(name)

    response = speak("Reviewer")
    block = load_json_block(response)
    if isinstance(block, dict) and isinstance(block.get("revise"), dict):
        requested = block["revise"].get("agents", [])
        notes = str(block["revise"].get("notes", ""))
        for name in REVISABLE_AGENTS:
            if name in requested:
                speak(name, revision_instruction(notes), label=f"{name} (revised)")
        response = speak("Reviewer", FINAL_SCHEME_INSTRUCTION)

    scheme = _try_scheme(response, registry)
    if scheme is None:
        spec = roster["Reviewer"]
        user = arrangement_prompt(spec, context, conversation,
                                  RETRY_INSTRUCTION + " " + FINAL_SCHEME_INSTRUCTION)
        response = chat.call("Reviewer", system_prompt(spec), [("user", user)])
        conversation.append(("Reviewer", response))
        scheme = _try_scheme(response, registry)
    if scheme is None:
        raise ArrangementError(
            "the reviewer did not produce a parseable scheme after a retry",
            chat.transcript(),
        )
    return scheme, chat.transcript()
