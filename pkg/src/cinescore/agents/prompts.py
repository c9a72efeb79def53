"""Prompt construction for the assessment and arrangement chats.

Prompts are plain text with bracketed section markers ([score],
[conversation], [instructions], ...) so that scripted backends and
replay tooling can locate parts reliably.  Agents must answer with one
fenced JSON block; the schema for each agent is embedded both in the
instructions and in its few-shot example.
"""

from __future__ import annotations

import json
import re

from ..notation import MidiSong
from .types import AgentSpec, AgentError, criteria_for, CRITERIA

JSON_FENCE = re.compile(r"```(?:json)?[ \t]*\n(.*?)```", re.DOTALL)

RETRY_INSTRUCTION = (
    "Your previous reply could not be parsed. Reply again with exactly one "
    "fenced JSON block following the schema, and nothing else."
)

FINAL_SCHEME_INSTRUCTION = (
    "Produce the final scheme now: reply with one fenced JSON block holding "
    "the complete scheme document (version, global, tracks)."
)

_ASSESSMENT_ROLES = {
    "Mode": (
        "You are the mode reviewer on a film-music assessment panel. Using music "
        "theory, judge whether the melody establishes a clear mode and keeps a "
        "stable tonality."
    ),
    "Melody": (
        "You are the melody reviewer on a film-music assessment panel. Judge the "
        "chord progression, its variety, and the balance of variation and "
        "repetition, taking the mode reviewer's findings into account."
    ),
    "Harmony": (
        "You are the harmony reviewer on a film-music assessment panel. Judge how "
        "harmonious and rich the texture is and whether the orchestration lets "
        "the instruments collaborate, in light of the mode and melody reviews."
    ),
    "Rhythm": (
        "You are the rhythm reviewer on a film-music assessment panel. Judge the "
        "clarity of the rhythm, the steadiness of the beat, and the balance of "
        "rhythmic variation and repetition."
    ),
    "Emotion": (
        "You are the emotional-expression reviewer on a film-music assessment "
        "panel. Judge whether mode, chords, rhythm, instrument choice, and "
        "playing techniques all serve the intended emotion."
    ),
}

_ARRANGEMENT_ROLES = {
    "Analyze": (
        "You are the analysis lead of an arrangement session. Summarize the "
        "development characteristics of the video, then specify whether each "
        "measure should be forte or piano."
    ),
    "Arrange": (
        "You are the arranger. Specify which measures of which tracks should be "
        "softened, and duplicate tracks where extra harmony is needed."
    ),
    "Instrument": (
        "You are the orchestrator. Assign an appropriate instrument to every "
        "track, choosing names only from the provided instrument registry."
    ),
    "Volume": (
        "You are the dynamics engineer. Design the volume envelope of every "
        "track as (time, gain dB) breakpoints."
    ),
    "Mixing": (
        "You are the mix engineer. Set the pan and the reverb level for every "
        "track, and the global reverb and master gain."
    ),
    "Reviewer": (
        "You are the reviewing producer. Review whether the arrangement and mix "
        "match the video in every aspect, examine the playing techniques and "
        "effectiveness of the instruments, and develop the final scheme."
    ),
}

_VERDICT_SCHEMA = (
    '{"verdicts": [{"id": <criterion id>, "verdict": <true|false>, '
    '"rationale": "<short reason>"}, ...]}'
)

_AGENT_SCHEMAS = {
    "Analyze": (
        '{"harmony_counts": {"<measure>": <count>}, '
        '"measure_dynamics": {"<measure>": "forte"|"piano"}, '
        '"development": "<summary>"}'
    ),
    "Arrange": '{"soften": {"<track>": [<measure>, ...]}, "duplicates": [<track>, ...]}',
    "Instrument": '{"summary": "<original instrument types>", "selection": {"<plan>": "<instrument name>"}}',
    "Volume": '{"volume_envelope": {"<plan>": [[<time s>, <gain dB>], ...]}}',
    "Mixing": (
        '{"pan": {"<plan>": <-1..1>}, "reverb_send": {"<plan>": <0..1>}, '
        '"reverb_level": <0..1>, "master_gain": <dB>}'
    ),
    "Reviewer": (
        '{"revise": {"agents": ["Instrument"|"Volume", ...], "notes": "<what to fix>"}} '
        'if a revision is needed, otherwise the final scheme document '
        '{"version": 1, "global": {...}, "tracks": [...]}'
    ),
}

_ARRANGEMENT_DUTIES = {
    "Analyze": (
        "First count the harmonies in each measure and write the counts down. "
        "Then, using those counts and the visual description, classify every "
        "measure of the piece as forte or piano and summarize the development."
    ),
    "Arrange": (
        "Decide which measures of which tracks should be softened, and list "
        "any tracks to duplicate for extra harmony."
    ),
    "Instrument": (
        "First summarize the instrument types already present in the score. "
        "Then assign one registry instrument to each plan: the original tracks "
        "in order, followed by the duplicates the arranger requested."
    ),
    "Volume": "Design a volume envelope for every plan, as strictly increasing times.",
    "Mixing": (
        "Set a pan in [-1, 1] and a reverb send in [0, 1] for every plan, plus "
        "the global reverb level and master gain."
    ),
    "Reviewer": (
        "Review the whole arrangement and mix against the visual description. "
        "If Instrument or Volume should revise their answers, reply with a "
        "revise request naming them; otherwise reply with the final scheme "
        "document."
    ),
}


def _example(agent: str) -> tuple[str, str]:
    """One miniature (input, output) template pair per agent."""
    if agent in _ASSESSMENT_ROLES:
        ids = criteria_for(agent)
        verdicts = [{"id": i, "verdict": True, "rationale": "holds throughout"} for i in ids]
        payload = json.dumps({"verdicts": verdicts})
        return (
            f"[score]\nX:1\nM:4/4\nL:1/8\nK:C\nC2 E2 G2 E2 |]\n\nRespond for criteria ids: "
            + ", ".join(str(i) for i in ids),
            f"```json\n{payload}\n```",
        )
    samples = {
        "Analyze": {"harmony_counts": {"0": 2, "1": 3}, "measure_dynamics": {"0": "piano", "1": "forte"},
                    "development": "tension builds into the second measure"},
        "Arrange": {"soften": {"0": [1]}, "duplicates": [0]},
        "Instrument": {"summary": "one violin-range lead, one low accompaniment",
                       "selection": {"0": "violin", "1": "cello", "2": "string ensemble"}},
        "Volume": {"volume_envelope": {"0": [[0.0, 0.0], [4.0, -6.0]]}},
        "Mixing": {"pan": {"0": -0.3, "1": 0.3}, "reverb_send": {"0": 0.2, "1": 0.2},
                   "reverb_level": 0.3, "master_gain": 0.0},
        "Reviewer": {"version": 1, "global": {"reverb_level": 0.3, "master_gain": 0.0},
                     "tracks": [{"source_track": 0, "instrument": "violin"}]},
    }
    return (
        "[score facts]\ntracks=2\nmeasures=2\nduration=4.000",
        f"```json\n{json.dumps(samples[agent])}\n```",
    )


def default_assessment_agents() -> tuple[AgentSpec, ...]:
    return tuple(
        AgentSpec(
            name=name,
            role_prompt=_ASSESSMENT_ROLES[name],
            technique_flags=frozenset({"role_play", "few_shot"}),
            few_shot_examples=(_example(name),),
        )
        for name in ("Mode", "Melody", "Harmony", "Rhythm", "Emotion")
    )


def default_arrangement_agents() -> tuple[AgentSpec, ...]:
    cot = {"Analyze", "Instrument"}
    return tuple(
        AgentSpec(
            name=name,
            role_prompt=_ARRANGEMENT_ROLES[name],
            technique_flags=frozenset(
                {"role_play", "few_shot"} | ({"chain_of_thought"} if name in cot else set())
            ),
            few_shot_examples=(_example(name),),
        )
        for name in ("Analyze", "Arrange", "Instrument", "Volume", "Mixing", "Reviewer")
    )


def check_roster(agents: tuple[AgentSpec, ...], expected_order: tuple[str, ...]) -> dict[str, AgentSpec]:
    names = [a.name for a in agents]
    if len(set(names)) != len(names):
        raise AgentError(f"agent names must be unique within a session, got {names}")
    if tuple(names) != expected_order:
        raise AgentError(f"agent roster must be {expected_order} in order, got {tuple(names)}")
    return {a.name: a for a in agents}


def system_prompt(spec: AgentSpec) -> str:
    parts = [f"Agent: {spec.name}", "", spec.role_prompt]
    if "chain_of_thought" in spec.technique_flags:
        parts += ["", "Work step by step and write the intermediate steps before the final JSON block."]
    if "few_shot" in spec.technique_flags:
        parts += ["", "Example exchange:"]
        for example_in, example_out in spec.few_shot_examples:
            parts += ["Input:", example_in, "Output:", example_out]
    return "\n".join(parts)


def assessment_prompt(spec: AgentSpec, score_text: str, prior: list[tuple[str, str]]) -> str:
    ids = criteria_for(spec.name)
    if not ids:
        raise AgentError(f"{spec.name} has no assessment criteria")
    parts = ["Assess the melody below, written in ABC notation.", "", "[score]", score_text.rstrip()]
    if prior:
        parts += ["", "[prior assessments]"]
        for name, response in prior:
            parts += [f"### {name}", response, ""]
    parts += ["", "[criteria]"]
    parts += [f"{i}. {CRITERIA[i][1]}" for i in ids]
    parts += [
        "",
        "Respond for criteria ids: " + ", ".join(str(i) for i in ids),
        "Reply with exactly one fenced JSON block shaped as:",
        _VERDICT_SCHEMA,
        "Cover exactly the listed ids.",
    ]
    return "\n".join(parts)


def score_facts(song: MidiSong) -> str:
    """Machine-readable facts block shared by all arrangement prompts."""
    lines = [
        f"tracks={len(song.tracks)}",
        f"measures={song.measure_count()}",
        f"duration={song.duration:.3f}",
    ]
    for track in song.tracks:
        pitches = [n.pitch for n in track.notes]
        span = f"{min(pitches)}..{max(pitches)}" if pitches else "none"
        lines.append(
            f'track {track.index}: name="{track.name}" program={track.program} '
            f"notes={len(track.notes)} pitches={span}"
        )
    return "\n".join(lines)


def arrangement_context(description: str, score_text: str, facts: str, registry_names: list[str]) -> str:
    return "\n".join([
        "You are arranging and mixing music for a film clip.",
        "",
        "[visual description]",
        description,
        "",
        "[score]",
        score_text.rstrip(),
        "",
        "[score facts]",
        facts,
        "",
        "[registry]",
        ", ".join(registry_names),
    ])


def arrangement_prompt(
    spec: AgentSpec,
    context: str,
    conversation: list[tuple[str, str]],
    extra_instruction: str | None = None,
) -> str:
    parts = [context, "", "[conversation]"]
    if conversation:
        for label, response in conversation:
            parts += [f"### {label}", response, ""]
    else:
        parts += ["(no turns yet)", ""]
    parts += ["[instructions]", _ARRANGEMENT_DUTIES[spec.name]]
    if extra_instruction:
        parts += ["", extra_instruction]
    parts += [
        "",
        "Reply with exactly one fenced JSON block shaped as:",
        _AGENT_SCHEMAS[spec.name],
    ]
    return "\n".join(parts)


def revision_instruction(notes: str) -> str:
    return (
        "The reviewer asked you to revise your earlier answer. "
        f"Reviewer notes: {notes or '(none)'} "
        "Reply again with the same JSON schema."
    )


def extract_json_block(text: str) -> str | None:
    """Raw JSON text of the first fenced block, or the whole reply if bare JSON."""
    match = JSON_FENCE.search(text)
    if match:
        return match.group(1)
    stripped = text.strip()
    if stripped.startswith("{") or stripped.startswith("["):
        return stripped
    return None


def load_json_block(text: str):
    """Decoded object of the reply's JSON block, or None if unparseable."""
    raw = extract_json_block(text)
    if raw is None:
        return None
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return None


def parse_verdicts(text: str, ids: tuple[int, ...]) -> dict[int, tuple[bool, str]] | None:
    """Validate a verdict reply: exactly the requested ids, boolean verdicts."""
    obj = load_json_block(text)
    if not isinstance(obj, dict) or not isinstance(obj.get("verdicts"), list):
        return None
    out: dict[int, tuple[bool, str]] = {}
    for item in obj["verdicts"]:
        if not isinstance(item, dict):
            return None
        cid, verdict = item.get("id"), item.get("verdict")
        rationale = item.get("rationale", "")
        if not isinstance(cid, int) or cid in out or cid not in ids:
            return None
        if not isinstance(verdict, bool) or not isinstance(rationale, str):
            return None
        out[cid] = (verdict, rationale)
    if set(out) != set(ids):
        return None
    return out
