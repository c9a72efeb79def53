"""Language-model backends: deterministic mock, external process, HTTP.

A backend receives a system prompt and a conversation (a sequence of
(role, content) pairs, roles "user"/"assistant", ending with the
current user message) and returns the agent's reply text.  Backends
declare whether they are deterministic and whether concurrent
``complete`` calls are allowed.
"""

from __future__ import annotations

import json
import re
import subprocess
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence, runtime_checkable

from .types import AgentError
from .prompts import JSON_FENCE

Conversation = Sequence[tuple[str, str]]


@runtime_checkable
class LlmBackend(Protocol):
    deterministic: bool
    concurrent_safe: bool

    def complete(self, system_prompt: str, conversation: Conversation) -> str:
        ...


_TRACK_FACT = re.compile(
    r'track (\d+): name="[^"]*" program=(\d+) notes=(\d+) pitches=(\d+)\.\.(\d+|none|\d*)'
)
_CRITERIA_LINE = re.compile(r"Respond for criteria ids: ([0-9, ]+)")

#: Preference order the mock orchestrator uses: first instrument whose
#: range covers the track wins.
_MOCK_CANDIDATES = (("violin", 55, 103), ("flute", 60, 96), ("cello", 36, 76), ("piano", 21, 108))


def _fence(payload) -> str:
    return "```json\n" + json.dumps(payload) + "\n```"


@dataclass(frozen=True)
class _Facts:
    tracks: int
    measures: int
    duration: float
    pitch_spans: dict[int, tuple[int, int] | None]


def _parse_facts(text: str) -> _Facts:
    def grab(pattern: str, default: str) -> str:
        m = re.search(pattern, text)
        return m.group(1) if m else default

    spans: dict[int, tuple[int, int] | None] = {}
    for m in _TRACK_FACT.finditer(text):
        idx = int(m.group(1))
        spans[idx] = None if m.group(5) in ("none", "") else (int(m.group(4)), int(m.group(5)))
    return _Facts(
        tracks=int(grab(r"tracks=(\d+)", "1")),
        measures=int(grab(r"measures=(\d+)", "1")),
        duration=float(grab(r"duration=([0-9.]+)", "0")),
        pitch_spans=spans,
    )


def _conversation_blocks(text: str) -> dict[str, dict]:
    """Latest decoded JSON block per agent from a [conversation] section."""
    start = text.find("[conversation]")
    if start < 0:
        return {}
    section = text[start:]
    stop = section.find("\n[instructions]")
    if stop >= 0:
        section = section[:stop]
    blocks: dict[str, dict] = {}
    for chunk in section.split("### ")[1:]:
        label, _, body = chunk.partition("\n")
        name = label.split(" (")[0].strip()
        fence = JSON_FENCE.search(body)
        if not fence:
            continue
        try:
            obj = json.loads(fence.group(1))
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            blocks[name] = obj
    return blocks


@dataclass(frozen=True)
class MockLlmBackend:
    """Deterministic canned backend: output is a pure function of input.

    Scripting hooks let tests exercise failure paths:

    - ``fail_criteria``: assessment verdicts for these ids come back false.
    - ``malformed_agents``: these agents always answer un-parseable prose.
    - ``malformed_once_agents``: un-parseable prose until the retry
      instruction appears in the conversation, then a valid answer.
    - ``request_revision``: the Reviewer's first turn asks these agents
      to revise before producing the final scheme.
    - ``raise_for_agents``: ``complete`` raises for these agents,
      simulating a transport failure.
    """

    fail_criteria: frozenset[int] = frozenset()
    malformed_agents: frozenset[str] = frozenset()
    malformed_once_agents: frozenset[str] = frozenset()
    request_revision: frozenset[str] = frozenset()
    raise_for_agents: frozenset[str] = frozenset()
    deterministic: bool = field(default=True)
    concurrent_safe: bool = field(default=True)

    def complete(self, system_prompt: str, conversation: Conversation) -> str:
        first_line = system_prompt.splitlines()[0] if system_prompt else ""
        agent = first_line.removeprefix("Agent: ").strip()
        if agent in self.raise_for_agents:
            raise RuntimeError(f"backend unavailable for {agent}")

        # Scan only the user messages: the system prompt carries few-shot
        # examples whose sample facts must not shadow the real ones.
        text = "\n".join(content for role, content in conversation if role == "user")
        retrying = any(
            role == "user" and "could not be parsed" in content for role, content in conversation
        )
        if agent in self.malformed_agents:
            return "I would rather describe the music in prose."
        if agent in self.malformed_once_agents and not retrying:
            return "I would rather describe the music in prose."

        handler = {
            "Analyze": self._analyze,
            "Arrange": self._arrange,
            "Instrument": self._instrument,
            "Volume": self._volume,
            "Mixing": self._mixing,
            "Reviewer": self._reviewer,
        }.get(agent)
        if handler is not None:
            return handler(text)
        return self._assess(text)

    # -- assessment ------------------------------------------------------

    def _assess(self, text: str) -> str:
        match = _CRITERIA_LINE.search(text)
        if not match:
            return "No criteria were requested."
        ids = [int(part) for part in match.group(1).split(",") if part.strip()]
        verdicts = [
            {
                "id": cid,
                "verdict": cid not in self.fail_criteria,
                "rationale": (
                    f"criterion {cid} holds" if cid not in self.fail_criteria
                    else f"criterion {cid} is not satisfied"
                ),
            }
            for cid in ids
        ]
        return _fence({"verdicts": verdicts})

    # -- arrangement group chat -------------------------------------------

    @staticmethod
    def _plans(facts: _Facts, blocks: dict[str, dict]) -> list[int]:
        duplicates = blocks.get("Arrange", {}).get("duplicates", [])
        return list(range(facts.tracks)) + [int(d) for d in duplicates]

    def _analyze(self, text: str) -> str:
        facts = _parse_facts(text)
        measures = range(facts.measures)
        return _fence({
            "harmony_counts": {str(m): 1 + (m % 3) for m in measures},
            "measure_dynamics": {str(m): "forte" if m % 2 == 0 else "piano" for m in measures},
            "development": "activity builds toward the closing measures",
        })

    def _arrange(self, text: str) -> str:
        facts = _parse_facts(text)
        soften = {"0": [facts.measures - 1]} if facts.measures > 0 else {}
        duplicates = [0] if facts.tracks < 3 else []
        return _fence({"soften": soften, "duplicates": duplicates})

    @staticmethod
    def _pick_instrument(span: tuple[int, int] | None, duplicate: bool) -> str:
        if duplicate:
            return "string ensemble"
        if span is None:
            return "piano"
        lo, hi = span
        for name, rlo, rhi in _MOCK_CANDIDATES:
            if rlo <= lo and hi <= rhi:
                return name
        return "piano"

    def _instrument(self, text: str) -> str:
        facts = _parse_facts(text)
        blocks = _conversation_blocks(text)
        plans = self._plans(facts, blocks)
        selection = {
            str(i): self._pick_instrument(facts.pitch_spans.get(source), i >= facts.tracks)
            for i, source in enumerate(plans)
        }
        return _fence({
            "summary": f"{facts.tracks} original tracks spanning "
                       + ", ".join(
                           f"{lo}..{hi}" if span else "silence"
                           for span in facts.pitch_spans.values()
                           for lo, hi in [span or (0, 0)]
                       ),
            "selection": selection,
        })

    def _volume(self, text: str) -> str:
        facts = _parse_facts(text)
        blocks = _conversation_blocks(text)
        plans = self._plans(facts, blocks)
        point = [[0.0, 0.0]]
        if facts.duration > 0:
            point.append([round(facts.duration, 3), -6.0])
        return _fence({"volume_envelope": {str(i): point for i in range(len(plans))}})

    def _mixing(self, text: str) -> str:
        facts = _parse_facts(text)
        blocks = _conversation_blocks(text)
        plans = self._plans(facts, blocks)
        return _fence({
            "pan": {str(i): 0.3 if i % 2 == 0 else -0.3 for i in range(len(plans))},
            "reverb_send": {str(i): 0.2 for i in range(len(plans))},
            "reverb_level": 0.3,
            "master_gain": 0.0,
        })

    def _reviewer(self, text: str) -> str:
        blocks = _conversation_blocks(text)
        revised = " (revised)" in text or "Produce the final scheme now" in text
        if self.request_revision and not revised:
            return _fence({
                "revise": {
                    "agents": sorted(self.request_revision),
                    "notes": "rebalance the requested sections",
                }
            })
        facts = _parse_facts(text)
        plans = self._plans(facts, blocks)
        dynamics = blocks.get("Analyze", {}).get("measure_dynamics", {})
        soften = blocks.get("Arrange", {}).get("soften", {})
        selection = blocks.get("Instrument", {}).get("selection", {})
        envelopes = blocks.get("Volume", {}).get("volume_envelope", {})
        mixing = blocks.get("Mixing", {})
        tracks = []
        for i, source in enumerate(plans):
            tracks.append({
                "source_track": source,
                "duplicate": i >= facts.tracks,
                "instrument": selection.get(str(i), "piano"),
                "measure_dynamics": dynamics,
                "soften": soften.get(str(i), []) if i < facts.tracks else [],
                "volume_envelope": envelopes.get(str(i), []),
                "pan": mixing.get("pan", {}).get(str(i), 0.0),
                "reverb_send": mixing.get("reverb_send", {}).get(str(i), 0.0),
            })
        return _fence({
            "version": 1,
            "global": {
                "reverb_level": mixing.get("reverb_level", 0.2),
                "master_gain": mixing.get("master_gain", 0.0),
            },
            "tracks": tracks,
        })


@dataclass(frozen=True)
class ProcessLlmBackend:
    """Backend speaking the external-process JSON contract.

    The child receives ``{"system": ..., "conversation": [[role, content],
    ...]}`` on stdin and must print ``{"response": ...}`` on stdout.
    A non-zero exit, a timeout, or malformed output raises AgentError.
    """

    command: tuple[str, ...]
    timeout: float = 600.0
    deterministic: bool = field(default=False)
    concurrent_safe: bool = field(default=False)

    def complete(self, system_prompt: str, conversation: Conversation) -> str:
        payload = json.dumps({
            "system": system_prompt,
            "conversation": [[role, content] for role, content in conversation],
        }).encode("utf-8")
        try:
            proc = subprocess.run(
                list(self.command), input=payload, capture_output=True, timeout=self.timeout,
            )
        except OSError as exc:
            raise AgentError(f"could not start backend process: {exc}") from exc
        except subprocess.TimeoutExpired as exc:
            raise AgentError(f"backend process timed out after {self.timeout}s") from exc
        if proc.returncode != 0:
            stderr = proc.stderr.decode("utf-8", "replace").strip()
            raise AgentError(f"backend process failed with code {proc.returncode}: {stderr}")
        try:
            reply = json.loads(proc.stdout.decode("utf-8"))
            response = reply["response"]
        except (ValueError, KeyError, TypeError) as exc:
            raise AgentError(f"backend process printed malformed output: {exc}") from exc
        if not isinstance(response, str):
            raise AgentError("backend process response must be a string")
        return response


@dataclass(frozen=True)
class HttpLlmBackend:
    """Chat-completion endpoint backend (OpenAI-style request/response)."""

    url: str
    api_key: str | None = None
    model: str = "default"
    timeout: float = 120.0
    deterministic: bool = field(default=False)
    concurrent_safe: bool = field(default=True)

    ENV_URL = "CINESCORE_LLM_URL"
    ENV_KEY = "CINESCORE_LLM_KEY"
    ENV_MODEL = "CINESCORE_LLM_MODEL"

    @classmethod
    def from_env(cls, env: Mapping[str, str] | None = None) -> "HttpLlmBackend":
        import os

        env = os.environ if env is None else env
        url = env.get(cls.ENV_URL)
        if not url:
            raise AgentError(f"{cls.ENV_URL} is not set; cannot configure the HTTP backend")
        return cls(url=url, api_key=env.get(cls.ENV_KEY), model=env.get(cls.ENV_MODEL, "default"))

    def complete(self, system_prompt: str, conversation: Conversation) -> str:
        messages = [{"role": "system", "content": system_prompt}]
        messages += [{"role": role, "content": content} for role, content in conversation]
        body = json.dumps({"model": self.model, "messages": messages}).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        request = urllib.request.Request(self.url, data=body, headers=headers, method="POST")
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            raise AgentError(f"chat endpoint returned HTTP {exc.code}") from exc
        except (urllib.error.URLError, TimeoutError, ValueError) as exc:
            raise AgentError(f"chat endpoint request failed: {exc}") from exc
        try:
            content = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise AgentError("chat endpoint response missing choices[0].message.content") from exc
        if not isinstance(content, str):
            raise AgentError("chat endpoint returned non-text content")
        return content
