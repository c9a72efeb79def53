"""Transcript persistence: JSON Lines, one turn per line, for replay testing."""

from __future__ import annotations

import json
from pathlib import Path

from .types import AgentError, ChatTranscript, ChatTurn


def write_transcript(transcript: ChatTranscript, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for turn in transcript.turns:
            handle.write(json.dumps({
                "agent": turn.agent,
                "prompt": turn.prompt,
                "response": turn.response,
                "timestamp": turn.timestamp,
            }, sort_keys=True) + "\n")
    return path


def read_transcript(path: str | Path) -> ChatTranscript:
    turns = []
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            turns.append(ChatTurn(
                agent=record["agent"],
                prompt=record["prompt"],
                response=record["response"],
                timestamp=int(record["timestamp"]),
            ))
        except (ValueError, KeyError, TypeError) as exc:
            raise AgentError(f"bad transcript line {lineno}: {exc}") from exc
    return ChatTranscript(tuple(turns))
