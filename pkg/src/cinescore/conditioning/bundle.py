"""The conditioning bundle: rhythm chroma then description text.

The prefix order is part of the contract — serialization emits the
rhythm block strictly before the description block, and identical
inputs serialize to identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .chroma import ChromaError, Chromagram

PREFIX_ORDER = ("rhythm", "description")


@dataclass(frozen=True)
class ConditioningBundle:
    rhythm: Chromagram
    description: str
    prefix_order: tuple[str, str] = PREFIX_ORDER

    def __post_init__(self):
        if self.prefix_order != PREFIX_ORDER:
            raise ChromaError(f"prefix order must be {PREFIX_ORDER}")
        if not self.description:
            raise ChromaError("description must be non-empty")

    def serialize(self) -> bytes:
        # key order is semantic here (rhythm before description); do not sort
        payload = {
            "prefix_order": list(self.prefix_order),
            "rhythm": json.loads(self.rhythm.to_json()),
            "description": self.description,
        }
        return json.dumps(payload, separators=(",", ":")).encode()

    @classmethod
    def deserialize(cls, data: bytes) -> "ConditioningBundle":
        payload = json.loads(data.decode())
        return cls(
            rhythm=Chromagram.from_json(json.dumps(payload["rhythm"])),
            description=payload["description"],
            prefix_order=tuple(payload["prefix_order"]),
        )


def assemble_condition(chroma: Chromagram, description: str) -> ConditioningBundle:
    return ConditioningBundle(rhythm=chroma, description=description)
