"""Instrument registry: the palette the arranger may draw from.

The registry ships as a versioned JSON asset mapping instrument names to
a General-MIDI program (for notation interchange), a synthesis recipe id
(for the renderer), a family tag (for evaluation), and a playable pitch
range.  An alternative registry file can be supplied to the loader.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .model import SchemeError

MIN_INSTRUMENTS = 39


@dataclass(frozen=True)
class Instrument:
    name: str
    program: int
    recipe: str
    family: str
    low: int
    high: int

    def __post_init__(self):
        if not 0 <= self.program <= 127:
            raise SchemeError(f"GM program must lie in [0, 127], got {self.program}")
        if not 0 <= self.low <= self.high <= 127:
            raise SchemeError(f"pitch range must satisfy 0 <= low <= high <= 127, got [{self.low}, {self.high}]")
        if not self.recipe or not self.family:
            raise SchemeError(f"instrument {self.name!r} needs a recipe and a family tag")

    def in_range(self, pitch: int) -> bool:
        return self.low <= pitch <= self.high


def _parse_registry(payload: dict) -> dict[str, Instrument]:
    if not isinstance(payload, dict) or not isinstance(payload.get("instruments"), dict):
        raise SchemeError("instrument registry must be an object with an 'instruments' map")
    entries: dict[str, Instrument] = {}
    for name, spec in payload["instruments"].items():
        try:
            lo, hi = spec["range"]
            entries[name] = Instrument(
                name=name,
                program=int(spec["program"]),
                recipe=str(spec["recipe"]),
                family=str(spec["family"]),
                low=int(lo),
                high=int(hi),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemeError(f"malformed registry entry {name!r}: {exc}") from exc
    if len(entries) < MIN_INSTRUMENTS:
        raise SchemeError(f"instrument registry must define at least {MIN_INSTRUMENTS} instruments, got {len(entries)}")
    return entries


@lru_cache(maxsize=1)
def _bundled_registry() -> dict[str, Instrument]:
    data = resources.files("cinescore.assets").joinpath("instruments.json").read_text("utf-8")
    return _parse_registry(json.loads(data))


def load_instruments(path: str | Path | None = None) -> dict[str, Instrument]:
    """Load the instrument registry, bundled by default or from ``path``."""
    if path is None:
        return _bundled_registry()
    return _parse_registry(json.loads(Path(path).read_text("utf-8")))
