"""Value types for arrangement-and-mix schemes.

A scheme tells the renderer what to do with each track of a song:
which instrument plays it, how loud each measure is, where it sits in
the stereo field, and how much reverb it receives.  All types are
frozen; construction validates every invariant so downstream code can
trust any instance it is handed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

SCHEME_VERSION = 1

#: Gain offsets applied per measure for each named dynamic level.
DYNAMIC_GAIN_DB = {"forte": 4.0, "mezzo": 0.0, "piano": -6.0}

#: Extra offset applied to measures listed in a plan's ``soften`` set.
SOFTEN_GAIN_DB = -4.0


class SchemeError(ValueError):
    """Raised when a scheme value violates its invariants."""


def _check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise SchemeError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class TrackPlan:
    """Per-track arrangement and mix instructions.

    ``source_track`` indexes a track of the target song.  When
    ``duplicate`` is true the plan plays a copy of that track (several
    plans may share a source to thicken the harmony); otherwise it is
    the primary rendering of the track.
    """

    source_track: int
    instrument: str
    duplicate: bool = False
    measure_dynamics: tuple[tuple[int, str], ...] = ()
    soften: tuple[int, ...] = ()
    volume_envelope: tuple[tuple[float, float], ...] = ()
    pan: float = 0.0
    reverb_send: float = 0.0

    def __post_init__(self):
        if not isinstance(self.source_track, int) or self.source_track < 0:
            raise SchemeError(f"source_track must be a non-negative integer, got {self.source_track!r}")
        if not self.instrument or not isinstance(self.instrument, str):
            raise SchemeError("instrument name must be a non-empty string")

        dynamics = []
        seen: set[int] = set()
        for measure, level in self.measure_dynamics:
            if not isinstance(measure, int) or measure < 0:
                raise SchemeError(f"dynamics measure index must be a non-negative integer, got {measure!r}")
            if level not in DYNAMIC_GAIN_DB:
                allowed = ", ".join(sorted(DYNAMIC_GAIN_DB))
                raise SchemeError(f"unknown dynamic level {level!r} (allowed: {allowed})")
            if measure in seen:
                raise SchemeError(f"measure {measure} has conflicting dynamic levels")
            seen.add(measure)
            dynamics.append((measure, level))
        dynamics.sort()
        object.__setattr__(self, "measure_dynamics", tuple(dynamics))

        for measure in self.soften:
            if not isinstance(measure, int) or measure < 0:
                raise SchemeError(f"soften measure index must be a non-negative integer, got {measure!r}")
        object.__setattr__(self, "soften", tuple(sorted(set(self.soften))))

        envelope = tuple(
            (_check_finite("envelope time", t), _check_finite("envelope gain", g))
            for t, g in self.volume_envelope
        )
        for (t0, _), (t1, _) in zip(envelope, envelope[1:]):
            if t1 <= t0:
                raise SchemeError(f"volume envelope times must be strictly increasing ({t0} then {t1})")
        if envelope and envelope[0][0] < 0:
            raise SchemeError("volume envelope times must be non-negative")
        object.__setattr__(self, "volume_envelope", envelope)

        pan = _check_finite("pan", self.pan)
        if not -1.0 <= pan <= 1.0:
            raise SchemeError(f"pan must lie in [-1, 1], got {pan}")
        object.__setattr__(self, "pan", pan)

        send = _check_finite("reverb_send", self.reverb_send)
        if not 0.0 <= send <= 1.0:
            raise SchemeError(f"reverb_send must lie in [0, 1], got {send}")
        object.__setattr__(self, "reverb_send", send)

    def dynamic_at(self, measure: int) -> str | None:
        """Named dynamic level for ``measure``, or None if unset."""
        for m, level in self.measure_dynamics:
            if m == measure:
                return level
        return None

    def gain_offset_db(self, measure: int) -> float:
        """Total per-measure gain offset: dynamic level plus soften."""
        level = self.dynamic_at(measure)
        gain = DYNAMIC_GAIN_DB[level] if level is not None else 0.0
        if measure in self.soften:
            gain += SOFTEN_GAIN_DB
        return gain

    def referenced_measures(self) -> tuple[int, ...]:
        """All measure indices this plan mentions, sorted and unique."""
        measures = {m for m, _ in self.measure_dynamics} | set(self.soften)
        return tuple(sorted(measures))


@dataclass(frozen=True)
class GlobalMix:
    """Scheme-wide mix settings applied after the per-track chain."""

    reverb_level: float = 0.2
    master_gain: float = 0.0

    def __post_init__(self):
        level = _check_finite("reverb_level", self.reverb_level)
        if not 0.0 <= level <= 1.0:
            raise SchemeError(f"reverb_level must lie in [0, 1], got {level}")
        object.__setattr__(self, "reverb_level", level)
        object.__setattr__(self, "master_gain", _check_finite("master_gain", self.master_gain))


@dataclass(frozen=True)
class ArrangementScheme:
    """A complete arrangement: one plan per rendered track plus the global mix."""

    tracks: tuple[TrackPlan, ...]
    global_mix: GlobalMix = field(default_factory=GlobalMix)

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))
        if not self.tracks:
            raise SchemeError("a scheme must contain at least one track plan")
        for plan in self.tracks:
            if not isinstance(plan, TrackPlan):
                raise SchemeError(f"tracks must be TrackPlan instances, got {type(plan).__name__}")
        if not isinstance(self.global_mix, GlobalMix):
            raise SchemeError("global_mix must be a GlobalMix instance")
