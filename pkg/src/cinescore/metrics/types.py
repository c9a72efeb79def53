"""Value types for the evaluation metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

DEFAULT_GRID_RATE = 100
DEFAULT_FRAME_SECONDS = 0.1
DB_FLOOR = -90.0


class MetricError(ValueError):
    """Raised when a metric's domain preconditions are violated."""


@dataclass(frozen=True)
class ImpulseTrain:
    """Binary onset marks on a fixed time grid (default 100 Hz)."""

    values: np.ndarray
    grid_rate: int = DEFAULT_GRID_RATE

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int64)
        if values.ndim != 1:
            raise MetricError(f"impulse values must be one-dimensional, got shape {values.shape}")
        if values.size and not np.all((values == 0) | (values == 1)):
            raise MetricError("impulse values must be 0 or 1")
        if self.grid_rate <= 0:
            raise MetricError(f"grid rate must be positive, got {self.grid_rate}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_times(cls, times, duration: float, grid_rate: int = DEFAULT_GRID_RATE) -> "ImpulseTrain":
        """Quantize onset times (seconds) onto the grid."""
        if duration < 0:
            raise MetricError(f"duration must be non-negative, got {duration}")
        bins = math.ceil(duration * grid_rate)
        values = np.zeros(bins, dtype=np.int64)
        for t in times:
            k = int(round(t * grid_rate))
            if 0 <= k < bins:
                values[k] = 1
        return cls(values=values, grid_rate=grid_rate)

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def duration(self) -> float:
        return len(self) / self.grid_rate

    @property
    def count(self) -> int:
        return int(self.values.sum())

    def times(self) -> tuple[float, ...]:
        return tuple(float(k / self.grid_rate) for k in np.flatnonzero(self.values))


@dataclass(frozen=True)
class DbEnvelope:
    """Per-frame loudness in dBFS, floored at -90 for silence."""

    values: tuple[float, ...]
    frame: float = DEFAULT_FRAME_SECONDS

    def __post_init__(self):
        if self.frame <= 0:
            raise MetricError(f"frame length must be positive, got {self.frame}")
        coerced = tuple(float(v) for v in self.values)
        for v in coerced:
            if not math.isfinite(v):
                raise MetricError("envelope values must be finite; floor silence at -90 dB")
            if v < DB_FLOOR - 1e-9:
                raise MetricError(f"envelope value {v} below the {DB_FLOOR} dB floor")
        object.__setattr__(self, "values", coerced)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class InstrumentDistribution:
    """Fractions of total playing time per instrument family."""

    weights: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        weights = {str(k): float(v) for k, v in dict(self.weights).items()}
        if not weights:
            raise MetricError("an instrument distribution needs at least one family")
        for family, share in weights.items():
            if share < 0:
                raise MetricError(f"family {family!r} has negative share {share}")
        total = sum(weights.values())
        if abs(total - 1.0) > 1e-9:
            raise MetricError(f"family shares must sum to 1, got {total}")
        object.__setattr__(self, "weights", weights)

    def share(self, family: str) -> float:
        return self.weights.get(family, 0.0)

    def families(self) -> tuple[str, ...]:
        return tuple(sorted(self.weights))
