"""Click-track synthesis from rhythm spots."""

from __future__ import annotations

import numpy as np

from ..audio import Waveform
from ..melody import RhythmSpots

CLICK_FREQUENCY = 1000.0
CLICK_DURATION = 0.030
CLICK_AMPLITUDE = 0.8
_DECAY_RATE = 200.0  # 1/s; ~6 time constants over the 30 ms burst


def synthesize_click_track(
    spots: RhythmSpots,
    sample_rate: int,
    frequency: float = CLICK_FREQUENCY,
    burst: float = CLICK_DURATION,
    amplitude: float = CLICK_AMPLITUDE,
) -> Waveform:
    """An exponentially decaying sine burst at every spot, summed and
    clamped to [-1, 1]."""
    total = int(round(spots.clip_duration * sample_rate))
    out = np.zeros(max(total, 1))
    n_burst = int(round(burst * sample_rate))
    t = np.arange(n_burst) / sample_rate
    shape = amplitude * np.exp(-_DECAY_RATE * t) * np.sin(2 * np.pi * frequency * t)
    for onset in spots.onsets:
        start = int(round(onset * sample_rate))
        stop = min(start + n_burst, total)
        if stop > start:
            out[start:stop] += shape[: stop - start]
    np.clip(out, -1.0, 1.0, out=out)
    return Waveform(samples=out, sample_rate=sample_rate)
