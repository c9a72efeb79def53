"""Dense optical flow (Horn-Schunck) and the motion statistics.

Motion speed over a range of frame transitions is the mean flow
magnitude; motion saliency is the mean of the strictly positive
first differences of the magnitude series (0 when none are positive),
so it reacts to acceleration rather than steady movement.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import convolve

from .frames import FrameSequence, VisionError

HS_ITERATIONS = 50
HS_SMOOTHNESS = 15.0

# weighted neighbour average from the Horn-Schunck relaxation scheme
_AVG_KERNEL = np.array(
    [
        [1 / 12, 1 / 6, 1 / 12],
        [1 / 6, 0.0, 1 / 6],
        [1 / 12, 1 / 6, 1 / 12],
    ]
)


@dataclass(frozen=True)
class FlowSeries:
    magnitudes: tuple[float, ...]

    def __post_init__(self):
        for m in self.magnitudes:
            if not (m >= 0):  # also catches NaN
                raise VisionError(f"flow magnitude {m} is negative or undefined")

    def __len__(self) -> int:
        return len(self.magnitudes)


def _hs_derivatives(a: np.ndarray, b: np.ndarray):
    """Forward-difference estimates averaged over the 2x2x2 cube."""

    def cube(first, second, axis):
        d = np.diff(first, axis=axis) + np.diff(second, axis=axis)
        if axis == 1:
            d = d[:-1, :] + d[1:, :]
            return np.pad(d, ((0, 1), (0, 1))) * 0.25
        d = d[:, :-1] + d[:, 1:]
        return np.pad(d, ((0, 1), (0, 1))) * 0.25

    ix = cube(a, b, axis=1)
    iy = cube(a, b, axis=0)
    dt = b - a
    it = dt[:-1, :-1] + dt[1:, :-1] + dt[:-1, 1:] + dt[1:, 1:]
    it = np.pad(it, ((0, 1), (0, 1))) * 0.25
    return ix, iy, it


def _horn_schunck_pair(a, b, iterations: int, alpha2: float):
    ix, iy, it = _hs_derivatives(a, b)
    u = np.zeros_like(a)
    v = np.zeros_like(a)
    denom = alpha2 + ix * ix + iy * iy
    for _ in range(iterations):
        u_avg = convolve(u, _AVG_KERNEL, mode="nearest")
        v_avg = convolve(v, _AVG_KERNEL, mode="nearest")
        common = (ix * u_avg + iy * v_avg + it) / denom
        u = u_avg - ix * common
        v = v_avg - iy * common
    return u, v


def optical_flow_magnitudes(
    frames: FrameSequence,
    iterations: int = HS_ITERATIONS,
    smoothness: float = HS_SMOOTHNESS,
) -> FlowSeries:
    """Mean dense-flow magnitude for every consecutive frame pair."""
    if len(frames) < 2:
        raise VisionError("need at least 2 frames for optical flow")
    stack = frames.frames.astype(np.float64)
    mags = []
    for k in range(len(frames) - 1):
        u, v = _horn_schunck_pair(stack[k], stack[k + 1], iterations, smoothness)
        mags.append(float(np.mean(np.hypot(u, v))))
    return FlowSeries(magnitudes=tuple(mags))


def read_flow_file(path) -> FlowSeries:
    """Precomputed magnitudes, one decimal per line."""
    values = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError as exc:
            raise VisionError(f"line {lineno}: not a number: {line!r}") from exc
    return FlowSeries(magnitudes=tuple(values))


def _resolve_range(series: FlowSeries, span) -> tuple[int, int]:
    if span is None:
        return 0, len(series)
    start, end = span
    if not (0 <= start < end <= len(series)):
        raise VisionError(f"range [{start}, {end}) out of bounds for {len(series)}")
    return start, end


def motion_speed(flow: FlowSeries, span: tuple[int, int] | None = None) -> float:
    """Mean flow magnitude over the (end-exclusive) transition range."""
    start, end = _resolve_range(flow, span)
    if end == start:
        raise VisionError("empty range")
    return float(np.mean(flow.magnitudes[start:end]))


def motion_saliency(flow: FlowSeries, span: tuple[int, int] | None = None) -> float:
    """Mean strictly-positive first difference of the magnitudes."""
    start, end = _resolve_range(flow, span)
    if end - start < 2:
        raise VisionError("saliency needs a range of at least 2 transitions")
    window = np.asarray(flow.magnitudes[start:end])
    diffs = np.diff(window)
    positive = diffs[diffs > 0]
    if positive.size == 0:
        return 0.0
    return float(np.mean(positive))
