"""Shot-cut detection from grayscale histogram discontinuities.

Each frame transition scores the chi-square distance between 64-bin
histograms; a cut fires where the distance exceeds an adaptive
threshold (mean + 3 sigma over the surrounding window of transitions),
at least min_scene_len frames after the previous cut (or the start).
Adaptivity, not an absolute level, separates hard cuts from gradual
fades: a fade raises every distance in the window equally.
"""

from __future__ import annotations

import numpy as np

from .frames import FrameSequence

HISTOGRAM_BINS = 64
WINDOW_FRAMES = 25
SIGMA_FACTOR = 3.0
MIN_SCENE_LEN = 10


def _histograms(frames: np.ndarray) -> np.ndarray:
    """Normalized 64-bin histogram per frame, shape (count, bins)."""
    count = frames.shape[0]
    bins = frames.reshape(count, -1) >> 2  # 256 levels / 64 bins
    hists = np.zeros((count, HISTOGRAM_BINS))
    for k in range(count):
        hists[k] = np.bincount(bins[k].ravel(), minlength=HISTOGRAM_BINS)
    return hists / frames[0].size


def _chi_square(p: np.ndarray, q: np.ndarray) -> float:
    s = p + q
    mask = s > 0
    d = p[mask] - q[mask]
    return float(np.sum(d * d / s[mask]))


def detect_shot_cuts(
    frames: FrameSequence,
    window: int = WINDOW_FRAMES,
    sigma_factor: float = SIGMA_FACTOR,
    min_scene_len: int = MIN_SCENE_LEN,
) -> list[float]:
    """Cut timestamps in seconds (first frame of each new shot / fps)."""
    hists = _histograms(frames.frames)
    n = len(frames) - 1
    distances = np.array(
        [_chi_square(hists[i], hists[i + 1]) for i in range(n)]
    )
    half = window // 2
    cuts: list[float] = []
    last_cut_frame = 0  # sequence start counts as a scene boundary
    for i in range(n):
        lo, hi = max(0, i - half), min(n, i + half + 1)
        neighborhood = distances[lo:hi]
        threshold = neighborhood.mean() + sigma_factor * neighborhood.std()
        if distances[i] <= threshold:
            continue
        cut_frame = i + 1
        if cut_frame - last_cut_frame < min_scene_len:
            continue
        cuts.append(cut_frame / frames.frame_rate)
        last_cut_frame = cut_frame
    return cuts
