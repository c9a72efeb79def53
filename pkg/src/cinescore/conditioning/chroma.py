"""Chromagram extraction, downsampling, and precomputed ingestion.

Frames are magnitude-squared STFT energies folded onto the 12
equal-tempered pitch classes (A440 reference, class 0 = C).  A frame's
mask bit is true only when the analysis window lies fully inside the
signal and the frame carries energy, so downstream consumers never see
an argmax over silence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..audio import Waveform

DEFAULT_WINDOW = 4096
DEFAULT_HOP = 2048
MIN_FREQUENCY = 27.5  # below the lowest A, bins are discarded
_ENERGY_EPS = 1e-12


class ChromaError(ValueError):
    pass


@dataclass(frozen=True)
class Chromagram:
    frames: np.ndarray  # (count, 12) float64
    hop: int
    window: int
    one_hot: bool
    mask: np.ndarray  # (count,) bool
    sample_rate: int

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if frames.ndim != 2 or frames.shape[1] != 12:
            raise ChromaError(f"frames must be (count, 12), got {frames.shape}")
        if mask.shape != (frames.shape[0],):
            raise ChromaError("mask length must equal frame count")
        # a downsampled chromagram's effective hop may exceed its window
        if self.hop <= 0 or self.window <= 0:
            raise ChromaError("hop and window must be positive")
        if self.one_hot:
            sums = frames.sum(axis=1)
            good = np.isclose(sums, 1.0) | np.isclose(sums, 0.0)
            if not good.all():
                raise ChromaError("one-hot frames must sum to 0 or 1")
        frames.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "mask", mask)

    def __len__(self) -> int:
        return self.frames.shape[0]

    def frame_time(self, index: int) -> float:
        """Center time of a frame in seconds."""
        return (index * self.hop + self.window / 2) / self.sample_rate

    def to_json(self) -> str:
        return json.dumps(
            {
                "frames": [[round(v, 12) for v in row] for row in self.frames.tolist()],
                "hop": self.hop,
                "window": self.window,
                "one_hot": self.one_hot,
                "mask": [bool(b) for b in self.mask.tolist()],
                "sample_rate": self.sample_rate,
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Chromagram":
        data = json.loads(text)
        return cls(
            frames=np.array(data["frames"], dtype=np.float64).reshape(-1, 12),
            hop=int(data["hop"]),
            window=int(data["window"]),
            one_hot=bool(data["one_hot"]),
            mask=np.array(data["mask"], dtype=bool),
            sample_rate=int(data["sample_rate"]),
        )


def load_chromagram_json(path) -> Chromagram:
    return Chromagram.from_json(Path(path).read_text())


def _pitch_class_map(window: int, sample_rate: int) -> tuple[np.ndarray, np.ndarray]:
    """For each rFFT bin: (keep?, pitch class)."""
    freqs = np.fft.rfftfreq(window, d=1.0 / sample_rate)
    keep = freqs >= MIN_FREQUENCY
    classes = np.zeros(len(freqs), dtype=int)
    nz = freqs > 0
    midi = np.zeros(len(freqs))
    midi[nz] = 69.0 + 12.0 * np.log2(freqs[nz] / 440.0)
    classes[nz] = np.mod(np.rint(midi[nz]).astype(int), 12)
    return keep, classes


def chromagram(
    audio: Waveform,
    window: int = DEFAULT_WINDOW,
    hop: int = DEFAULT_HOP,
    one_hot: bool = True,
) -> Chromagram:
    if window < 256 or window & (window - 1):
        raise ChromaError(f"window must be a power of two >= 256, got {window}")
    if not 0 < hop <= window:
        raise ChromaError(f"hop must be in (0, window], got {hop}")
    samples = audio.to_mono().samples
    n = len(samples)
    sr = audio.sample_rate

    if n < window:
        starts = [0]
        fully_inside = [True]  # single zero-padded frame by definition
    else:
        count = int(np.ceil(n / hop))
        starts = [k * hop for k in range(count)]
        fully_inside = [s + window <= n for s in starts]

    hann = np.hanning(window)
    keep, classes = _pitch_class_map(window, sr)
    frames = np.zeros((len(starts), 12))
    mask = np.zeros(len(starts), dtype=bool)
    for k, (start, inside) in enumerate(zip(starts, fully_inside)):
        chunk = samples[start : start + window]
        if len(chunk) < window:
            chunk = np.pad(chunk, (0, window - len(chunk)))
        spectrum = np.abs(np.fft.rfft(chunk * hann)) ** 2
        energies = np.bincount(
            classes[keep], weights=spectrum[keep], minlength=12
        )[:12]
        total = energies.sum()
        if total > _ENERGY_EPS:
            if one_hot:
                hot = np.zeros(12)
                hot[int(np.argmax(energies))] = 1.0
                frames[k] = hot
            else:
                frames[k] = energies / np.linalg.norm(energies)
            mask[k] = inside
    return Chromagram(
        frames=frames, hop=hop, window=window, one_hot=one_hot, mask=mask, sample_rate=sr
    )


def downsample_chroma(chroma: Chromagram, factor: int) -> Chromagram:
    """Block-mean over groups of `factor` frames (ceil(n/factor) blocks);
    one-hot input is re-argmaxed per block; a block is valid only when
    every member frame is."""
    if factor < 1:
        raise ChromaError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return chroma
    n = len(chroma)
    blocks = int(np.ceil(n / factor))
    frames = np.zeros((blocks, 12))
    mask = np.zeros(blocks, dtype=bool)
    for b in range(blocks):
        chunk = chroma.frames[b * factor : (b + 1) * factor]
        mean = chunk.mean(axis=0)
        if chroma.one_hot:
            if mean.sum() > _ENERGY_EPS:
                hot = np.zeros(12)
                hot[int(np.argmax(mean))] = 1.0
                frames[b] = hot
        else:
            frames[b] = mean
        mask[b] = bool(chroma.mask[b * factor : (b + 1) * factor].all())
    return Chromagram(
        frames=frames,
        hop=chroma.hop * factor,
        window=chroma.window,
        one_hot=chroma.one_hot,
        mask=mask,
        sample_rate=chroma.sample_rate,
    )
