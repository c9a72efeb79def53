"""Evaluation metrics: onsets, rhythm correlation, dynamics, timbre mix.

Everything here is pure and deterministic; no model weights, no
randomness.  Onset detection is a classical spectral-flux detector; the
diversity metric averages pairwise chroma similarity over one-second
segments; dynamics and instrumentation both use cosine distance, where
lower values mean more similar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
from scipy.signal import resample_poly

from ..audio import Waveform
from ..conditioning import Chromagram
from ..notation import MidiSong
from ..scheme import ArrangementScheme
from ..scheme.registry import Instrument, load_instruments
from .types import DB_FLOOR, DEFAULT_FRAME_SECONDS, DbEnvelope, ImpulseTrain, InstrumentDistribution, MetricError

ONSET_SAMPLE_RATE = 44100
ONSET_WINDOW = 1024
ONSET_HOP = 441  # 100 frames per second at 44.1 kHz
ONSET_CONTEXT_SECONDS = 0.15
ONSET_THRESHOLD_SIGMA = 1.5
ONSET_MIN_GAP_SECONDS = 0.05
SEGMENT_SECONDS = 1.0


def _spectral_flux(signal: np.ndarray) -> np.ndarray:
    """Half-wave-rectified frame-to-frame magnitude increase."""
    if len(signal) < ONSET_WINDOW:
        padded = np.zeros(ONSET_WINDOW, dtype=np.float64)
        padded[: len(signal)] = signal
        signal = padded
    n_frames = 1 + (len(signal) - ONSET_WINDOW) // ONSET_HOP
    window = np.hanning(ONSET_WINDOW)
    magnitudes = np.empty((n_frames, ONSET_WINDOW // 2 + 1))
    for i in range(n_frames):
        frame = signal[i * ONSET_HOP: i * ONSET_HOP + ONSET_WINDOW]
        magnitudes[i] = np.abs(np.fft.rfft(frame * window))
    flux = np.zeros(n_frames)
    if n_frames:
        flux[0] = magnitudes[0].sum()  # rise out of silence counts
        if n_frames > 1:
            rise = magnitudes[1:] - magnitudes[:-1]
            flux[1:] = np.where(rise > 0, rise, 0.0).sum(axis=1)
    return flux


def detect_onsets(audio: Waveform) -> ImpulseTrain:
    """Mark acoustic onsets (note attacks, clicks) on a 100 Hz grid.

    Spectral flux over 1024-sample windows hopped every 441 samples at
    44.1 kHz; peaks must clear the local mean (±0.15 s) plus 1.5 local
    standard deviations and keep a 50 ms gap from the previous pick.
    """
    duration = audio.duration
    bins = math.ceil(duration * 100)
    if audio.num_samples == 0:
        return ImpulseTrain(values=np.zeros(0, dtype=np.int64))
    mono = audio.to_mono()
    ratio = Fraction(ONSET_SAMPLE_RATE, mono.sample_rate)
    signal = mono.samples
    if ratio != 1:
        signal = resample_poly(signal, ratio.numerator, ratio.denominator)
    flux = _spectral_flux(np.asarray(signal, dtype=np.float64))
    n = len(flux)
    context = int(round(ONSET_CONTEXT_SECONDS * 100))
    picked: list[int] = []
    min_gap = int(round(ONSET_MIN_GAP_SECONDS * 100))
    for i in range(n):
        left = flux[i - 1] if i > 0 else -math.inf
        right = flux[i + 1] if i + 1 < n else -math.inf
        if not (flux[i] >= left and flux[i] >= right):
            continue
        neighborhood = flux[max(0, i - context): min(n, i + context + 1)]
        threshold = float(neighborhood.mean()) + ONSET_THRESHOLD_SIGMA * float(neighborhood.std())
        if flux[i] <= threshold:
            continue
        if picked and i - picked[-1] < min_gap:
            continue
        picked.append(i)
    values = np.zeros(bins, dtype=np.int64)
    for i in picked:
        # A flux peak marks the analysis window that swallowed the
        # attack; report the window's center, re-quantized to the grid.
        center = (i * ONSET_HOP + ONSET_WINDOW / 2) / ONSET_SAMPLE_RATE
        k = int(round(center * 100))
        if 0 <= k < bins:
            values[k] = 1
    return ImpulseTrain(values=values)


@dataclass(frozen=True)
class RhythmCorrelation:
    """Cross-correlation of two impulse trains over a lag window."""

    raw_peak: int
    lag_seconds: float
    lags: tuple[int, ...]
    sequence: tuple[int, ...]
    normalized: float


def rhythm_xcorr(x: ImpulseTrain, y: ImpulseTrain, max_lag: float) -> RhythmCorrelation:
    """R(k) = sum over t of x(t) * y(t+k), for |k| <= max_lag seconds.

    The peak is the largest raw sum; ties go to the smallest |lag|
    (negative before positive at equal magnitude).  The normalized peak
    divides by sqrt(sum x^2 * sum y^2) and is 1 exactly when one train
    is a pure shift of the other inside the lag window.
    """
    if x.grid_rate != y.grid_rate:
        raise MetricError(f"grid rates differ: {x.grid_rate} vs {y.grid_rate}")
    if max_lag < 0:
        raise MetricError(f"max_lag must be non-negative, got {max_lag}")
    grid = x.grid_rate
    k_max = int(round(max_lag * grid))
    xv, yv = x.values, y.values
    lags = tuple(range(-k_max, k_max + 1))
    sequence = []
    for k in lags:
        t_lo = max(0, -k)
        t_hi = min(len(xv), len(yv) - k)
        if t_hi <= t_lo:
            sequence.append(0)
        else:
            sequence.append(int(np.dot(xv[t_lo:t_hi], yv[t_lo + k: t_hi + k])))
    peak = max(sequence) if sequence else 0
    best_lag = 0
    for k in sorted(lags, key=lambda lag: (abs(lag), lag)):
        if sequence[k + k_max] == peak:
            best_lag = k
            break
    energy = float(xv.sum()) * float(yv.sum())  # binary trains: sum == sum of squares
    normalized = peak / math.sqrt(energy) if energy > 0 else 0.0
    return RhythmCorrelation(
        raw_peak=int(peak),
        lag_seconds=best_lag / grid,
        lags=lags,
        sequence=tuple(sequence),
        normalized=float(normalized),
    )


def db_envelope(audio: Waveform, frame: float = DEFAULT_FRAME_SECONDS) -> DbEnvelope:
    """Per-frame RMS loudness in dB, floored at -90."""
    mono = audio.to_mono()
    frame_samples = max(1, int(round(frame * mono.sample_rate)))
    n_frames = mono.num_samples // frame_samples
    if n_frames == 0 and mono.num_samples:
        n_frames = 1
        frame_samples = mono.num_samples
    values = []
    for i in range(n_frames):
        chunk = mono.samples[i * frame_samples: (i + 1) * frame_samples]
        rms = float(np.sqrt(np.mean(chunk ** 2)))
        values.append(max(DB_FLOOR, 20.0 * math.log10(rms)) if rms > 0 else DB_FLOOR)
    return DbEnvelope(values=tuple(values), frame=frame)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 and nb == 0.0:
        return 1.0
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def dynamic_variation_distance(a: DbEnvelope, b: DbEnvelope) -> float:
    """Cosine distance between the frame-to-frame loudness changes.

    0 means the dynamics move together, 2 means mirror-image dynamics.
    Two flat envelopes (no variation at all) count as identical.
    """
    if not a.values or not b.values:
        raise MetricError("dynamic variation needs non-empty envelopes")
    da = np.diff(np.asarray(a.values))
    db_ = np.diff(np.asarray(b.values))
    n = min(len(da), len(db_))
    da, db_ = da[:n], db_[:n]
    na = float(np.linalg.norm(da))
    nb = float(np.linalg.norm(db_))
    if na == 0.0 and nb == 0.0:
        return 0.0
    if na == 0.0 or nb == 0.0:
        return 1.0
    return 1.0 - float(np.dot(da, db_) / (na * nb))


def _segment_vectors(chroma: Chromagram, segment_seconds: float) -> np.ndarray:
    frames_per_segment = max(1, int(round(segment_seconds * chroma.sample_rate / chroma.hop)))
    count = len(chroma) // frames_per_segment
    if count == 0 and len(chroma):
        count = 1
        frames_per_segment = len(chroma)
    vectors = np.empty((count, 12))
    for s in range(count):
        vectors[s] = chroma.frames[s * frames_per_segment: (s + 1) * frames_per_segment].mean(axis=0)
    return vectors


def chroma_similarity(a: Chromagram, b: Chromagram, segment_seconds: float = SEGMENT_SECONDS) -> float:
    """Mean cosine similarity of segment-averaged chroma, aligned in time."""
    va = _segment_vectors(a, segment_seconds)
    vb = _segment_vectors(b, segment_seconds)
    n = min(len(va), len(vb))
    if n == 0:
        raise MetricError("chroma similarity needs at least one segment")
    return float(np.mean([_cosine(va[s], vb[s]) for s in range(n)]))


def chroma_diversity(chromas: Sequence[Chromagram], segment_seconds: float = SEGMENT_SECONDS) -> float:
    """One minus the average pairwise chroma similarity over the set."""
    n = len(chromas)
    if n < 2:
        raise MetricError(f"diversity needs at least two chromagrams, got {n}")
    for i, chroma in enumerate(chromas):
        if chroma.one_hot:
            raise MetricError(f"chromagram {i} is one-hot; diversity needs continuous energies")
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            total += chroma_similarity(chromas[i], chromas[j], segment_seconds)
    return 1.0 - (2.0 / (n * (n - 1))) * total


def instrument_distribution(
    song: MidiSong,
    scheme: ArrangementScheme,
    *,
    registry: Mapping[str, Instrument] | None = None,
) -> InstrumentDistribution:
    """Share of total note time per instrument family, over all plans."""
    if registry is None:
        registry = load_instruments()
    weights: dict[str, float] = {}
    for plan in scheme.tracks:
        if not 0 <= plan.source_track < len(song.tracks):
            raise MetricError(f"plan references missing song track {plan.source_track}")
        if plan.instrument not in registry:
            raise MetricError(f"unknown instrument {plan.instrument!r}")
        family = registry[plan.instrument].family
        seconds = sum(note.duration for note in song.tracks[plan.source_track].notes)
        weights[family] = weights.get(family, 0.0) + seconds
    total = sum(weights.values())
    if total <= 0:
        raise MetricError("no note time to weigh; the song is silent")
    return InstrumentDistribution(weights={k: v / total for k, v in weights.items()})


def instrumentation_distance(a: InstrumentDistribution, b: InstrumentDistribution) -> float:
    """Cosine distance between family-share vectors (0 = same blend)."""
    families = sorted(set(a.weights) | set(b.weights))
    va = np.array([a.share(f) for f in families])
    vb = np.array([b.share(f) for f in families])
    if not np.any(va) or not np.any(vb):
        raise MetricError("instrument distributions must not be zero vectors")
    return 1.0 - _cosine(va, vb)
