"""Built-in monophonic transcription: gated RMS segmentation + FFT pitch.

Turns generated audio into a quantized legato melody: each detected
event becomes a note that sustains until the next event (or the end of
the audio), so the score carries the rhythm without gaps of silence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..audio import Waveform
from ..notation import MidiNote, MidiSong, Track

#: RMS analysis frame, seconds.
FRAME_SECONDS = 0.010
#: Gate threshold relative to the loudest frame, dB.
GATE_DB = -30.0
#: Absolute gate floor, linear amplitude.
GATE_FLOOR = 1e-4
#: Segments closer than this merge, frames.
MERGE_FRAMES = 2
#: Shortest segment kept, frames.
MIN_FRAMES = 3
#: Playable pitch clamp, MIDI numbers.
PITCH_LOW, PITCH_HIGH = 21, 108
#: Full-scale amplitude mapped to velocity 127.
VELOCITY_FULL_SCALE = 0.35


def _segments(envelope: np.ndarray, threshold: float) -> list[tuple[int, int]]:
    """Contiguous frame runs above the gate, merged across short dips."""
    active = envelope > threshold
    runs: list[tuple[int, int]] = []
    start = None
    for i, on in enumerate(active):
        if on and start is None:
            start = i
        elif not on and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(active)))
    merged: list[tuple[int, int]] = []
    for lo, hi in runs:
        if merged and lo - merged[-1][1] <= MERGE_FRAMES:
            merged[-1] = (merged[-1][0], hi)
        else:
            merged.append((lo, hi))
    return [(lo, hi) for lo, hi in merged if hi - lo >= MIN_FRAMES]


def _estimate_pitch(segment: np.ndarray, sample_rate: int) -> int:
    """MIDI pitch of the strongest spectral peak, parabolic-refined."""
    spectrum = np.abs(np.fft.rfft(segment * np.hanning(len(segment))))
    k = int(np.argmax(spectrum[1:])) + 1
    delta = 0.0
    if 1 <= k < len(spectrum) - 1:
        a, b, c = spectrum[k - 1], spectrum[k], spectrum[k + 1]
        denominator = a - 2.0 * b + c
        if denominator != 0.0:
            delta = 0.5 * (a - c) / denominator
    frequency = (k + delta) * sample_rate / len(segment)
    if frequency <= 0:
        return 60
    pitch = int(round(69 + 12 * math.log2(frequency / 440.0)))
    return min(PITCH_HIGH, max(PITCH_LOW, pitch))


def transcribe_monophonic(audio: Waveform, grid: float = 0.125) -> MidiSong:
    """Transcribe audio into one legato melody track on a time grid.

    Event onsets snap to multiples of ``grid`` seconds; two events in
    the same cell collapse to the first.  Each note's duration runs to
    the next onset, the last to the end of the audio, so the melody is
    legato.  Velocity follows the segment's peak amplitude.
    """
    if grid <= 0:
        raise ValueError(f"grid must be > 0, got {grid}")
    mono = audio.to_mono()
    sample_rate = mono.sample_rate
    hop = max(1, int(round(FRAME_SECONDS * sample_rate)))
    count = mono.num_samples // hop
    if count == 0:
        return MidiSong(tracks=(Track(index=0, name="melody"),))
    framed = mono.samples[: count * hop].reshape(count, hop)
    envelope = np.sqrt(np.mean(framed * framed, axis=1))
    peak_env = float(envelope.max())
    if peak_env <= 0.0:
        return MidiSong(tracks=(Track(index=0, name="melody"),))
    threshold = max(peak_env * 10.0 ** (GATE_DB / 20.0), GATE_FLOOR)

    events: list[tuple[float, int, int]] = []
    used_cells: set[int] = set()
    for lo, hi in _segments(envelope, threshold):
        segment = mono.samples[lo * hop : hi * hop]
        onset = round((lo * hop / sample_rate) / grid) * grid
        cell = round(onset / grid)
        if cell in used_cells:
            continue
        used_cells.add(cell)
        pitch = _estimate_pitch(segment, sample_rate)
        peak = float(np.max(np.abs(segment)))
        velocity = min(127, max(20, int(round(127 * peak / VELOCITY_FULL_SCALE))))
        events.append((onset, pitch, velocity))

    end_time = max(round(mono.duration / grid) * grid, events[-1][0] + grid if events else 0.0)
    notes = []
    for i, (onset, pitch, velocity) in enumerate(events):
        next_onset = events[i + 1][0] if i + 1 < len(events) else end_time
        duration = max(grid, next_onset - onset)
        notes.append(MidiNote(onset=onset, duration=duration, pitch=pitch, velocity=velocity))
    return MidiSong(tracks=(Track(index=0, name="melody", notes=tuple(notes)),))


@dataclass(frozen=True)
class BuiltinTranscriber:
    """Transcription backend wrapping transcribe_monophonic."""

    grid: float = 0.125
    concurrent_safe: bool = True

    def transcribe(self, audio: Waveform) -> MidiSong:
        return transcribe_monophonic(audio, grid=self.grid)


__all__ = ["BuiltinTranscriber", "transcribe_monophonic"]
