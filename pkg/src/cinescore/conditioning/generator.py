"""Melody-generator backends.

Every backend obeys one determinism contract: the same (bundle,
duration, seed) must yield an identical waveform.  The stub backend
turns each contiguous run of valid rhythm frames into one sine note
whose pitch class follows the one-hot chroma, which keeps the full
pipeline runnable (and bit-reproducible) without a neural decoder.
External decoders plug in through ProcessGenerator: the bundle goes to
the child's stdin as JSON, a WAV stream comes back on stdout.
"""

from __future__ import annotations

import json
import random
import subprocess
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from ..audio import Waveform, decode_wav, encode_wav
from ..notation import MidiSong, parse_midi
from .bundle import ConditioningBundle


class GeneratorError(RuntimeError):
    pass


@runtime_checkable
class GeneratorBackend(Protocol):
    sample_rate: int
    max_duration: float | None
    concurrent_safe: bool

    def generate(
        self, bundle: ConditioningBundle, duration: float, seed: int
    ) -> Waveform: ...


@runtime_checkable
class TranscriptionBackend(Protocol):
    """Waveform -> symbolic music, the contract a neural transcriber fills."""

    def transcribe(self, audio: Waveform) -> MidiSong: ...


_NOTE_AMPLITUDE = 0.3
_AMPLITUDE_JITTER = 0.05
_ATTACK = 0.005
_RELEASE = 0.03


@dataclass
class StubGenerator:
    """Deterministic stand-in for a neural melody decoder."""

    max_duration: float | None = None
    concurrent_safe: bool = True
    sample_rate: int = 32_000  # overridden per call by the bundle's rate

    def generate(
        self, bundle: ConditioningBundle, duration: float, seed: int
    ) -> Waveform:
        return stub_generate(bundle, duration, seed)


def _valid_groups(mask: np.ndarray):
    """Contiguous runs of true mask bits as (start, stop) frame indices."""
    groups = []
    start = None
    for i, bit in enumerate(mask):
        if bit and start is None:
            start = i
        elif not bit and start is not None:
            groups.append((start, i))
            start = None
    if start is not None:
        groups.append((start, len(mask)))
    return groups


def stub_generate(bundle: ConditioningBundle, duration: float, seed: int) -> Waveform:
    """One octave-4 sine note per valid rhythm frame group.

    Onsets sit at the first frame's center time, so they track the
    rhythm spots that produced the chroma to within one hop.
    """
    if duration <= 0:
        raise GeneratorError("duration must be positive")
    chroma = bundle.rhythm
    sr = chroma.sample_rate
    total = int(round(duration * sr))
    out = np.zeros(total)
    rng = random.Random(seed)

    for start, stop in _valid_groups(chroma.mask):
        onset = chroma.frame_time(start)
        amplitude = _NOTE_AMPLITUDE + _AMPLITUDE_JITTER * (2 * rng.random() - 1)
        if onset >= duration:
            continue
        energy = chroma.frames[start:stop].sum(axis=0)
        if energy.sum() <= 0:
            continue
        pitch_class = int(np.argmax(energy))
        midi = 60 + pitch_class  # octave 4
        freq = 440.0 * 2.0 ** ((midi - 69) / 12.0)

        end_time = min((stop * chroma.hop + chroma.window / 2) / sr, duration)
        length = max(int(round((end_time - onset) * sr)), int(0.05 * sr))
        first = int(round(onset * sr))
        length = min(length, total - first)
        if length <= 0:
            continue
        t = np.arange(length) / sr
        tone = amplitude * np.sin(2 * np.pi * freq * t)
        envelope = np.minimum(1.0, t / _ATTACK)
        tail = (length / sr) - t
        envelope *= np.clip(tail / _RELEASE, 0.0, 1.0)
        out[first : first + length] += tone * envelope
    np.clip(out, -1.0, 1.0, out=out)
    return Waveform(samples=out, sample_rate=sr)


class ProcessGenerator:
    """Runs an external decoder process per the stdin-JSON/stdout-WAV
    protocol.  Determinism is the child's responsibility; this wrapper
    only enforces the framing."""

    def __init__(
        self,
        command: list[str],
        sample_rate: int = 32_000,
        max_duration: float | None = None,
        concurrent_safe: bool = False,
        timeout: float = 600.0,
    ):
        self.command = list(command)
        self.sample_rate = sample_rate
        self.max_duration = max_duration
        self.concurrent_safe = concurrent_safe
        self.timeout = timeout

    def generate(
        self, bundle: ConditioningBundle, duration: float, seed: int
    ) -> Waveform:
        payload = json.dumps(
            {
                "chroma": json.loads(bundle.rhythm.to_json()),
                "description": bundle.description,
                "duration": duration,
                "seed": seed,
            }
        ).encode()
        try:
            proc = subprocess.run(
                self.command,
                input=payload,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                timeout=self.timeout,
            )
        except OSError as exc:
            raise GeneratorError(f"cannot start generator process: {exc}") from exc
        except subprocess.TimeoutExpired as exc:
            raise GeneratorError(f"generator timed out after {self.timeout}s") from exc
        if proc.returncode != 0:
            detail = proc.stderr.decode(errors="replace").strip()[:500]
            raise GeneratorError(
                f"generator exited with status {proc.returncode}: {detail}"
            )
        try:
            return decode_wav(proc.stdout)
        except ValueError as exc:
            raise GeneratorError(f"generator returned invalid WAV: {exc}") from exc


class ProcessTranscriber:
    """External waveform->MIDI transcriber: WAV on stdin, SMF on stdout."""

    def __init__(self, command: list[str], timeout: float = 600.0):
        self.command = list(command)
        self.timeout = timeout

    def transcribe(self, audio: Waveform) -> MidiSong:
        try:
            proc = subprocess.run(
                self.command,
                input=encode_wav(audio, bits=16),
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                timeout=self.timeout,
            )
        except OSError as exc:
            raise GeneratorError(f"cannot start transcriber process: {exc}") from exc
        except subprocess.TimeoutExpired as exc:
            raise GeneratorError(f"transcriber timed out after {self.timeout}s") from exc
        if proc.returncode != 0:
            detail = proc.stderr.decode(errors="replace").strip()[:500]
            raise GeneratorError(
                f"transcriber exited with status {proc.returncode}: {detail}"
            )
        return parse_midi(proc.stdout)
