"""Audio sample buffers and WAV file I/O.

Waveform is the common carrier between the click synthesizer, the
generator backends, the renderer, and the metric suite.  WAV support
covers what the pipeline needs: 16/24-bit PCM and 32-bit float read,
16/24-bit PCM and 32-bit float write, mono or stereo.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

VALID_SAMPLE_RATES = (32000, 44100, 48000)


class AudioError(ValueError):
    """Raised for malformed audio buffers or WAV payloads."""


@dataclass(frozen=True)
class Waveform:
    """Float samples in [-1, 1].

    samples has shape (n,) for mono or (n, 2) for stereo.  Buffers are
    treated as immutable once constructed; operations return new
    Waveform instances.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim == 1:
            pass
        elif s.ndim == 2 and s.shape[1] in (1, 2):
            if s.shape[1] == 1:
                s = s[:, 0]
        else:
            raise AudioError(f"unsupported sample shape {s.shape}")
        if self.sample_rate not in VALID_SAMPLE_RATES:
            raise AudioError(f"sample rate {self.sample_rate} not in {VALID_SAMPLE_RATES}")
        if s.size and (np.max(s) > 1.0 + 1e-9 or np.min(s) < -1.0 - 1e-9):
            raise AudioError("samples exceed [-1, 1]")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def channels(self) -> int:
        return 1 if self.samples.ndim == 1 else self.samples.shape[1]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return self.num_samples / self.sample_rate

    def to_mono(self) -> "Waveform":
        if self.channels == 1:
            return self
        return Waveform(self.samples.mean(axis=1), self.sample_rate)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Waveform):
            return NotImplemented
        return (
            self.sample_rate == other.sample_rate
            and self.samples.shape == other.samples.shape
            and bool(np.array_equal(self.samples, other.samples))
        )


def _clamped(samples: np.ndarray) -> np.ndarray:
    return np.clip(samples, -1.0, 1.0)


def encode_wav(wave: Waveform, bits: int = 24) -> bytes:
    """Serialize to a RIFF/WAVE byte string.

    bits: 16 or 24 for integer PCM, 32 for IEEE float.
    """
    if bits not in (16, 24, 32):
        raise AudioError(f"unsupported bit depth {bits}")
    s = wave.samples
    if s.ndim == 1:
        s = s[:, None]
    n, ch = s.shape
    if bits == 32:
        fmt_code = 3
        payload = _clamped(s).astype("<f4").tobytes()
    elif bits == 16:
        fmt_code = 1
        q = np.clip(np.round(_clamped(s) * 32767.0), -32768, 32767).astype("<i2")
        payload = q.tobytes()
    else:
        fmt_code = 1
        full = 1 << 23
        q = np.clip(np.round(_clamped(s) * full), -full, full - 1).astype("<i4")
        # 24-bit little-endian: drop the high byte of each int32
        b = q.astype("<i4").tobytes()
        arr = np.frombuffer(b, dtype=np.uint8).reshape(-1, 4)
        payload = arr[:, :3].tobytes()
    block_align = ch * bits // 8
    byte_rate = wave.sample_rate * block_align
    fmt = struct.pack("<HHIIHH", fmt_code, ch, wave.sample_rate, byte_rate, block_align, bits)
    chunks = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    chunks += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) % 2:
        chunks += b"\x00"
    return b"RIFF" + struct.pack("<I", len(chunks)) + chunks


def decode_wav(data: bytes) -> Waveform:
    """Parse a RIFF/WAVE byte string into a Waveform."""
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise AudioError("not a RIFF/WAVE stream")
    pos = 12
    fmt = None
    payload = None
    while pos + 8 <= len(data):
        cid = data[pos : pos + 4]
        (size,) = struct.unpack("<I", data[pos + 4 : pos + 8])
        body = data[pos + 8 : pos + 8 + size]
        if cid == b"fmt ":
            if len(body) < 16:
                raise AudioError("truncated fmt chunk")
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif cid == b"data":
            payload = body
        pos += 8 + size + (size % 2)
    if fmt is None or payload is None:
        raise AudioError("missing fmt or data chunk")
    fmt_code, ch, rate, _, _, bits = fmt
    if ch not in (1, 2):
        raise AudioError(f"unsupported channel count {ch}")
    if fmt_code == 3 and bits == 32:
        s = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    elif fmt_code == 1 and bits == 16:
        s = np.frombuffer(payload, dtype="<i2").astype(np.float64) / 32767.0
    elif fmt_code == 1 and bits == 24:
        raw = np.frombuffer(payload, dtype=np.uint8)
        raw = raw[: (len(raw) // 3) * 3].reshape(-1, 3)
        padded = np.zeros((raw.shape[0], 4), dtype=np.uint8)
        padded[:, 1:] = raw
        s = (np.frombuffer(padded.tobytes(), dtype="<i4") >> 8).astype(np.float64) / (1 << 23)
    else:
        raise AudioError(f"unsupported format code {fmt_code} / {bits} bits")
    if ch == 2:
        s = s[: (len(s) // 2) * 2].reshape(-1, 2)
    return Waveform(np.clip(s, -1.0, 1.0), int(rate))


def write_wav_file(path, wave: Waveform, bits: int = 24) -> None:
    with open(path, "wb") as f:
        f.write(encode_wav(wave, bits=bits))


def read_wav_file(path) -> Waveform:
    with open(path, "rb") as f:
        return decode_wav(f.read())
