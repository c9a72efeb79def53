"""Frame ingestion: PGM/PPM directories and the raw planar stream.

Raw stream layout: 20-byte header — magic "CSFR", then width, height,
frame count as little-endian u32 and fps as little-endian f32 —
followed by count row-major 8-bit grayscale planes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

RAW_MAGIC = b"CSFR"


class VisionError(ValueError):
    """Ingestion or analysis error in the vision stage."""


@dataclass(frozen=True)
class FrameSequence:
    frames: np.ndarray  # (count, height, width) uint8
    frame_rate: float

    def __post_init__(self):
        f = np.asarray(self.frames)
        if f.ndim != 3:
            raise VisionError(f"frames must be (count, height, width), got {f.shape}")
        if f.dtype != np.uint8:
            raise VisionError(f"frames must be 8-bit, got {f.dtype}")
        if self.frame_rate <= 0:
            raise VisionError("frame_rate must be positive")
        f.flags.writeable = False
        object.__setattr__(self, "frames", f)

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.frame_rate


def _read_pnm(path: Path) -> np.ndarray:
    """Decode one binary or ASCII PGM/PPM file to grayscale."""
    data = path.read_bytes()
    if data[:1] != b"P" or data[1:2] not in b"2356":
        raise VisionError(f"{path.name}: not a PGM/PPM file")
    kind = data[:2].decode()

    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise VisionError(f"{path.name}: truncated header")
        tokens.append(data[start:pos])
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise VisionError(f"{path.name}: bad header token") from exc
    if not (0 < maxval < 65536) or width <= 0 or height <= 0:
        raise VisionError(f"{path.name}: bad dimensions")
    channels = 3 if kind in ("P3", "P6") else 1

    if kind in ("P5", "P6"):
        pos += 1  # single whitespace after maxval
        count = width * height * channels
        if maxval > 255:
            raise VisionError(f"{path.name}: 16-bit samples not supported")
        raw = data[pos : pos + count]
        if len(raw) < count:
            raise VisionError(f"{path.name}: truncated pixel data")
        pixels = np.frombuffer(raw, dtype=np.uint8).astype(np.float64)
    else:
        values = data[pos:].split()
        count = width * height * channels
        if len(values) < count:
            raise VisionError(f"{path.name}: truncated pixel data")
        pixels = np.array([int(v) for v in values[:count]], dtype=np.float64)
    pixels = pixels * (255.0 / maxval)
    if channels == 3:
        rgb = pixels.reshape(height, width, 3)
        gray = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    else:
        gray = pixels.reshape(height, width)
    return np.clip(np.rint(gray), 0, 255).astype(np.uint8)


def _load_directory(path: Path, frame_rate: float) -> FrameSequence:
    files = sorted(
        p for p in path.iterdir() if p.suffix.lower() in (".pgm", ".ppm", ".pnm")
    )
    if len(files) < 2:
        raise VisionError(f"{path}: need at least 2 frames, found {len(files)}")
    frames = [_read_pnm(p) for p in files]
    shape = frames[0].shape
    for p, f in zip(files, frames):
        if f.shape != shape:
            raise VisionError(
                f"{p.name}: dimensions {f.shape[::-1]} differ from {shape[::-1]}"
            )
    return FrameSequence(frames=np.stack(frames), frame_rate=frame_rate)


def _load_raw(data: bytes) -> FrameSequence:
    if len(data) < 20:
        raise VisionError("raw stream shorter than its 20-byte header")
    magic, width, height, count = struct.unpack_from("<4sIII", data, 0)
    (fps,) = struct.unpack_from("<f", data, 16)
    if magic != RAW_MAGIC:
        raise VisionError(f"bad raw-stream magic {magic!r}")
    if count < 2:
        raise VisionError(f"need at least 2 frames, header declares {count}")
    if width == 0 or height == 0 or not np.isfinite(fps) or fps <= 0:
        raise VisionError("bad raw-stream dimensions or fps")
    need = 20 + width * height * count
    if len(data) < need:
        raise VisionError(f"raw stream truncated: {len(data)} < {need} bytes")
    planes = np.frombuffer(data[20:need], dtype=np.uint8)
    frames = planes.reshape(count, height, width).copy()
    return FrameSequence(frames=frames, frame_rate=float(fps))


def write_raw_frames(path, frames: FrameSequence) -> None:
    """Serialize a FrameSequence to the raw planar stream format."""
    count, height, width = frames.frames.shape
    header = struct.pack("<4sIIIf", RAW_MAGIC, width, height, count, frames.frame_rate)
    Path(path).write_bytes(header + frames.frames.tobytes())


def load_frames(source, frame_rate: float = 25.0) -> FrameSequence:
    """Load frames from a PGM/PPM directory or a raw stream file.

    `frame_rate` applies to directories; raw streams carry their own.
    """
    path = Path(source)
    if path.is_dir():
        return _load_directory(path, frame_rate)
    if not path.exists():
        raise VisionError(f"{path}: no such file or directory")
    return _load_raw(path.read_bytes())
