"""Bundled demo footage, synthesized deterministically at run time.

The rehearsal clip is 8 seconds of 32 fps grayscale frames cut into
half-second scenes: luminance alternates strongly at every cut while a
slow sinusoidal drift keeps some motion inside each scene.  Cut times
land exactly on both the frame grid and the score quantization grid,
so the spotting, transcription, and rendering stages line up without
rounding error.
"""

from __future__ import annotations

import numpy as np

from ..vision import FrameSequence

#: Demo clip geometry.
DEMO_FRAME_RATE = 32.0
DEMO_FRAME_COUNT = 256
DEMO_HEIGHT, DEMO_WIDTH = 24, 32
#: Frames per scene (0.5 s at 32 fps).
DEMO_SCENE_FRAMES = 16


def build_demo_clip() -> FrameSequence:
    """Synthesize the demo clip; same bytes on every call."""
    frames = np.empty((DEMO_FRAME_COUNT, DEMO_HEIGHT, DEMO_WIDTH), dtype=np.uint8)
    rows, cols = np.mgrid[0:DEMO_HEIGHT, 0:DEMO_WIDTH]
    for i in range(DEMO_FRAME_COUNT):
        scene = i // DEMO_SCENE_FRAMES
        base = 40 + 170 * (scene % 2) + 8 * ((scene * 5) % 3)
        drift = 6.0 * np.sin(cols / 5.0 + (i % DEMO_SCENE_FRAMES) * 0.2)
        texture = 4.0 * np.cos(rows / 3.0 + scene)
        frames[i] = np.clip(base + drift + texture, 0, 255).astype(np.uint8)
    return FrameSequence(frames=frames, frame_rate=DEMO_FRAME_RATE)


__all__ = [
    "DEMO_FRAME_COUNT",
    "DEMO_FRAME_RATE",
    "DEMO_HEIGHT",
    "DEMO_SCENE_FRAMES",
    "DEMO_WIDTH",
    "build_demo_clip",
]
