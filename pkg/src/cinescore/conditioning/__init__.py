"""Rhythm conditioning: click synthesis, chromagram features, the
conditioning bundle contract, and pluggable melody-generator backends."""

from .bundle import ConditioningBundle, assemble_condition
from .chroma import (
    DEFAULT_HOP,
    DEFAULT_WINDOW,
    Chromagram,
    ChromaError,
    chromagram,
    downsample_chroma,
    load_chromagram_json,
)
from .click import CLICK_AMPLITUDE, CLICK_DURATION, CLICK_FREQUENCY, synthesize_click_track
from .generator import (
    GeneratorBackend,
    GeneratorError,
    ProcessGenerator,
    ProcessTranscriber,
    StubGenerator,
    TranscriptionBackend,
    stub_generate,
)

__all__ = [
    "CLICK_AMPLITUDE",
    "CLICK_DURATION",
    "CLICK_FREQUENCY",
    "Chromagram",
    "ChromaError",
    "ConditioningBundle",
    "DEFAULT_HOP",
    "DEFAULT_WINDOW",
    "GeneratorBackend",
    "GeneratorError",
    "ProcessGenerator",
    "ProcessTranscriber",
    "StubGenerator",
    "TranscriptionBackend",
    "assemble_condition",
    "chromagram",
    "downsample_chroma",
    "load_chromagram_json",
    "stub_generate",
    "synthesize_click_track",
]
