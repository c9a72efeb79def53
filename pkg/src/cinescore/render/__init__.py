"""Headless rendering: arrangement scheme + song -> 48 kHz/24-bit WAV."""

from .engine import (
    ALLPASS_DELAYS,
    ALLPASS_GAIN,
    COMB_DELAYS,
    COMB_FEEDBACK,
    COMB_MIX,
    CROSSFADE_SECONDS,
    MASTER_BIT_DEPTH,
    MASTER_SAMPLE_RATE,
    RENDER_TAIL_SECONDS,
    SYNTH_HEADROOM,
    Master,
    NoteLogEntry,
    RenderResult,
    apply_dynamics,
    apply_pan,
    apply_reverb,
    fold_into_range,
    mixdown,
    render_scheme,
    synthesize_track,
    write_master,
    write_note_log,
)
from .recipes import MAX_RELEASE, RECIPES, RenderError, SynthRecipe, recipe_for

__all__ = [
    "ALLPASS_DELAYS",
    "ALLPASS_GAIN",
    "COMB_DELAYS",
    "COMB_FEEDBACK",
    "COMB_MIX",
    "CROSSFADE_SECONDS",
    "MASTER_BIT_DEPTH",
    "MASTER_SAMPLE_RATE",
    "MAX_RELEASE",
    "RECIPES",
    "RENDER_TAIL_SECONDS",
    "SYNTH_HEADROOM",
    "Master",
    "NoteLogEntry",
    "RenderError",
    "RenderResult",
    "SynthRecipe",
    "apply_dynamics",
    "apply_pan",
    "apply_reverb",
    "fold_into_range",
    "mixdown",
    "recipe_for",
    "render_scheme",
    "synthesize_track",
    "write_master",
    "write_note_log",
]
