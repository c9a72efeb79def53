"""Additive-synthesis recipes: the renderer's substitute for DAW sound sources.

Each recipe is a bank of partials (harmonic multiple, relative
amplitude) plus an ADSR envelope.  Amplitudes are normalized at
construction so a single note never exceeds unit amplitude before
mixing.  Recipe ids are referenced by the instrument registry.
"""

from __future__ import annotations

from dataclasses import dataclass


class RenderError(ValueError):
    """Invariant violation or failure inside the renderer."""


@dataclass(frozen=True)
class SynthRecipe:
    """Partial bank and envelope for one instrument family's timbre."""

    partials: tuple[tuple[float, float], ...]
    adsr: tuple[float, float, float, float]
    family: str

    def __post_init__(self):
        if not self.partials:
            raise RenderError("a recipe needs at least one partial")
        total = 0.0
        for multiple, amplitude in self.partials:
            if multiple <= 0 or amplitude <= 0:
                raise RenderError(f"partials must be positive, got ({multiple}, {amplitude})")
            total += amplitude
        # Normalize so the additive sum of partials peaks at <= 1.
        object.__setattr__(
            self,
            "partials",
            tuple((float(m), float(a) / total) for m, a in self.partials),
        )
        attack, decay, sustain, release = self.adsr
        if attack < 0 or decay < 0 or release < 0 or not 0.0 <= sustain <= 1.0:
            raise RenderError(f"bad ADSR {self.adsr}")
        object.__setattr__(self, "adsr", (float(attack), float(decay), float(sustain), float(release)))
        if not self.family:
            raise RenderError("a recipe needs a family tag")


def _recipe(partials, adsr, family) -> SynthRecipe:
    return SynthRecipe(partials=tuple(partials), adsr=adsr, family=family)


#: Recipe id -> synthesis recipe; ids match the instrument registry.
RECIPES: dict[str, SynthRecipe] = {
    "bowed_string": _recipe(
        [(1, 1.0), (2, 0.55), (3, 0.35), (4, 0.2), (5, 0.12), (6, 0.08)],
        (0.08, 0.10, 0.85, 0.25), "strings"),
    "plucked_string": _recipe(
        [(1, 1.0), (2, 0.5), (3, 0.3), (4, 0.15), (5, 0.08)],
        (0.005, 0.25, 0.30, 0.20), "strings"),
    "woodwind": _recipe(
        [(1, 1.0), (2, 0.25), (3, 0.35), (5, 0.10)],
        (0.06, 0.08, 0.80, 0.15), "woodwind"),
    "double_reed": _recipe(
        [(1, 0.7), (2, 1.0), (3, 0.65), (4, 0.5), (5, 0.3), (6, 0.15)],
        (0.05, 0.08, 0.80, 0.12), "woodwind"),
    "reed_sax": _recipe(
        [(1, 1.0), (2, 0.7), (3, 0.5), (4, 0.3), (5, 0.18), (6, 0.1)],
        (0.04, 0.10, 0.75, 0.15), "woodwind"),
    "brass": _recipe(
        [(1, 1.0), (2, 0.85), (3, 0.7), (4, 0.55), (5, 0.4), (6, 0.25), (7, 0.15)],
        (0.04, 0.12, 0.80, 0.18), "brass"),
    "piano_like": _recipe(
        [(1, 1.0), (2, 0.6), (3, 0.35), (4, 0.2), (5, 0.1), (6, 0.05)],
        (0.002, 0.60, 0.15, 0.30), "keys"),
    "organ_like": _recipe(
        [(1, 1.0), (2, 0.8), (3, 0.5), (4, 0.6), (6, 0.3), (8, 0.2)],
        (0.02, 0.01, 0.95, 0.08), "keys"),
    "bell": _recipe(
        [(1, 1.0), (2.76, 0.6), (5.4, 0.35), (8.93, 0.15)],
        (0.002, 0.80, 0.05, 0.50), "percussion"),
    "mallet": _recipe(
        [(1, 1.0), (4, 0.45), (9.2, 0.15)],
        (0.002, 0.35, 0.10, 0.25), "percussion"),
    "voice_pad": _recipe(
        [(1, 1.0), (2, 0.4), (3, 0.25), (4, 0.1)],
        (0.15, 0.20, 0.85, 0.30), "voice"),
    "synth_lead": _recipe(
        [(1, 1.0), (2, 0.5), (3, 0.33), (4, 0.25), (5, 0.2), (6, 0.17), (7, 0.14)],
        (0.01, 0.05, 0.90, 0.10), "synth"),
    "synth_pad": _recipe(
        [(1, 1.0), (2, 0.6), (3, 0.4), (4, 0.25), (5, 0.15)],
        (0.40, 0.30, 0.80, 0.50), "synth"),
    "bass_pluck": _recipe(
        [(1, 1.0), (2, 0.45), (3, 0.2)],
        (0.005, 0.20, 0.50, 0.15), "bass"),
}

#: Longest release among the recipes; rendering pads the buffer by this
#: plus reverb room so no tail is cut off.
MAX_RELEASE = max(recipe.adsr[3] for recipe in RECIPES.values())


def recipe_for(recipe_id: str) -> SynthRecipe:
    try:
        return RECIPES[recipe_id]
    except KeyError:
        known = ", ".join(sorted(RECIPES))
        raise RenderError(f"unknown synthesis recipe {recipe_id!r} (known: {known})") from None
