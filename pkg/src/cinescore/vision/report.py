"""The validated visual-attribute report and its prompt rendering.

Labels come from the bundled vocabulary (assets/vocabulary.json);
"null" is itself a listed label in the categories that permit an
absent value.  Fields hold either one label or a tuple of labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from ..diagnostics import Diagnostic, error, has_errors

VOCABULARY_CATEGORIES = (
    "setting",
    "brightness",
    "color_hue",
    "action",
    "emotion",
    "view_scale",
    "theme",
)

# rendering names for prompt text, in the fixed template order
_DISPLAY_NAMES = {
    "setting": "setting",
    "brightness": "brightness",
    "color_hue": "color hue",
    "action": "action",
    "emotion": "emotion",
    "view_scale": "view scale",
    "theme": "theme",
}


class ReportError(ValueError):
    """Raised when an invalid report is used where a valid one is required."""


@lru_cache(maxsize=1)
def load_vocabulary() -> dict[str, tuple[str, ...]]:
    text = resources.files("cinescore").joinpath("assets/vocabulary.json").read_text()
    data = json.loads(text)
    return {k: tuple(v) for k, v in data["categories"].items()}


def _as_labels(value) -> tuple[str, ...]:
    if isinstance(value, str):
        return (value,)
    return tuple(value)


@dataclass(frozen=True)
class VisualReport:
    setting: str | tuple[str, ...] = "null"
    brightness: str | tuple[str, ...] = "mild"
    color_hue: str | tuple[str, ...] = "Gray"
    action: str | tuple[str, ...] = "null"
    emotion: str | tuple[str, ...] = "null"
    view_scale: str | tuple[str, ...] = "full shot"
    theme: str | tuple[str, ...] = "null"
    motion_speed: float = 0.0
    motion_saliency: float = 0.0
    shot_cuts: tuple[float, ...] = ()
    plot_development: str = ""

    def labels(self, category: str) -> tuple[str, ...]:
        return _as_labels(getattr(self, category))

    def to_json(self) -> str:
        def plain(value):
            labels = _as_labels(value)
            return labels[0] if len(labels) == 1 else list(labels)

        payload = {c: plain(getattr(self, c)) for c in VOCABULARY_CATEGORIES}
        payload["motion_speed"] = self.motion_speed
        payload["motion_saliency"] = self.motion_saliency
        payload["shot_cuts"] = list(self.shot_cuts)
        payload["plot_development"] = self.plot_development
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "VisualReport":
        data = json.loads(text)
        kwargs = {}
        for c in VOCABULARY_CATEGORIES:
            if c in data:
                v = data[c]
                kwargs[c] = v if isinstance(v, str) else tuple(v)
        for key in ("motion_speed", "motion_saliency", "plot_development"):
            if key in data:
                kwargs[key] = data[key]
        if "shot_cuts" in data:
            kwargs["shot_cuts"] = tuple(float(t) for t in data["shot_cuts"])
        return cls(**kwargs)


def validate_visual_report(report: VisualReport) -> list[Diagnostic]:
    vocab = load_vocabulary()
    diags: list[Diagnostic] = []
    for category in VOCABULARY_CATEGORIES:
        labels = report.labels(category)
        if not labels:
            diags.append(error(f"{category}: at least one label required", pointer=f"/{category}"))
        for label in labels:
            if label not in vocab[category]:
                allowed = "{" + ", ".join(vocab[category]) + "}"
                diags.append(
                    error(
                        f'{category}: "{label}" not in {allowed}',
                        pointer=f"/{category}",
                    )
                )
    if report.motion_speed < 0:
        diags.append(error("motion_speed must be >= 0", pointer="/motion_speed"))
    if report.motion_saliency < 0:
        diags.append(error("motion_saliency must be >= 0", pointer="/motion_saliency"))
    for a, b in zip(report.shot_cuts, report.shot_cuts[1:]):
        if b <= a:
            diags.append(error("shot_cuts must be strictly increasing", pointer="/shot_cuts"))
            break
    return diags


def build_description(report: VisualReport, music_hints: str | None = None) -> str:
    """Deterministic prompt text: "category: value" pairs in fixed order."""
    diags = validate_visual_report(report)
    if has_errors(diags):
        raise ReportError("; ".join(str(d) for d in diags))
    parts = []
    for category in VOCABULARY_CATEGORIES:
        value = ", ".join(report.labels(category))
        parts.append(f"{_DISPLAY_NAMES[category]}: {value}")
    text = "; ".join(parts)
    if music_hints:
        text += f"; {music_hints}"
    return text
