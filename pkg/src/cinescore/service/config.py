"""Pipeline configuration: one file, environment overrides, checked ranges."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from ..melody import DEFAULT_COVERAGE_THRESHOLD, DEFAULT_MERGE_WINDOW

#: Prefix for environment-variable overrides, e.g. CINESCORE_GATE_THRESHOLD=14.
ENV_PREFIX = "CINESCORE_"


class ConfigError(ValueError):
    """Out-of-range or unparseable configuration value."""


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable decision of the pipeline, with documented ranges.

    Backend selectors take one of three spellings: ``mock`` /
    ``builtin`` / ``stub`` for the in-process implementations,
    ``http:<url>`` for a remote endpoint, ``process:<command line>``
    for a subprocess speaking the documented stdin/stdout protocol.
    """

    #: Main-melody track acceptance threshold, 0..1.
    coverage_threshold: float = DEFAULT_COVERAGE_THRESHOLD
    #: Rhythm-spot merge window in seconds, >= 0.
    merge_window: float = DEFAULT_MERGE_WINDOW
    #: Conditioning chromagram STFT window (samples, power of two >= 256).
    chroma_window: int = 2048
    #: Conditioning chromagram hop (samples, 1..chroma_window).
    chroma_hop: int = 1024
    #: Musicality score a melody needs to proceed, 0..19.
    gate_threshold: int = 12
    #: Generate attempts before the assessment gate gives up, >= 1.
    max_attempts: int = 3
    #: Instrument registry JSON path; empty means the built-in registry.
    registry_path: str = ""
    #: Music generator backend: "stub" or "process:<command>".
    generator: str = "stub"
    #: Audio-to-MIDI backend: "builtin" or "process:<command>".
    transcriber: str = "builtin"
    #: Agent chat backend: "mock", "http:<url>", or "process:<command>".
    llm_backend: str = "mock"
    #: API key forwarded to an http llm backend; empty means none.
    llm_api_key: str = ""
    #: Seed for the generator; attempt k uses seed + k - 1.
    seed: int = 7
    #: Click-track / generated-audio sample rate: 32000, 44100, or 48000.
    click_sample_rate: int = 32000
    #: Transcription quantization grid in seconds, > 0.
    quantize_grid: float = 0.125
    #: Shot-cut rolling context in frames, >= 3.
    cut_window: int = 25
    #: Shot-cut threshold in standard deviations, > 0.
    cut_sigma: float = 3.0
    #: Minimum scene length in frames, >= 1.
    min_scene_len: int = 10
    #: Render thread count, >= 1 (output is identical for any value).
    render_workers: int = 1
    #: Fade-out applied where the cue meets the clip end, seconds >= 0.
    fade_seconds: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.coverage_threshold <= 1.0:
            raise ConfigError(f"coverage_threshold must lie in 0..1, got {self.coverage_threshold}")
        if self.merge_window < 0:
            raise ConfigError(f"merge_window must be >= 0, got {self.merge_window}")
        if self.chroma_window < 256 or self.chroma_window & (self.chroma_window - 1):
            raise ConfigError(f"chroma_window must be a power of two >= 256, got {self.chroma_window}")
        if not 1 <= self.chroma_hop <= self.chroma_window:
            raise ConfigError(f"chroma_hop must lie in 1..chroma_window, got {self.chroma_hop}")
        if not 0 <= self.gate_threshold <= 19:
            raise ConfigError(f"gate_threshold must lie in 0..19, got {self.gate_threshold}")
        if self.max_attempts < 1:
            raise ConfigError(f"max_attempts must be >= 1, got {self.max_attempts}")
        if self.click_sample_rate not in (32000, 44100, 48000):
            raise ConfigError(f"click_sample_rate must be 32000/44100/48000, got {self.click_sample_rate}")
        if self.quantize_grid <= 0:
            raise ConfigError(f"quantize_grid must be > 0, got {self.quantize_grid}")
        if self.cut_window < 3:
            raise ConfigError(f"cut_window must be >= 3, got {self.cut_window}")
        if self.cut_sigma <= 0:
            raise ConfigError(f"cut_sigma must be > 0, got {self.cut_sigma}")
        if self.min_scene_len < 1:
            raise ConfigError(f"min_scene_len must be >= 1, got {self.min_scene_len}")
        if self.render_workers < 1:
            raise ConfigError(f"render_workers must be >= 1, got {self.render_workers}")
        if self.fade_seconds < 0:
            raise ConfigError(f"fade_seconds must be >= 0, got {self.fade_seconds}")
        for selector, allowed in (
            ("generator", ("stub",)),
            ("transcriber", ("builtin",)),
            ("llm_backend", ("mock",)),
        ):
            value = getattr(self, selector)
            if value in allowed or value.startswith("process:"):
                continue
            if selector == "llm_backend" and value.startswith("http:"):
                continue
            raise ConfigError(
                f"{selector} must be one of {allowed}, 'process:<command>'"
                + (", or 'http:<url>'" if selector == "llm_backend" else "")
                + f"; got {value!r}"
            )


def _coerce(name: str, kind: type, raw: str):
    try:
        if kind is bool:
            return raw.lower() in ("1", "true", "yes", "on")
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind.__name__}") from exc


def load_config(path: str | Path | None = None, env: dict[str, str] | None = None) -> PipelineConfig:
    """Build a config from defaults, then a JSON file, then env overrides."""
    values: dict[str, object] = {}
    known = {f.name: f.type for f in fields(PipelineConfig)}
    kinds = {"float": float, "int": int, "str": str}

    if path is not None:
        p = Path(path)
        try:
            data = json.loads(p.read_text())
        except OSError as exc:
            raise ConfigError(f"{p}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{p}: top level must be an object")
        for key, value in data.items():
            if key not in known:
                raise ConfigError(f"{p}: unknown setting {key!r}")
            values[key] = value

    environ = os.environ if env is None else env
    for key, kind_name in known.items():
        raw = environ.get(ENV_PREFIX + key.upper())
        if raw is not None:
            values[key] = _coerce(key, kinds[kind_name], raw)

    try:
        return PipelineConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def write_config(config: PipelineConfig, path: str | Path) -> Path:
    """Write the full config as JSON (a template users can edit)."""
    p = Path(path)
    payload = {f.name: getattr(config, f.name) for f in fields(PipelineConfig)}
    p.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return p


__all__ = ["ConfigError", "ENV_PREFIX", "PipelineConfig", "load_config", "write_config"]
