"""Parse, serialize, and validate arrangement schemes.

The on-disk form is canonical JSON: keys sorted lexicographically,
numbers rendered by the shortest round-trip float format, a mandatory
``version`` field, and the ``.scheme.json`` filename extension.  Two
structurally equal schemes always serialize to byte-identical text.
Parsing reports every problem it finds as a diagnostic carrying a
JSON-pointer path to the offending value.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

from ..diagnostics import Diagnostic, error, has_errors, warning
from ..notation import MidiSong
from .model import (
    DYNAMIC_GAIN_DB,
    SCHEME_VERSION,
    ArrangementScheme,
    GlobalMix,
    SchemeError,
    TrackPlan,
)
from .registry import Instrument, load_instruments

SCHEME_EXTENSION = ".scheme.json"

_TRACK_KEYS = {
    "source_track", "duplicate", "duplicate_of", "instrument", "measure_dynamics",
    "soften", "volume_envelope", "pan", "reverb_send",
}
_GLOBAL_KEYS = {"reverb_level", "master_gain"}


class SchemeParseError(SchemeError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics if d.severity == "error"))
        self.diagnostics = diagnostics


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_index(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and value >= 0


class _Walker:
    """Structural walk over decoded JSON, collecting pointer diagnostics."""

    def __init__(self, sink: list[Diagnostic], registry: Mapping[str, Instrument]):
        self.sink = sink
        self.registry = registry

    def fail(self, pointer: str, message: str) -> None:
        self.sink.append(error(message, pointer=pointer))

    def warn(self, pointer: str, message: str) -> None:
        self.sink.append(warning(message, pointer=pointer))

    def number(self, obj: dict, key: str, pointer: str, default: float,
               low: float | None = None, high: float | None = None) -> float:
        if key not in obj:
            return default
        value = obj[key]
        if not _is_number(value):
            self.fail(f"{pointer}/{key}", f"{key} must be a number, got {json.dumps(value)}")
            return default
        if low is not None and high is not None and not low <= value <= high:
            self.fail(f"{pointer}/{key}", f"{key} must lie in [{low:g}, {high:g}], got {value}")
            return default
        return float(value)

    def global_mix(self, obj: Any) -> GlobalMix:
        if obj is None:
            return GlobalMix()
        if not isinstance(obj, dict):
            self.fail("/global", "global mix settings must be an object")
            return GlobalMix()
        for key in sorted(set(obj) - _GLOBAL_KEYS):
            self.warn(f"/global/{key}", f"unknown global setting {key!r} ignored")
        return GlobalMix(
            reverb_level=self.number(obj, "reverb_level", "/global", 0.2, 0.0, 1.0),
            master_gain=self.number(obj, "master_gain", "/global", 0.0),
        )

    def dynamics(self, obj: Any, pointer: str) -> tuple[tuple[int, str], ...]:
        if obj is None:
            return ()
        if not isinstance(obj, dict):
            self.fail(pointer, "measure_dynamics must be an object mapping measure index to level")
            return ()
        entries = []
        for key, level in obj.items():
            where = f"{pointer}/{key}"
            try:
                measure = int(key, 10)
                if measure < 0:
                    raise ValueError
            except ValueError:
                self.fail(where, f"dynamics key must be a non-negative measure index, got {key!r}")
                continue
            if level not in DYNAMIC_GAIN_DB:
                allowed = ", ".join(sorted(DYNAMIC_GAIN_DB))
                self.fail(where, f"unknown dynamic level {json.dumps(level)} (allowed: {allowed})")
                continue
            entries.append((measure, level))
        if len({m for m, _ in entries}) != len(entries):
            self.fail(pointer, "duplicate measure indices in measure_dynamics")
            return ()
        return tuple(sorted(entries))

    def soften(self, obj: Any, pointer: str) -> tuple[int, ...]:
        if obj is None:
            return ()
        if not isinstance(obj, list):
            self.fail(pointer, "soften must be a list of measure indices")
            return ()
        measures = []
        for j, value in enumerate(obj):
            if not _is_index(value):
                self.fail(f"{pointer}/{j}", f"soften entry must be a non-negative measure index, got {json.dumps(value)}")
                continue
            measures.append(value)
        return tuple(measures)

    def envelope(self, obj: Any, pointer: str) -> tuple[tuple[float, float], ...]:
        if obj is None:
            return ()
        if not isinstance(obj, list):
            self.fail(pointer, "volume_envelope must be a list of [time, gain_db] pairs")
            return ()
        points = []
        for j, pair in enumerate(obj):
            if (not isinstance(pair, list) or len(pair) != 2
                    or not _is_number(pair[0]) or not _is_number(pair[1])):
                self.fail(f"{pointer}/{j}", f"envelope breakpoint must be a [time, gain_db] pair, got {json.dumps(pair)}")
                continue
            points.append((float(pair[0]), float(pair[1])))
        for j, ((t0, _), (t1, _)) in enumerate(zip(points, points[1:])):
            if t1 <= t0:
                self.fail(f"{pointer}/{j + 1}", f"envelope times must be strictly increasing ({t0:g} then {t1:g})")
                return ()
        if points and points[0][0] < 0:
            self.fail(f"{pointer}/0", "envelope times must be non-negative")
            return ()
        return tuple(points)

    def track(self, obj: Any, index: int) -> TrackPlan | None:
        pointer = f"/tracks/{index}"
        if not isinstance(obj, dict):
            self.fail(pointer, "each track plan must be an object")
            return None
        for key in sorted(set(obj) - _TRACK_KEYS):
            self.warn(f"{pointer}/{key}", f"unknown track field {key!r} ignored")

        duplicate = bool(obj.get("duplicate", False))
        if "duplicate_of" in obj:
            if "source_track" in obj:
                self.fail(f"{pointer}/duplicate_of", "give either source_track or duplicate_of, not both")
                return None
            source, duplicate = obj["duplicate_of"], True
            source_pointer = f"{pointer}/duplicate_of"
        elif "source_track" in obj:
            source = obj["source_track"]
            source_pointer = f"{pointer}/source_track"
        else:
            self.fail(pointer, "track plan is missing source_track")
            return None
        if not _is_index(source):
            self.fail(source_pointer, f"track reference must be a non-negative integer, got {json.dumps(source)}")
            return None

        instrument = obj.get("instrument")
        if not isinstance(instrument, str) or not instrument:
            self.fail(f"{pointer}/instrument", "track plan needs an instrument name")
            return None
        if instrument not in self.registry:
            self.fail(f"{pointer}/instrument",
                      f"unknown instrument {instrument!r}: not in the instrument registry "
                      f"({len(self.registry)} instruments)")
            return None

        if not isinstance(obj.get("duplicate", False), bool):
            self.fail(f"{pointer}/duplicate", "duplicate must be a boolean")
            return None

        before = len(self.sink)
        plan_kw = dict(
            source_track=source,
            instrument=instrument,
            duplicate=duplicate,
            measure_dynamics=self.dynamics(obj.get("measure_dynamics"), f"{pointer}/measure_dynamics"),
            soften=self.soften(obj.get("soften"), f"{pointer}/soften"),
            volume_envelope=self.envelope(obj.get("volume_envelope"), f"{pointer}/volume_envelope"),
            pan=self.number(obj, "pan", pointer, 0.0, -1.0, 1.0),
            reverb_send=self.number(obj, "reverb_send", pointer, 0.0, 0.0, 1.0),
        )
        if has_errors(self.sink[before:]):
            return None
        try:
            return TrackPlan(**plan_kw)
        except SchemeError as exc:
            self.fail(pointer, str(exc))
            return None


def parse_scheme(
    text: str | bytes,
    *,
    registry: Mapping[str, Instrument] | None = None,
    diagnostics: list[Diagnostic] | None = None,
) -> ArrangementScheme:
    """Parse canonical scheme JSON, raising SchemeParseError on any error.

    Warnings (and, on failure, errors) are appended to ``diagnostics``
    when a list is supplied; every diagnostic carries a JSON-pointer
    path to the value it concerns.
    """
    sink: list[Diagnostic] = []
    if registry is None:
        registry = load_instruments()

    def finish(result: ArrangementScheme | None) -> ArrangementScheme:
        if diagnostics is not None:
            diagnostics.extend(sink)
        if result is None or has_errors(sink):
            raise SchemeParseError(sink)
        return result

    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            sink.append(error(f"scheme text is not valid UTF-8: {exc}"))
            return finish(None)
    try:
        root = json.loads(text)
    except json.JSONDecodeError as exc:
        sink.append(error(f"invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno))
        return finish(None)

    if not isinstance(root, dict):
        sink.append(error("scheme root must be a JSON object", pointer=""))
        return finish(None)

    walker = _Walker(sink, registry)
    version = root.get("version")
    if version is None:
        walker.fail("/version", "scheme is missing the mandatory version field")
    elif version != SCHEME_VERSION:
        walker.fail("/version", f"unsupported scheme version {json.dumps(version)} (expected {SCHEME_VERSION})")

    for key in sorted(set(root) - {"version", "global", "tracks"}):
        walker.warn(f"/{key}", f"unknown top-level field {key!r} ignored")

    global_mix = walker.global_mix(root.get("global"))

    tracks_obj = root.get("tracks")
    if not isinstance(tracks_obj, list) or not tracks_obj:
        walker.fail("/tracks", "scheme needs a non-empty tracks list")
        return finish(None)
    plans = [walker.track(item, i) for i, item in enumerate(tracks_obj)]
    if has_errors(sink):
        return finish(None)
    return finish(ArrangementScheme(tracks=tuple(plans), global_mix=global_mix))


def serialize_scheme(scheme: ArrangementScheme) -> str:
    """Render a scheme as canonical JSON (sorted keys, trailing newline)."""
    payload = {
        "version": SCHEME_VERSION,
        "global": {
            "reverb_level": scheme.global_mix.reverb_level,
            "master_gain": scheme.global_mix.master_gain,
        },
        "tracks": [
            {
                "source_track": plan.source_track,
                "duplicate": plan.duplicate,
                "instrument": plan.instrument,
                "measure_dynamics": {str(m): level for m, level in plan.measure_dynamics},
                "soften": list(plan.soften),
                "volume_envelope": [[t, g] for t, g in plan.volume_envelope],
                "pan": plan.pan,
                "reverb_send": plan.reverb_send,
            }
            for plan in scheme.tracks
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def validate_scheme(
    scheme: ArrangementScheme,
    song: MidiSong,
    *,
    registry: Mapping[str, Instrument] | None = None,
) -> list[Diagnostic]:
    """Check a scheme against the song it arranges.

    Errors: references to tracks or measures the song does not have.
    Warnings: notes that fall outside the assigned instrument's pitch
    range (each reported with track, measure, and pitch — the renderer
    folds them back in by octaves).
    """
    if registry is None:
        registry = load_instruments()
    diags: list[Diagnostic] = []
    measure_count = song.measure_count()
    tpm = song.ticks_per_measure()

    for i, plan in enumerate(scheme.tracks):
        pointer = f"/tracks/{i}"
        if plan.source_track >= len(song.tracks):
            diags.append(error(
                f"track plan references song track {plan.source_track} "
                f"but the song has {len(song.tracks)} tracks",
                pointer=f"{pointer}/source_track"))
            continue
        for measure, _ in plan.measure_dynamics:
            if measure >= measure_count:
                diags.append(error(
                    f"dynamics reference measure {measure} but the song has {measure_count} measures",
                    pointer=f"{pointer}/measure_dynamics/{measure}"))
        for measure in plan.soften:
            if measure >= measure_count:
                diags.append(error(
                    f"soften references measure {measure} but the song has {measure_count} measures",
                    pointer=f"{pointer}/soften"))

        instrument = registry.get(plan.instrument)
        if instrument is None:
            diags.append(error(
                f"unknown instrument {plan.instrument!r}: not in the instrument registry",
                pointer=f"{pointer}/instrument"))
            continue
        for note in song.tracks[plan.source_track].notes:
            if not instrument.in_range(note.pitch):
                measure = song.seconds_to_tick(note.onset) // tpm
                diags.append(warning(
                    f"pitch {note.pitch} in measure {measure} of song track {plan.source_track} "
                    f"is outside the {instrument.name} range [{instrument.low}, {instrument.high}]",
                    pointer=f"{pointer}/instrument"))
    return diags


def write_scheme_file(scheme: ArrangementScheme, path: str | Path) -> Path:
    """Write canonical scheme JSON; the filename must end in .scheme.json."""
    path = Path(path)
    if not path.name.endswith(SCHEME_EXTENSION):
        raise SchemeError(f"scheme files use the {SCHEME_EXTENSION} extension, got {path.name!r}")
    path.write_text(serialize_scheme(scheme), "utf-8")
    return path


def read_scheme_file(path: str | Path, **kwargs) -> ArrangementScheme:
    return parse_scheme(Path(path).read_text("utf-8"), **kwargs)
