"""Lead-instrument selection and main-melody extraction ("spotting").

Coverage of a track is the length of the union of its note intervals
divided by the total duration; the union (not the sum) keeps the value
a true fraction when notes overlap.  Lead selection scores candidates
as 0.5*coverage + 0.3*note_ratio + 0.2*class_prior and adds tracks in
descending score order until the combined coverage reaches the
threshold.  The melody of the selected tracks is their skyline: at any
instant the highest sounding pitch wins.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .notation import MidiNote, MidiSong, Track

DEFAULT_COVERAGE_THRESHOLD = 0.6
DEFAULT_MERGE_WINDOW = 0.05

# Lead-likeliness prior per General MIDI program family (start program of
# each 8-wide bank).  Melodic lead families score 1.0, accompaniment
# keyboards/guitars 0.8, basses 0.3, pads and effects 0.4, percussive
# programs 0.1.
CLASS_PRIORS: dict[int, float] = {
    0: 0.8,    # piano
    8: 0.4,    # chromatic percussion
    16: 0.8,   # organ
    24: 0.8,   # guitar
    32: 0.3,   # bass
    40: 1.0,   # strings
    48: 1.0,   # ensemble / voice
    56: 1.0,   # brass
    64: 1.0,   # reed
    72: 1.0,   # pipe
    80: 1.0,   # synth lead
    88: 0.4,   # synth pad
    96: 0.4,   # synth effects
    104: 0.8,  # ethnic
    112: 0.1,  # percussive
    120: 0.1,  # sound effects
}


class MelodyError(ValueError):
    """Domain error for spotting operations."""


def class_prior(program: int, priors: dict[int, float] | None = None) -> float:
    table = CLASS_PRIORS if priors is None else priors
    return table.get((program // 8) * 8, 0.4)


@dataclass(frozen=True)
class CoverageReport:
    per_track_coverage: tuple[float, ...]
    per_track_note_ratio: tuple[float, ...]
    selected_tracks: tuple[int, ...]
    combined_coverage: float

    def __post_init__(self):
        if self.selected_tracks:
            best = max(self.per_track_coverage[i] for i in self.selected_tracks)
            if self.combined_coverage < best - 1e-9:
                raise MelodyError("combined coverage below a selected track's coverage")


@dataclass(frozen=True)
class MainMelody:
    notes: tuple[MidiNote, ...]
    source_tracks: tuple[int, ...]

    def __post_init__(self):
        for a, b in zip(self.notes, self.notes[1:]):
            if b.onset < a.onset:
                raise MelodyError("melody notes not sorted by onset")
            if b.onset < a.offset - 1e-9:
                raise MelodyError("melody notes overlap")


@dataclass(frozen=True)
class RhythmSpots:
    onsets: tuple[float, ...]
    clip_duration: float

    def __post_init__(self):
        if self.clip_duration < 0:
            raise MelodyError("negative clip duration")
        for t in self.onsets:
            if not 0 <= t <= self.clip_duration:
                raise MelodyError(f"onset {t} outside [0, {self.clip_duration}]")
        for a, b in zip(self.onsets, self.onsets[1:]):
            if b <= a:
                raise MelodyError("onsets not strictly increasing")

    def to_json(self) -> str:
        return json.dumps(
            {"clip_duration": self.clip_duration, "onsets": list(self.onsets)}
        )

    @classmethod
    def from_json(cls, text: str) -> "RhythmSpots":
        data = json.loads(text)
        return cls(
            onsets=tuple(float(t) for t in data["onsets"]),
            clip_duration=float(data["clip_duration"]),
        )


def _interval_union(intervals) -> float:
    """Total length of the union of [start, end) intervals."""
    spans = sorted((s, e) for s, e in intervals if e > s)
    total = 0.0
    cur_start = cur_end = None
    for s, e in spans:
        if cur_end is None or s > cur_end:
            if cur_end is not None:
                total += cur_end - cur_start
            cur_start, cur_end = s, e
        else:
            cur_end = max(cur_end, e)
    if cur_end is not None:
        total += cur_end - cur_start
    return total


def track_coverage(track: Track, total_duration: float) -> float:
    if total_duration <= 0:
        raise MelodyError("total_duration must be positive")
    covered = _interval_union((n.onset, n.offset) for n in track.notes)
    return min(1.0, covered / total_duration)


def note_ratio(song: MidiSong) -> list[float]:
    counts = [len(t.notes) for t in song.tracks]
    total = sum(counts)
    if total == 0:
        raise MelodyError("song has no notes")
    return [c / total for c in counts]


def combined_coverage(tracks, total_duration: float) -> float:
    """Union coverage across tracks via an event sweep.

    Walks the ascending sequence of note onsets/offsets and accumulates
    the gap to the next timestamp whenever at least one note is active.
    """
    if total_duration <= 0:
        raise MelodyError("total_duration must be positive")
    events = []  # (time, +1 | -1)
    for track in tracks:
        for n in track.notes:
            events.append((n.onset, 1))
            events.append((n.offset, -1))
    if not events:
        return 0.0
    events.sort()
    covered = 0.0
    active = 0
    for (t0, delta), (t1, _) in zip(events, events[1:]):
        active += delta
        if active > 0:
            covered += t1 - t0
    return min(1.0, covered / total_duration)


def select_lead(
    song: MidiSong,
    coverage_threshold: float = DEFAULT_COVERAGE_THRESHOLD,
    priors: dict[int, float] | None = None,
) -> CoverageReport:
    """Pick the lead track set per the scored greedy rule."""
    duration = song.duration
    if duration <= 0:
        raise MelodyError("song has no notes")
    coverages = tuple(track_coverage(t, duration) for t in song.tracks)
    ratios = tuple(note_ratio(song))
    candidates = [
        t.index
        for t in song.tracks
        if not t.is_percussion and t.notes
    ]
    if not candidates:
        raise MelodyError("no eligible (non-percussion, non-empty) tracks")

    def score(i: int) -> float:
        program = song.tracks[i].program
        return (
            0.5 * coverages[i]
            + 0.3 * ratios[i]
            + 0.2 * class_prior(program, priors)
        )

    ranked = sorted(candidates, key=lambda i: (-score(i), i))
    selected: list[int] = []
    combined = 0.0
    for i in ranked:
        selected.append(i)
        combined = combined_coverage([song.tracks[j] for j in selected], duration)
        if combined >= coverage_threshold:
            break
    return CoverageReport(
        per_track_coverage=coverages,
        per_track_note_ratio=ratios,
        selected_tracks=tuple(selected),
        combined_coverage=combined,
    )


def extract_main_melody(song: MidiSong, report: CoverageReport) -> MainMelody:
    """Skyline reduction: highest pitch wins at every instant.

    A note interrupted by a higher one resumes as a fresh segment when
    the interrupter ends, so the output pitch-vs-time function equals
    the pointwise maximum over all selected notes.
    """
    if not report.selected_tracks:
        raise MelodyError("no tracks selected")
    notes = []
    for i in report.selected_tracks:
        notes.extend(song.tracks[i].notes)
    if not notes:
        return MainMelody(notes=(), source_tracks=tuple(report.selected_tracks))

    boundaries = sorted({t for n in notes for t in (n.onset, n.offset)})
    # winner per elementary interval; earlier onset breaks pitch ties
    notes.sort(key=lambda n: (n.onset, -n.pitch))
    segments: list[list] = []  # [start, end, winner-note]
    for t0, t1 in zip(boundaries, boundaries[1:]):
        sounding = [n for n in notes if n.onset <= t0 and n.offset >= t1]
        if not sounding:
            continue
        winner = max(sounding, key=lambda n: (n.pitch, -n.onset))
        if segments and segments[-1][2] is winner and abs(segments[-1][1] - t0) < 1e-12:
            segments[-1][1] = t1
        else:
            segments.append([t0, t1, winner])
    out = tuple(
        MidiNote(onset=s, duration=e - s, pitch=w.pitch, velocity=w.velocity)
        for s, e, w in segments
        if e - s > 1e-12
    )
    return MainMelody(notes=out, source_tracks=tuple(report.selected_tracks))


def flatten_to_rhythm(
    melody: MainMelody,
    clip_duration: float,
    merge_window: float = DEFAULT_MERGE_WINDOW,
) -> RhythmSpots:
    """Note onsets thinned so consecutive spots sit >= merge_window apart."""
    if merge_window < 0:
        raise MelodyError("merge_window must be non-negative")
    kept: list[float] = []
    for n in melody.notes:
        t = n.onset
        if t > clip_duration:
            continue
        if not kept or t - kept[-1] >= merge_window:
            if kept and t == kept[-1]:
                continue
            kept.append(t)
    return RhythmSpots(onsets=tuple(kept), clip_duration=clip_duration)
