"""Core symbolic-music value types.

All types are immutable after construction and validate their
invariants eagerly, so a MidiSong in hand is always well-formed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

PERCUSSION_CHANNEL = 9
DEFAULT_TICKS_PER_QUARTER = 480
DEFAULT_TEMPO_USPQ = 500_000  # 120 BPM


class NotationError(ValueError):
    """Invariant violation in a symbolic-music value."""


@dataclass(frozen=True, order=True)
class MidiNote:
    """One note: onset/duration in seconds, MIDI pitch and velocity."""

    onset: float
    duration: float
    pitch: int
    velocity: int

    def __post_init__(self):
        if self.onset < 0:
            raise NotationError(f"note onset {self.onset} < 0")
        if self.duration <= 0:
            raise NotationError(f"note duration {self.duration} <= 0")
        if not 0 <= self.pitch <= 127:
            raise NotationError(f"pitch {self.pitch} outside 0..127")
        if not 1 <= self.velocity <= 127:
            raise NotationError(f"velocity {self.velocity} outside 1..127")

    @property
    def offset(self) -> float:
        return self.onset + self.duration


@dataclass(frozen=True)
class Track:
    """One instrument track.  Channel 9 marks percussion."""

    index: int
    name: str = ""
    program: int = 0
    channel: int = 0
    notes: tuple[MidiNote, ...] = ()

    def __post_init__(self):
        if not 0 <= self.program <= 127:
            raise NotationError(f"program {self.program} outside 0..127")
        if not 0 <= self.channel <= 15:
            raise NotationError(f"channel {self.channel} outside 0..15")
        notes = tuple(sorted(self.notes, key=lambda n: (n.onset, n.pitch)))
        object.__setattr__(self, "notes", notes)

    @property
    def is_percussion(self) -> bool:
        return self.channel == PERCUSSION_CHANNEL

    def end_time(self) -> float:
        return max((n.offset for n in self.notes), default=0.0)


@dataclass(frozen=True)
class MidiSong:
    """Multi-track song with tempo map and a single global time signature.

    tempo_map entries are (tick, microseconds per quarter note), sorted
    by tick; duration is derived as the latest note offset.
    """

    tracks: tuple[Track, ...]
    ticks_per_quarter: int = DEFAULT_TICKS_PER_QUARTER
    tempo_map: tuple[tuple[int, int], ...] = ((0, DEFAULT_TEMPO_USPQ),)
    time_signature: tuple[int, int] = (4, 4)

    def __post_init__(self):
        if not self.tracks:
            raise NotationError("song must have at least one track")
        if self.ticks_per_quarter <= 0:
            raise NotationError("ticks_per_quarter must be positive")
        tm = tuple(sorted((int(t), int(u)) for t, u in self.tempo_map))
        if not tm:
            tm = ((0, DEFAULT_TEMPO_USPQ),)
        if tm[0][0] != 0:
            tm = ((0, DEFAULT_TEMPO_USPQ),) + tm
        object.__setattr__(self, "tempo_map", tm)
        object.__setattr__(self, "tracks", tuple(self.tracks))
        num, den = self.time_signature
        if num <= 0 or den <= 0:
            raise NotationError(f"bad time signature {self.time_signature}")

    @property
    def duration(self) -> float:
        return max((t.end_time() for t in self.tracks), default=0.0)

    def total_notes(self) -> int:
        return sum(len(t.notes) for t in self.tracks)

    # -- tick/seconds conversion against the tempo map ------------------

    def _tempo_segments(self):
        """Yield (start_tick, start_seconds, seconds_per_tick) segments."""
        segs = []
        sec = 0.0
        for i, (tick, uspq) in enumerate(self.tempo_map):
            if i > 0:
                prev_tick, prev_uspq = self.tempo_map[i - 1]
                sec += (tick - prev_tick) * prev_uspq / 1e6 / self.ticks_per_quarter
            segs.append((tick, sec, uspq / 1e6 / self.ticks_per_quarter))
        return segs

    def tick_to_seconds(self, tick: int) -> float:
        segs = self._tempo_segments()
        for start_tick, start_sec, spt in reversed(segs):
            if tick >= start_tick:
                return start_sec + (tick - start_tick) * spt
        return tick * segs[0][2]

    def seconds_to_tick(self, seconds: float) -> int:
        """Nearest tick for a time in seconds (inverse of tick_to_seconds)."""
        segs = self._tempo_segments()
        chosen = segs[0]
        for seg in segs:
            if seconds >= seg[1] - 1e-12:
                chosen = seg
        start_tick, start_sec, spt = chosen
        return start_tick + round((seconds - start_sec) / spt)

    def seconds_per_measure_at(self, tick: int = 0) -> float:
        num, den = self.time_signature
        quarters = num * 4.0 / den
        uspq = self.tempo_map[0][1]
        for t, u in self.tempo_map:
            if t <= tick:
                uspq = u
        return quarters * uspq / 1e6

    def ticks_per_measure(self) -> int:
        num, den = self.time_signature
        return int(round(self.ticks_per_quarter * num * 4 / den))

    def measure_count(self) -> int:
        """Number of measures needed to contain the song."""
        end_tick = 0
        for tr in self.tracks:
            for n in tr.notes:
                end_tick = max(end_tick, self.seconds_to_tick(n.offset))
        tpm = self.ticks_per_measure()
        if end_tick == 0:
            return 1
        return -(-end_tick // tpm)

    def measure_boundaries_seconds(self, count: int | None = None) -> list[float]:
        """Start times (seconds) of measures 0..count, inclusive of the end."""
        if count is None:
            count = self.measure_count()
        tpm = self.ticks_per_measure()
        return [self.tick_to_seconds(k * tpm) for k in range(count + 1)]


@dataclass(frozen=True)
class AbcScore:
    """ABC notation text plus its parsed header fields.

    The text is the single source of truth; headers are a convenience
    view filled by the parser.
    """

    text: str
    headers: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        try:
            self.text.encode("ascii")
        except UnicodeEncodeError as exc:
            raise NotationError(f"ABC text is not pure ASCII: {exc}") from exc

    def header(self, key: str, default: str | None = None) -> str | None:
        return self.headers.get(key, default)
