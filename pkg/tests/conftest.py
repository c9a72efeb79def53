"""Shared builders for randomized round-trip tests.

Random songs are built from integer ticks (or integer quantum counts)
so that serialization round trips can be checked with exact equality:
the builder derives onset seconds through the same tempo arithmetic
the parsers use.
"""

from __future__ import annotations

import random

from cinescore.notation import MidiNote, MidiSong, Track


def random_tick_song(
    rng: random.Random,
    max_tracks: int = 4,
    max_notes: int = 30,
    allow_tempo_changes: bool = True,
) -> MidiSong:
    """A song whose note times sit exactly on MIDI ticks.

    Same-pitch overlaps within a track are avoided: the byte format
    cannot express which note-off closes which note-on, so they do not
    round-trip structurally.
    """
    tpq = rng.choice((96, 240, 480, 960))
    tempo_map = [(0, rng.choice((400_000, 500_000, 600_000, 750_000)))]
    if allow_tempo_changes and rng.random() < 0.5:
        tick = 0
        for _ in range(rng.randrange(1, 4)):
            tick += rng.randrange(1, 8) * tpq
            tempo_map.append((tick, rng.randrange(250_000, 1_200_000)))
    probe = MidiSong(tracks=(Track(index=0),), ticks_per_quarter=tpq, tempo_map=tuple(tempo_map))

    tracks = []
    n_tracks = rng.randrange(1, max_tracks + 1)
    channels = [c for c in range(16) if c != 9]
    for ti in range(n_tracks):
        notes = []
        busy: dict[int, int] = {}
        tick = 0
        for _ in range(rng.randrange(0, max_notes + 1)):
            tick += rng.randrange(0, 2 * tpq)
            pitch = rng.randrange(12, 115)
            if busy.get(pitch, -1) >= tick:
                continue
            dur_ticks = rng.randrange(max(1, tpq // 8), 4 * tpq)
            busy[pitch] = tick + dur_ticks
            onset = probe.tick_to_seconds(tick)
            offset = probe.tick_to_seconds(tick + dur_ticks)
            notes.append(
                MidiNote(onset, offset - onset, pitch, rng.randrange(1, 128))
            )
        tracks.append(
            Track(
                index=ti,
                name=rng.choice(("", "lead", "pad", "perc-ish", "bass")),
                program=rng.randrange(128),
                channel=rng.choice(channels),
                notes=tuple(notes),
            )
        )
    return MidiSong(
        tracks=tuple(tracks),
        ticks_per_quarter=tpq,
        tempo_map=tuple(tempo_map),
        time_signature=rng.choice(((4, 4), (3, 4), (6, 8), (2, 2))),
    )


def random_quantized_song(
    rng: random.Random,
    quantum_sec: float,
    max_tracks: int = 3,
    max_events: int = 24,
    measure_quanta: int = 16,
    allow_chords: bool = True,
) -> MidiSong:
    """A song whose onsets/durations are integer multiples of one quantum.

    Voices are monophonic-with-chords (no partial overlap), which is the
    shape ABC can express losslessly.
    """
    tracks = []
    for ti in range(rng.randrange(1, max_tracks + 1)):
        notes = []
        cursor = 0
        for _ in range(rng.randrange(0, max_events + 1)):
            cursor += rng.randrange(0, 6)  # rest gap in quanta
            width = rng.randrange(1, 3) if allow_chords and rng.random() < 0.3 else 1
            pitches = rng.sample(range(24, 108), width)
            durs = [rng.randrange(1, 9) for _ in range(width)]
            for p, d in zip(pitches, durs):
                notes.append(
                    MidiNote(cursor * quantum_sec, d * quantum_sec, p, 90)
                )
            cursor += max(durs)
        tracks.append(Track(index=ti, notes=tuple(notes)))
    return MidiSong(tracks=tuple(tracks), time_signature=(4, 4))
