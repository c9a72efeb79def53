"""Symbolic music: MIDI binary parsing/writing and ABC notation conversion."""

from .types import MidiNote, Track, MidiSong, AbcScore, NotationError
from .midi_io import MidiParseError, MidiWriteError, parse_midi, write_midi
from .abc_io import AbcParseError, Quantum, midi_to_abc, abc_to_midi, parse_abc_score, validate_abc

__all__ = [
    "MidiNote",
    "Track",
    "MidiSong",
    "AbcScore",
    "NotationError",
    "MidiParseError",
    "MidiWriteError",
    "parse_midi",
    "write_midi",
    "AbcParseError",
    "Quantum",
    "midi_to_abc",
    "abc_to_midi",
    "parse_abc_score",
    "validate_abc",
]
