"""MIDI <-> ABC notation conversion and ABC validation.

Supported ABC subset (v2.1): headers X T M L Q K V, notes with
accidentals and octave marks, rests, chords with per-note lengths,
bar lines, and ties.  See docs/abc-grammar.md for the exact grammar.

Semantics chosen for lossless round trips:
- bar lines carry no timing; they reset measure accidental state only
- a chord occupies the longest of its members' lengths
- ties merge consecutive equal-pitch notes into one
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..diagnostics import Diagnostic, DiagnosticSink, error, has_errors, warning
from .types import (
    DEFAULT_TICKS_PER_QUARTER,
    AbcScore,
    MidiNote,
    MidiSong,
    NotationError,
    Track,
)

Quantum = Fraction

ALLOWED_QUANTA = (Fraction(1, 4), Fraction(1, 8), Fraction(1, 16), Fraction(1, 32))
DEFAULT_QUANTUM = Fraction(1, 16)

_NATURAL_PC = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
_SHARP_ORDER = "FCGDAEB"
_FLAT_ORDER = "BEADGCF"

# major keys by signature: negative = flats
_KEY_FIFTHS = {
    "C": 0, "G": 1, "D": 2, "A": 3, "E": 4, "B": 5, "F#": 6, "C#": 7,
    "F": -1, "BB": -2, "EB": -3, "AB": -4, "DB": -5, "GB": -6, "CB": -7,
}
_MINOR_SHIFT = -3  # A minor shares C major's signature


class AbcParseError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics if d.severity == "error"))
        self.diagnostics = diagnostics


def _key_signature(key: str) -> dict[str, int] | None:
    """Accidental per letter for a key name like C, Gm, Bb, F#min."""
    k = key.strip().replace(" ", "")
    if not k:
        return None
    minor = False
    for suffix in ("MIN", "MINOR", "M"):
        if k.upper().endswith(suffix) and len(k) > len(suffix):
            # bare trailing m means minor; "maj" handled below
            if suffix == "M" and k.upper().endswith(("MAJ", "MAJOR")):
                break
            minor = True
            k = k[: -len(suffix)]
            break
    for suffix in ("MAJ", "MAJOR"):
        if k.upper().endswith(suffix) and len(k) > len(suffix):
            k = k[: -len(suffix)]
    name = k.upper()
    if name not in _KEY_FIFTHS:
        return None
    fifths = _KEY_FIFTHS[name] + (_MINOR_SHIFT if minor else 0)
    sig = {letter: 0 for letter in _NATURAL_PC}
    if fifths > 0:
        for letter in _SHARP_ORDER[:fifths]:
            sig[letter] = 1
    elif fifths < 0:
        for letter in _FLAT_ORDER[:-fifths]:
            sig[letter] = -1
    return sig


def _prefer_flats(key: str) -> bool:
    sig = _key_signature(key)
    if sig is None:
        return False
    return sum(sig.values()) < 0


def _pc_spelling(sig: dict[str, int], prefer_flats: bool) -> dict[int, tuple[str, int]]:
    """Map pitch class -> (letter, alteration) for a key signature."""
    table: dict[int, tuple[str, int]] = {}
    for letter, n in _NATURAL_PC.items():
        table.setdefault((n + sig[letter]) % 12, (letter, sig[letter]))
    for letter, n in _NATURAL_PC.items():
        table.setdefault(n, (letter, 0))
    for pc in range(12):
        if pc in table:
            continue
        delta = -1 if prefer_flats else 1
        for letter, n in _NATURAL_PC.items():
            if (n + delta) % 12 == pc:
                table[pc] = (letter, delta)
                break
    return table


def _note_token(midi: int, units: int, spelling, state, sig, tie: bool) -> str:
    """Render one note, updating the measure accidental state."""
    letter, acc = spelling[midi % 12]
    octave = (midi - acc - _NATURAL_PC[letter]) // 12 - 1
    current = state.get((letter, octave), sig[letter])
    if acc == current:
        acc_text = ""
    else:
        acc_text = {1: "^", -1: "_", 0: "=", 2: "^^", -2: "__"}[acc]
        state[(letter, octave)] = acc
    if octave >= 5:
        body = letter.lower() + "'" * (octave - 5)
    else:
        body = letter + "," * (4 - octave)
    length = "" if units == 1 else str(units)
    return acc_text + body + length + ("-" if tie else "")


@dataclass
class _QNote:
    onset: int  # quantum units
    duration: int
    pitch: int


def midi_to_abc(
    song: MidiSong,
    quantum: Fraction | float = DEFAULT_QUANTUM,
    key: str = "C",
    diagnostics: list[Diagnostic] | None = None,
) -> AbcScore:
    """Convert a song to ABC text, one voice per track.

    Durations quantize to the nearest multiple of `quantum` (a fraction
    of a whole note), minimum one quantum.  Tempo changes beyond the
    first are flattened to the initial tempo with a warning.
    """
    quantum = Fraction(quantum).limit_denominator(64)
    if quantum not in ALLOWED_QUANTA:
        raise NotationError(f"quantum {quantum} not one of {ALLOWED_QUANTA}")
    if not song.tracks:
        raise NotationError("song has no tracks")
    sink = diagnostics if diagnostics is not None else []
    sig = _key_signature(key)
    if sig is None:
        sink.append(warning(f"unknown key {key!r}; spelling as C major"))
        key, sig = "C", _key_signature("C")
    spelling = _pc_spelling(sig, _prefer_flats(key))

    uspq = song.tempo_map[0][1]
    if len(song.tempo_map) > 1:
        sink.append(warning("tempo changes flattened to the initial tempo"))
    quarter_sec = uspq / 1e6
    quantum_sec = float(quantum * 4) * quarter_sec
    qpm = 6e7 / uspq
    qpm_text = str(int(round(qpm))) if abs(qpm - round(qpm)) < 1e-9 else f"{qpm:.3f}"

    num, den = song.time_signature
    measure_units_f = Fraction(num, den) / quantum
    measure_units = int(measure_units_f) if measure_units_f.denominator == 1 else 0

    lines = [
        "X:1",
        f"M:{num}/{den}",
        f"L:{quantum.numerator}/{quantum.denominator}",
        f"Q:1/4={qpm_text}",
        f"K:{key}",
    ]

    for track in song.tracks:
        voice_id = track.index + 1
        name = f' name="{track.name}"' if track.name else ""
        lines.append(f"V:{voice_id}{name}")
        qnotes = []
        for n in track.notes:
            on = int(round(n.onset / quantum_sec))
            dur = max(1, int(round(n.duration / quantum_sec)))
            qnotes.append(_QNote(on, dur, n.pitch))
        qnotes.sort(key=lambda q: (q.onset, q.pitch))

        # later onsets truncate anything still sounding
        groups: list[list[_QNote]] = []
        for q in qnotes:
            if groups and groups[-1][0].onset == q.onset:
                groups[-1].append(q)
            else:
                groups.append([q])
        for gi, group in enumerate(groups):
            nxt = groups[gi + 1][0].onset if gi + 1 < len(groups) else None
            for q in group:
                if nxt is not None and q.onset + q.duration > nxt:
                    sink.append(
                        warning(
                            f"voice {voice_id}: note pitch {q.pitch} truncated at a "
                            f"later onset (overlap not representable)"
                        )
                    )
                    q.duration = nxt - q.onset
        groups = [[q for q in g if q.duration > 0] for g in groups]
        groups = [g for g in groups if g]

        body: list[str] = []
        state: dict[tuple[str, int], int] = {}
        cursor = 0
        next_bar = measure_units if measure_units else None
        measures_done = 0

        def emit_bar():
            nonlocal next_bar, measures_done
            body.append("|")
            state.clear()
            next_bar += measure_units
            measures_done += 1
            if measures_done % 4 == 0:
                body.append("\n")

        def emit_rest(units: int):
            nonlocal cursor
            while units > 0:
                span = units
                if next_bar is not None and cursor + span > next_bar:
                    span = next_bar - cursor
                if span > 0:
                    body.append("z" if span == 1 else f"z{span}")
                    cursor += span
                    units -= span
                if next_bar is not None and cursor == next_bar:
                    emit_bar()

        for group in groups:
            if group[0].onset > cursor:
                emit_rest(group[0].onset - cursor)
            if len(group) == 1:
                q = group[0]
                remaining = q.duration
                while remaining > 0:
                    span = remaining
                    if next_bar is not None and cursor + span > next_bar:
                        span = next_bar - cursor
                    tie = span < remaining
                    body.append(_note_token(q.pitch, span, spelling, state, sig, tie))
                    cursor += span
                    remaining -= span
                    if next_bar is not None and cursor == next_bar:
                        emit_bar()
            else:
                parts = "".join(
                    _note_token(q.pitch, q.duration, spelling, state, sig, False)
                    for q in group
                )
                body.append(f"[{parts}]")
                cursor += max(q.duration for q in group)
                while next_bar is not None and next_bar <= cursor:
                    if next_bar == cursor:
                        emit_bar()
                    else:  # chord spanned the bar line; drop it silently
                        next_bar += measure_units
                        measures_done += 1

        if body:
            text_body = " ".join(body).replace(" \n ", "\n").rstrip("\n").rstrip()
            if text_body.endswith("|"):
                text_body += "]"
            else:
                text_body += " |]"
            lines.append(text_body)
    text = "\n".join(lines) + "\n"
    headers = {
        "X": "1",
        "M": f"{num}/{den}",
        "L": f"{quantum.numerator}/{quantum.denominator}",
        "Q": f"1/4={qpm_text}",
        "K": key,
    }
    return AbcScore(text=text, headers=headers)


# --------------------------------------------------------------------------
# parsing


@dataclass
class _ParsedNote:
    onset: Fraction  # in whole notes
    duration: Fraction
    pitch: int
    tie: bool


class _VoiceState:
    def __init__(self, voice_id: str):
        self.voice_id = voice_id
        self.name = ""
        self.cursor = Fraction(0)
        self.notes: list[_ParsedNote] = []
        self.accidentals: dict[tuple[str, int], int] = {}


def _parse_length(text: str, i: int) -> tuple[Fraction, int]:
    """Parse an ABC length multiplier starting at i; returns (value, next_i)."""
    num = 0
    digits = False
    while i < len(text) and text[i].isdigit():
        num = num * 10 + int(text[i])
        digits = True
        i += 1
    value = Fraction(num if digits else 1)
    while i < len(text) and text[i] == "/":
        i += 1
        den = 0
        dd = False
        while i < len(text) and text[i].isdigit():
            den = den * 10 + int(text[i])
            dd = True
            i += 1
        value /= den if dd else 2
    return value, i


def _parse_meter(value: str) -> tuple[int, int] | None:
    v = value.strip()
    if v == "C":
        return (4, 4)
    if v == "C|":
        return (2, 2)
    if "/" in v:
        a, _, b = v.partition("/")
        try:
            num, den = int(a), int(b)
        except ValueError:
            return None
        if num > 0 and den > 0:
            return (num, den)
    return None


def _parse_tempo(value: str) -> float | None:
    """Quarter-notes-per-minute from a Q: field."""
    v = value.strip().strip('"')
    if "=" in v:
        unit, _, rate = v.partition("=")
        try:
            frac = Fraction(unit.strip())
            bpm = float(rate.strip())
        except (ValueError, ZeroDivisionError):
            return None
        if bpm <= 0 or frac <= 0:
            return None
        return bpm * float(frac) * 4.0
    try:
        bpm = float(v)
    except ValueError:
        return None
    return bpm if bpm > 0 else None


_REQUIRED_HEADERS = ("X", "M", "L", "K")
_KNOWN_HEADERS = set("XTMLQKV")


def _parse_abc(text: str, sink: DiagnosticSink):
    """Shared parser behind validate_abc and abc_to_midi.

    Returns (headers, voices) where voices maps voice id -> _VoiceState.
    """
    for offset, byte in enumerate(text.encode("utf-8", errors="surrogateescape")):
        if byte > 127:
            sink.add(error(f"non-ASCII byte 0x{byte:02x} at byte offset {offset}"))
            return {}, {}

    headers: dict[str, str] = {}
    voices: dict[str, _VoiceState] = {}
    order: list[str] = []
    current: _VoiceState | None = None
    sig = {letter: 0 for letter in _NATURAL_PC}
    unit = Fraction(1, 8)
    in_body = False

    def voice(vid: str) -> _VoiceState:
        if vid not in voices:
            voices[vid] = _VoiceState(vid)
            order.append(vid)
        return voices[vid]

    lines = text.split("\n")
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("%", 1)[0].rstrip()
        if not line.strip():
            continue
        if len(line) >= 2 and line[1] == ":" and line[0].isalpha():
            field, value = line[0], line[2:].strip()
            if field == "w":
                sink.add(warning("lyrics line ignored", line=lineno, column=1))
                continue
            if field == "V":
                vid = value.split()[0] if value.split() else value
                current = voice(vid)
                if 'name="' in value:
                    current.name = value.split('name="', 1)[1].split('"', 1)[0]
                in_body = in_body or "K" in headers
                continue
            if field not in _KNOWN_HEADERS:
                sink.add(warning(f"unknown header {field}:", line=lineno, column=1))
                continue
            headers.setdefault(field, value)
            if field == "L":
                try:
                    unit = Fraction(value)
                except (ValueError, ZeroDivisionError):
                    sink.add(error(f"bad unit length {value!r}", line=lineno, column=3))
            elif field == "M" and _parse_meter(value) is None:
                sink.add(error(f"bad meter {value!r}", line=lineno, column=3))
            elif field == "Q" and _parse_tempo(value) is None:
                sink.add(error(f"bad tempo {value!r}", line=lineno, column=3))
            elif field == "K":
                ks = _key_signature(value)
                if ks is None:
                    sink.add(error(f"unknown key {value!r}", line=lineno, column=3))
                else:
                    sig = ks
                in_body = True
            continue
        if not in_body:
            sink.add(error("music line before K: header", line=lineno, column=1))
            continue
        if current is None:
            current = voice("1")
        _parse_music_line(line, lineno, current, sig, unit, sink)

    for field in _REQUIRED_HEADERS:
        if field not in headers:
            sink.add(error(f"missing required header {field}:"))
    return headers, {vid: voices[vid] for vid in order}


def _parse_music_line(line, lineno, state: _VoiceState, sig, unit, sink: DiagnosticSink):
    i = 0
    n = len(line)

    def parse_one_note(i: int, chord: bool):
        """Parse accidental+letter+octave+length at i; returns (_ParsedNote, i)."""
        col = i + 1
        acc: int | None = None
        if line[i] in "^_=":
            if line.startswith("^^", i):
                acc, i = 2, i + 2
            elif line.startswith("__", i):
                acc, i = -2, i + 2
            else:
                acc = {"^": 1, "_": -1, "=": 0}[line[i]]
                i += 1
        if i >= n or line[i] not in "ABCDEFGabcdefg":
            sink.add(error("accidental not followed by a note letter", line=lineno, column=col))
            return None, i
        letter = line[i]
        octave = 5 if letter.islower() else 4
        letter = letter.upper()
        i += 1
        while i < n and line[i] in ",'":
            octave += 1 if line[i] == "'" else -1
            i += 1
        length, i = _parse_length(line, i)
        tie = False
        if i < n and line[i] == "-" and not chord:
            tie = True
            i += 1
        key = (letter, octave)
        if acc is None:
            acc = state.accidentals.get(key, sig[letter])
        else:
            state.accidentals[key] = acc
        pitch = 12 * (octave + 1) + _NATURAL_PC[letter] + acc
        if not 0 <= pitch <= 127:
            sink.add(error(f"pitch out of MIDI range: {pitch}", line=lineno, column=col))
            return None, i
        return _ParsedNote(state.cursor, length * unit, pitch, tie), i

    def close_ties(new_notes: list[_ParsedNote]):
        """Merge notes tied from earlier into the incoming group."""
        for incoming in new_notes:
            for prev in reversed(state.notes):
                if (
                    prev.tie
                    and prev.pitch == incoming.pitch
                    and abs(prev.onset + prev.duration - incoming.onset) < Fraction(1, 10_000)
                ):
                    prev.duration += incoming.duration
                    prev.tie = incoming.tie
                    break
            else:
                state.notes.append(incoming)

    while i < n:
        c = line[i]
        if c in " \t":
            i += 1
        elif c == "|" or c == ":":
            while i < n and line[i] in "|:][1234567890":
                # bar lines incl. repeats/endings: |, ||, |], [|, :|, |:, |1
                if line[i] == "[" and i + 1 < n and line[i + 1] not in "|]1234567890":
                    break
                i += 1
            state.accidentals.clear()
        elif c in "zxZ":
            i += 1
            length, i = _parse_length(line, i)
            state.cursor += length * unit
        elif c == "[":
            if i + 1 < n and line[i + 1] == "|":
                i += 2
                state.accidentals.clear()
                continue
            i += 1
            members: list[_ParsedNote] = []
            while i < n and line[i] != "]":
                if line[i] in " \t":
                    i += 1
                    continue
                note, i2 = parse_one_note(i, chord=True)
                if note is None:
                    i = i2 + 1 if i2 == i else i2
                    if i >= n:
                        break
                    continue
                members.append(note)
                i = i2
            if i >= n:
                sink.add(error("unterminated chord", line=lineno, column=n))
            else:
                i += 1  # closing ]
            mult, i = _parse_length(line, i)
            tie = False
            if i < n and line[i] == "-":
                tie = True
                i += 1
            if members:
                for m in members:
                    m.duration *= mult
                    m.tie = tie
                span = max(m.duration for m in members)
                close_ties(members)
                state.cursor += span
        elif c in "^_=ABCDEFGabcdefg":
            note, i = parse_one_note(i, chord=False)
            if note is not None:
                close_ties([note])
                state.cursor += note.duration
        else:
            sink.add(error(f"unexpected character {c!r}", line=lineno, column=i + 1))
            i += 1


def validate_abc(text: str | bytes) -> list[Diagnostic]:
    """Diagnose ABC text; empty result means it parses cleanly."""
    if isinstance(text, bytes):
        for offset, byte in enumerate(text):
            if byte > 127:
                return [error(f"non-ASCII byte 0x{byte:02x} at byte offset {offset}")]
        text = text.decode("ascii")
    sink = DiagnosticSink()
    _parse_abc(text, sink)
    return sink.items


def parse_abc_score(text: str, diagnostics: list[Diagnostic] | None = None) -> AbcScore:
    """Build an AbcScore from raw text, filling the parsed header view.

    Raises AbcParseError on any error diagnostic, so a returned score is
    always playable.
    """
    sink = DiagnosticSink()
    headers, _ = _parse_abc(text, sink)
    if diagnostics is not None:
        diagnostics.extend(sink.items)
    if has_errors(sink.items):
        raise AbcParseError(sink.items)
    return AbcScore(text=text, headers=headers)


def abc_to_midi(score: AbcScore, diagnostics: list[Diagnostic] | None = None) -> MidiSong:
    """Parse ABC into a MidiSong; raises AbcParseError on any error diagnostic."""
    sink = DiagnosticSink()
    headers, voices = _parse_abc(score.text, sink)
    if diagnostics is not None:
        diagnostics.extend(sink.items)
    if has_errors(sink.items):
        raise AbcParseError(sink.items)

    qpm = _parse_tempo(headers.get("Q", "1/4=120")) or 120.0
    quarter_sec = 60.0 / qpm
    meter = _parse_meter(headers.get("M", "4/4")) or (4, 4)
    uspq = int(round(quarter_sec * 1e6))

    tracks = []
    index = 0
    for vid, vstate in voices.items():
        channel = index % 15
        if channel >= 9:  # skip the percussion channel
            channel += 1
        notes = tuple(
            MidiNote(
                onset=float(p.onset * 4) * quarter_sec,
                duration=float(p.duration * 4) * quarter_sec,
                pitch=p.pitch,
                velocity=90,
            )
            for p in vstate.notes
            if p.duration > 0
        )
        tracks.append(
            Track(index=index, name=vstate.name, program=0, channel=channel, notes=notes)
        )
        index += 1
    if not tracks:
        tracks = [Track(index=0)]
    return MidiSong(
        tracks=tuple(tracks),
        ticks_per_quarter=DEFAULT_TICKS_PER_QUARTER,
        tempo_map=((0, uspq),),
        time_signature=meter,
    )
