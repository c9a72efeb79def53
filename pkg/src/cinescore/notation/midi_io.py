"""Standard MIDI File reader and writer.

Reads format 0 and 1, writes format 1.  The reader is defensive: any
byte sequence either yields a MidiSong or raises MidiParseError with
the offending byte offset, never an unstructured exception.  SysEx
payloads are skipped opaquely; lyrics and other text metas besides the
track name are ignored.
"""

from __future__ import annotations

import struct

from ..diagnostics import Diagnostic, warning
from .types import (
    DEFAULT_TEMPO_USPQ,
    DEFAULT_TICKS_PER_QUARTER,
    MidiNote,
    MidiSong,
    Track,
)


class MidiParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class MidiWriteError(ValueError):
    pass


_MAX_TICK = (1 << 31) - 1


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def fail(self, msg: str):
        raise MidiParseError(msg, self.pos)

    def bytes(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            self.fail(f"unexpected end of data, wanted {n} bytes")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.bytes(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.bytes(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.bytes(4))[0]

    def varlen(self) -> int:
        value = 0
        for _ in range(4):
            b = self.u8()
            value = (value << 7) | (b & 0x7F)
            if not b & 0x80:
                return value
        self.fail("variable-length quantity longer than 4 bytes")


_CHANNEL_MSG_LEN = {0x80: 2, 0x90: 2, 0xA0: 2, 0xB0: 2, 0xC0: 1, 0xD0: 1, 0xE0: 2}


def _parse_track_chunk(r: _Reader, end: int):
    """Decode one MTrk body into raw timed events."""
    events = []  # (tick, kind, payload)
    tick = 0
    running = None
    while r.pos < end:
        tick += r.varlen()
        if tick > _MAX_TICK:
            r.fail("tick overflow")
        status = r.u8()
        if status < 0x80:
            if running is None:
                r.fail("data byte with no running status")
            r.pos -= 1
            status = running
        if 0x80 <= status < 0xF0:
            running = status
            kind = status & 0xF0
            channel = status & 0x0F
            n = _CHANNEL_MSG_LEN[kind]
            payload = r.bytes(n)
            if any(b >= 0x80 for b in payload):
                r.fail("status byte where a data byte was expected")
            events.append((tick, kind, channel, payload))
        elif status in (0xF0, 0xF7):  # sysex: skip opaquely
            running = None
            length = r.varlen()
            r.bytes(length)
        elif status == 0xFF:
            running = None
            meta = r.u8()
            length = r.varlen()
            payload = r.bytes(length)
            events.append((tick, 0xFF, meta, payload))
            if meta == 0x2F:
                break
        else:
            r.fail(f"unexpected status byte 0x{status:02x}")
    if r.pos > end:
        r.fail("event ran past declared track length")
    r.pos = end
    return events


def parse_midi(data: bytes, diagnostics: list[Diagnostic] | None = None) -> MidiSong:
    """Parse a standard MIDI file into a MidiSong.

    Note-on/note-off pairs are matched FIFO per (channel, pitch); a
    note-on with velocity 0 counts as note-off.  Orphan note-ons are
    closed at end of track and reported through `diagnostics`.  Chunks
    holding notes on several channels are split into one Track per
    channel so every Track carries a single channel.
    """
    r = _Reader(bytes(data))
    if r.bytes(4) != b"MThd":
        r.pos = 0
        r.fail("missing MThd header chunk")
    header_len = r.u32()
    if header_len < 6:
        r.fail(f"header chunk length {header_len} < 6")
    fmt = r.u16()
    ntrks = r.u16()
    division = r.u16()
    r.bytes(header_len - 6)
    if fmt not in (0, 1):
        r.fail(f"unsupported MIDI format {fmt}")
    if division & 0x8000:
        r.fail("SMPTE time division not supported")
    if division == 0:
        r.fail("zero ticks-per-quarter division")

    chunks = []
    while len(chunks) < ntrks and r.pos < len(r.data):
        cid = r.bytes(4)
        length = r.u32()
        end = r.pos + length
        if end > len(r.data):
            r.fail("track chunk extends past end of data")
        if cid == b"MTrk":
            chunks.append(_parse_track_chunk(r, end))
        else:
            r.pos = end  # alien chunk: skip
    if len(chunks) < ntrks:
        r.fail(f"expected {ntrks} track chunks, found {len(chunks)}")

    # Global tempo map and time signature from all chunks.
    tempo_map = []
    time_sig = None
    for events in chunks:
        for tick, kind, arg, payload in events:
            if kind == 0xFF and arg == 0x51 and len(payload) == 3:
                uspq = int.from_bytes(payload, "big")
                if uspq > 0:
                    tempo_map.append((tick, uspq))
            elif kind == 0xFF and arg == 0x58 and len(payload) >= 2 and time_sig is None:
                num, den_pow = payload[0], payload[1]
                if num > 0 and den_pow <= 7:
                    time_sig = (num, 1 << den_pow)
    if not tempo_map:
        tempo_map = [(0, DEFAULT_TEMPO_USPQ)]
    tempo_map.sort()
    if time_sig is None:
        time_sig = (4, 4)

    skeleton = MidiSong(
        tracks=(Track(index=0),),
        ticks_per_quarter=division,
        tempo_map=tuple(tempo_map),
        time_signature=time_sig,
    )

    tracks: list[Track] = []
    for chunk_idx, events in enumerate(chunks):
        name = ""
        programs: dict[int, int] = {}
        open_notes: dict[tuple[int, int], list[tuple[int, int]]] = {}
        notes_by_channel: dict[int, list[MidiNote]] = {}
        end_tick = 0

        def close(channel: int, pitch: int, on_tick: int, velocity: int, off_tick: int):
            if off_tick <= on_tick:
                off_tick = on_tick + 1
            onset = skeleton.tick_to_seconds(on_tick)
            offset = skeleton.tick_to_seconds(off_tick)
            notes_by_channel.setdefault(channel, []).append(
                MidiNote(onset, offset - onset, pitch, max(1, velocity))
            )

        for tick, kind, arg, payload in events:
            end_tick = max(end_tick, tick)
            if kind == 0x90 and payload[1] > 0:
                open_notes.setdefault((arg, payload[0]), []).append((tick, payload[1]))
            elif kind == 0x80 or (kind == 0x90 and payload[1] == 0):
                stack = open_notes.get((arg, payload[0]))
                if stack:
                    on_tick, vel = stack.pop(0)
                    close(arg, payload[0], on_tick, vel, tick)
            elif kind == 0xC0:
                programs.setdefault(arg, payload[0])
            elif kind == 0xFF and arg == 0x03 and not name:
                name = payload.decode("latin-1", errors="replace")

        for (channel, pitch), stack in sorted(open_notes.items()):
            for on_tick, vel in stack:
                if diagnostics is not None:
                    diagnostics.append(
                        warning(
                            f"track {chunk_idx}: note-on pitch {pitch} channel {channel} "
                            f"never released; closed at end of track"
                        )
                    )
                close(channel, pitch, on_tick, vel, max(end_tick, on_tick + 1))

        if notes_by_channel:
            for channel in sorted(notes_by_channel):
                tracks.append(
                    Track(
                        index=len(tracks),
                        name=name,
                        program=programs.get(channel, 0),
                        channel=channel,
                        notes=tuple(notes_by_channel[channel]),
                    )
                )
        elif programs or name:
            first_prog_channel = min(programs) if programs else 0
            tracks.append(
                Track(
                    index=len(tracks),
                    name=name,
                    program=programs.get(first_prog_channel, 0),
                    channel=first_prog_channel,
                    notes=(),
                )
            )
        # chunks carrying only meta events (conductor tracks) add no Track

    if not tracks:
        tracks.append(Track(index=0))

    return MidiSong(
        tracks=tuple(tracks),
        ticks_per_quarter=division,
        tempo_map=tuple(tempo_map),
        time_signature=time_sig,
    )


def _varlen(value: int) -> bytes:
    out = bytearray([value & 0x7F])
    value >>= 7
    while value:
        out.insert(0, 0x80 | (value & 0x7F))
        value >>= 7
    return bytes(out)


def _track_chunk(events: list[tuple[int, bytes]]) -> bytes:
    events = sorted(events, key=lambda e: e[0])
    body = bytearray()
    last = 0
    for tick, payload in events:
        body += _varlen(tick - last)
        body += payload
        last = tick
    body += _varlen(0) + b"\xff\x2f\x00"
    return b"MTrk" + struct.pack(">I", len(body)) + bytes(body)


def write_midi(song: MidiSong) -> bytes:
    """Serialize to a format-1 file: conductor track then one chunk per track.

    Note times are quantized to the song's tick resolution, so
    parse_midi(write_midi(s)) reproduces s exactly when s is
    tick-aligned.
    """
    num, den = song.time_signature
    den_pow = max(0, den.bit_length() - 1)
    conductor: list[tuple[int, bytes]] = [
        (0, bytes([0xFF, 0x58, 0x04, num, den_pow, 24, 8]))
    ]
    for tick, uspq in song.tempo_map:
        conductor.append((tick, bytes([0xFF, 0x51, 0x03]) + uspq.to_bytes(3, "big")))

    chunks = [_track_chunk(conductor)]
    for track in song.tracks:
        events: list[tuple[int, bytes]] = []
        if track.name:
            data = track.name.encode("latin-1", errors="replace")
            events.append((0, bytes([0xFF, 0x03]) + _varlen(len(data)) + data))
        events.append((0, bytes([0xC0 | track.channel, track.program])))
        for note in track.notes:
            on = song.seconds_to_tick(note.onset)
            off = song.seconds_to_tick(note.offset)
            if off <= on:
                off = on + 1
            if off > _MAX_TICK or on < 0:
                raise MidiWriteError(
                    f"note at {note.onset}s outside representable tick range"
                )
            events.append((on, bytes([0x90 | track.channel, note.pitch, note.velocity])))
            events.append((off, bytes([0x80 | track.channel, note.pitch, 0])))
        chunks.append(_track_chunk(events))

    header = b"MThd" + struct.pack(">IHHH", 6, 1, len(chunks), song.ticks_per_quarter)
    return header + b"".join(chunks)
