"""Standard MIDI file reader/writer for the note-event subset used here.

Reads format 0 and format 1 files (note on/off plus tempo meta events,
everything else skipped); writes format 1 files with a tempo track and one
track per voice. Onsets and durations are in seconds via the tempo map.
"""

from __future__ import annotations

import struct

from .score import ScoreError

DEFAULT_TEMPO = 500000  # microseconds per quarter note (120 BPM)


class MidiError(ScoreError):
    """Malformed standard MIDI file."""


def _read_varlen(data, pos):
    value = 0
    while True:
        if pos >= len(data):
            raise MidiError("truncated variable-length quantity")
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos


def _write_varlen(value):
    if value < 0:
        raise MidiError(f"negative delta time {value}")
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(chunks))


def _parse_track(data):
    """One MTrk chunk -> (note ons, note offs, tempo changes), ticks absolute.

    ons: list of (tick, channel, pitch, velocity); offs: (tick, channel,
    pitch); tempos: (tick, microseconds per quarter).
    """
    ons, offs, tempos = [], [], []
    pos = 0
    tick = 0
    status = None
    while pos < len(data):
        delta, pos = _read_varlen(data, pos)
        tick += delta
        if pos >= len(data):
            raise MidiError("truncated track data")
        byte = data[pos]
        if byte >= 0x80:
            status = byte
            pos += 1
        elif status is None:
            raise MidiError("data byte with no running status")
        if status == 0xFF:
            if pos >= len(data):
                raise MidiError("truncated meta event")
            meta = data[pos]
            pos += 1
            length, pos = _read_varlen(data, pos)
            payload = data[pos:pos + length]
            if len(payload) < length:
                raise MidiError("truncated meta payload")
            pos += length
            if meta == 0x51:
                if length != 3:
                    raise MidiError("bad tempo meta length")
                tempos.append((tick, int.from_bytes(payload, "big")))
            elif meta == 0x2F:
                break
        elif status in (0xF0, 0xF7):
            length, pos = _read_varlen(data, pos)
            pos += length
        else:
            kind = status & 0xF0
            channel = status & 0x0F
            n_data = 1 if kind in (0xC0, 0xD0) else 2
            if pos + n_data > len(data):
                raise MidiError("truncated channel event")
            d = data[pos:pos + n_data]
            pos += n_data
            if kind == 0x90 and d[1] > 0:
                ons.append((tick, channel, d[0], d[1]))
            elif kind == 0x80 or (kind == 0x90 and d[1] == 0):
                offs.append((tick, channel, d[0]))
    return ons, offs, tempos, tick


def _tick_clock(tempos, ppq):
    """Piecewise-linear tick -> seconds converter from a tempo map."""
    changes = sorted(tempos)
    if not changes or changes[0][0] > 0:
        changes.insert(0, (0, DEFAULT_TEMPO))
    marks = []  # (tick, seconds_at_tick, us_per_tick)
    seconds = 0.0
    for i, (tick, tempo) in enumerate(changes):
        if i > 0:
            prev_tick, _, prev_rate = marks[-1]
            seconds = marks[-1][1] + (tick - prev_tick) * prev_rate
        marks.append((tick, seconds, tempo / ppq / 1e6))

    def to_seconds(tick):
        lo, hi = 0, len(marks) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if marks[mid][0] <= tick:
                lo = mid
            else:
                hi = mid - 1
        base_tick, base_sec, rate = marks[lo]
        return base_sec + (tick - base_tick) * rate

    return to_seconds


def read_smf(path):
    """Read note events from a standard MIDI file.

    Returns a list of raw note tuples (onset_sec, pitch, source, duration)
    where source is the track index for format 1 files and the channel for
    format 0 files. Note-ons with velocity 0 are note-offs; notes left open
    are closed at their track's end.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 14 or data[:4] != b"MThd":
        raise MidiError(f"{path}: not a standard MIDI file")
    header_len, fmt, n_tracks, division = struct.unpack(">IHHH", data[4:14])
    if header_len < 6:
        raise MidiError(f"{path}: bad header length {header_len}")
    if fmt not in (0, 1):
        raise MidiError(f"{path}: unsupported format {fmt}")
    if division & 0x8000:
        raise MidiError(f"{path}: SMPTE time division not supported")
    if division == 0:
        raise MidiError(f"{path}: zero ticks per quarter")

    pos = 8 + header_len
    tracks = []
    all_tempos = []
    for _ in range(n_tracks):
        if pos + 8 > len(data):
            raise MidiError(f"{path}: truncated track header")
        if data[pos:pos + 4] != b"MTrk":
            raise MidiError(f"{path}: expected MTrk chunk")
        (length,) = struct.unpack(">I", data[pos + 4:pos + 8])
        chunk = data[pos + 8:pos + 8 + length]
        if len(chunk) < length:
            raise MidiError(f"{path}: truncated track chunk")
        pos += 8 + length
        ons, offs, tempos, last_tick = _parse_track(chunk)
        tracks.append((ons, offs, last_tick))
        all_tempos.extend(tempos)

    clock = _tick_clock(all_tempos, division)
    raw = []
    for index, (ons, offs, last_tick) in enumerate(tracks):
        # first-in first-out pairing per (channel, pitch)
        open_notes = {}
        events = [(t, 1, ch, p, v) for t, ch, p, v in ons]
        events += [(t, 0, ch, p, 0) for t, ch, p in offs]
        events.sort(key=lambda e: (e[0], e[1]))
        end_tick = max([last_tick] + [e[0] for e in events])
        for tick, is_on, channel, pitch, _vel in events:
            key = (channel, pitch)
            if is_on:
                open_notes.setdefault(key, []).append(tick)
            else:
                if open_notes.get(key):
                    start = open_notes[key].pop(0)
                    source = channel if fmt == 0 else index
                    raw.append((clock(start), pitch, source, clock(tick) - clock(start)))
        for (channel, pitch), starts in open_notes.items():
            for start in starts:
                source = channel if fmt == 0 else index
                raw.append((clock(start), pitch, source, clock(end_tick) - clock(start)))
    raw.sort(key=lambda r: (r[0], r[1], r[2]))
    return raw


def write_smf(path, voices, tempo_bpm=120.0, ppq=480):
    """Write a format 1 MIDI file, one track per voice.

    Parameters
    ----------
    voices : list of note lists, each note a (onset_sec, pitch, duration_sec)
    tempo_bpm : fixed tempo written to the meta track
    ppq : ticks per quarter note
    """
    us_per_quarter = int(round(60e6 / tempo_bpm))
    ticks_per_sec = ppq * 1e6 / us_per_quarter

    def track_chunk(events):
        # events: (tick, order, message bytes); order puts offs before ons
        out = bytearray()
        now = 0
        for tick, _order, msg in sorted(events, key=lambda e: (e[0], e[1], e[2])):
            out += _write_varlen(tick - now)
            out += msg
            now = tick
        out += _write_varlen(0) + bytes((0xFF, 0x2F, 0x00))
        return b"MTrk" + struct.pack(">I", len(out)) + bytes(out)

    meta = [(0, 0, bytes((0xFF, 0x51, 0x03)) + us_per_quarter.to_bytes(3, "big"))]
    chunks = [track_chunk(meta)]
    for notes in voices:
        events = []
        for onset, pitch, duration in notes:
            if not 0 <= pitch <= 127:
                raise MidiError(f"pitch {pitch} outside MIDI range")
            start = int(round(onset * ticks_per_sec))
            stop = int(round((onset + duration) * ticks_per_sec))
            if stop <= start:
                stop = start + 1
            events.append((start, 1, bytes((0x90, pitch, 64))))
            events.append((stop, 0, bytes((0x80, pitch, 0))))
        chunks.append(track_chunk(events))

    header = b"MThd" + struct.pack(">IHHH", 6, 1, len(chunks), ppq)
    with open(path, "wb") as fh:
        fh.write(header)
        for chunk in chunks:
            fh.write(chunk)
