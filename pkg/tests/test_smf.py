"""MIDI file reader/writer."""

import struct

import pytest

from pianoreduce.smf import MidiError, read_smf, write_smf
from pianoreduce.score import ingest


def test_write_read_roundtrip(tmp_path):
    voices = [
        [(0.0, 60, 0.5), (0.5, 62, 0.5), (1.0, 64, 1.0)],
        [(0.0, 40, 1.0), (1.0, 43, 1.0)],
    ]
    path = tmp_path / "out.mid"
    write_smf(path, voices)
    raw = sorted(read_smf(path))
    # the writer emits a meta track first, so voice v lands on track v + 1
    expect = sorted((onset, pitch, v + 1, dur)
                    for v, notes in enumerate(voices)
                    for onset, pitch, dur in notes)
    assert len(raw) == len(expect)
    for (o, p, s, d), (eo, ep, es, ed) in zip(raw, expect):
        assert p == ep and s == es
        assert abs(o - eo) < 1e-3
        assert abs(d - ed) < 1e-3


def test_roundtrip_through_ingest(tmp_path):
    voices = [[(0.0, 72, 0.25), (0.25, 74, 0.25), (0.5, 76, 0.5)]]
    path = tmp_path / "mono.mid"
    write_smf(path, voices)
    notes = ingest(read_smf(path))
    assert [n.pitch for n in notes] == [72, 74, 76]
    assert notes[0].id == 0


def _track_bytes(events):
    body = b"".join(events)
    return b"MTrk" + struct.pack(">I", len(body)) + body


def _header(fmt, ntracks, division=480):
    return b"MThd" + struct.pack(">IHHH", 6, fmt, ntracks, division)


def test_read_handcrafted_format0(tmp_path):
    # 120 bpm default tempo, ppq 480: delta 480 = 0.5 s
    track = _track_bytes([
        b"\x00\x90\x3c\x40",        # t=0 note on C4
        b"\x83\x60\x80\x3c\x40",    # delta 480 note off
        b"\x00\x90\x3e\x40",        # note on D4 (no running status)
        b"\x83\x60\x3e\x00",        # running status, vel 0 acts as off
        b"\x00\xff\x2f\x00",        # end of track
    ])
    path = tmp_path / "hand.mid"
    path.write_bytes(_header(0, 1) + track)
    raw = sorted(read_smf(path))
    assert [(p, s) for _, p, s, _ in raw] == [(60, 0), (62, 0)]
    (o1, _, _, d1), (o2, _, _, d2) = raw
    assert abs(o1 - 0.0) < 1e-9 and abs(d1 - 0.5) < 1e-9
    assert abs(o2 - 0.5) < 1e-9 and abs(d2 - 0.5) < 1e-9


def test_read_tempo_change(tmp_path):
    # tempo meta halves the pulse length midway through
    track = _track_bytes([
        b"\x00\xff\x51\x03" + (500000).to_bytes(3, "big"),   # 120 bpm
        b"\x00\x90\x3c\x40",
        b"\x83\x60\x80\x3c\x40",                             # off at 0.5 s
        b"\x00\xff\x51\x03" + (250000).to_bytes(3, "big"),   # 240 bpm
        b"\x00\x90\x3e\x40",
        b"\x83\x60\x80\x3e\x40",                             # 480 ticks = 0.25 s now
        b"\x00\xff\x2f\x00",
    ])
    path = tmp_path / "tempo.mid"
    path.write_bytes(_header(0, 1) + track)
    raw = sorted(read_smf(path))
    assert abs(raw[1][0] - 0.5) < 1e-9
    assert abs(raw[1][3] - 0.25) < 1e-9


def test_format1_source_is_track(tmp_path):
    meta = _track_bytes([b"\x00\xff\x2f\x00"])
    t1 = _track_bytes([b"\x00\x90\x30\x40", b"\x60\x80\x30\x40",
                       b"\x00\xff\x2f\x00"])
    t2 = _track_bytes([b"\x00\x91\x48\x40", b"\x60\x81\x48\x40",
                       b"\x00\xff\x2f\x00"])
    path = tmp_path / "fmt1.mid"
    path.write_bytes(_header(1, 3) + meta + t1 + t2)
    raw = sorted(read_smf(path))
    assert [(p, s) for _, p, s, _ in raw] == [(48, 1), (72, 2)]


def test_format0_source_is_channel(tmp_path):
    track = _track_bytes([
        b"\x00\x90\x3c\x40", b"\x00\x93\x30\x40",
        b"\x60\x80\x3c\x40", b"\x00\x83\x30\x40",
        b"\x00\xff\x2f\x00",
    ])
    path = tmp_path / "fmt0.mid"
    path.write_bytes(_header(0, 1) + track)
    raw = sorted(read_smf(path))
    assert {(p, s) for _, p, s, _ in raw} == {(60, 0), (48, 3)}


def test_unclosed_note_ends_at_track_end(tmp_path):
    track = _track_bytes([
        b"\x00\x90\x3c\x40",
        b"\x83\x60\xff\x2f\x00",  # end of track 480 ticks later
    ])
    path = tmp_path / "open.mid"
    path.write_bytes(_header(0, 1) + track)
    raw = read_smf(path)
    assert len(raw) == 1
    assert abs(raw[0][3] - 0.5) < 1e-9


def test_overlapping_same_pitch_fifo(tmp_path):
    track = _track_bytes([
        b"\x00\x90\x3c\x40",        # first C4 on
        b"\x60\x90\x3c\x40",        # second C4 on, 96 ticks later
        b"\x60\x80\x3c\x40",        # first off
        b"\x60\x80\x3c\x40",        # second off
        b"\x00\xff\x2f\x00",
    ])
    path = tmp_path / "fifo.mid"
    path.write_bytes(_header(0, 1) + track)
    raw = sorted(read_smf(path))
    assert len(raw) == 2
    assert abs(raw[0][3] - 0.2) < 1e-9   # 192 ticks at 120 bpm
    assert abs(raw[1][3] - 0.2) < 1e-9


def test_rejects_format2_and_smpte(tmp_path):
    path = tmp_path / "bad.mid"
    path.write_bytes(_header(2, 1) + _track_bytes([b"\x00\xff\x2f\x00"]))
    with pytest.raises(MidiError):
        read_smf(path)
    path.write_bytes(b"MThd" + struct.pack(">IHHH", 6, 0, 1, 0xE250)
                     + _track_bytes([b"\x00\xff\x2f\x00"]))
    with pytest.raises(MidiError):
        read_smf(path)


def test_rejects_garbage(tmp_path):
    path = tmp_path / "junk.mid"
    path.write_bytes(b"not a midi file")
    with pytest.raises(MidiError):
        read_smf(path)
    path.write_bytes(_header(0, 1) + b"MTrk" + struct.pack(">I", 100))
    with pytest.raises(MidiError):
        read_smf(path)


def test_write_deterministic(tmp_path):
    voices = [[(0.0, 60, 0.5), (0.123456, 74, 0.25)], [(0.1, 40, 2.0)]]
    a, b = tmp_path / "a.mid", tmp_path / "b.mid"
    write_smf(a, voices)
    write_smf(b, voices)
    assert a.read_bytes() == b.read_bytes()


def test_write_zero_duration_gets_minimal_tick(tmp_path):
    path = tmp_path / "z.mid"
    write_smf(path, [[(0.0, 60, 0.0)]])
    raw = read_smf(path)
    assert len(raw) == 1
    assert raw[0][3] > 0


def test_varlen_delta(tmp_path):
    # delta 0x200000 needs a 3-byte varint (0x81 0x80 0x40 -> wrong; use
    # canonical encoding 0xFF 0xFF 0x7F for 0x1FFFFF and check a round trip
    # through the writer at a large onset instead)
    voices = [[(100.0, 60, 0.5)]]
    path = tmp_path / "far.mid"
    write_smf(path, voices)
    raw = read_smf(path)
    assert abs(raw[0][0] - 100.0) < 1e-3
