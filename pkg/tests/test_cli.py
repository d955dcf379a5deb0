"""End-to-end command line tests driven through main(argv)."""

import numpy as np
import pytest

from pianoreduce.cli import main
from pianoreduce.difficulty import read_profile_csv, write_error_annotations
from pianoreduce.models import load_fingering_params
from pianoreduce.score import ingest, read_notes_text, write_notes_text
from pianoreduce.smf import read_smf, write_smf


@pytest.fixture
def text_score(tmp_path):
    """A small two-voice score in the text format, with flags."""
    rows = []
    for i in range(7):
        rows.append((0.3 * i, 64 + (3 * i) % 12, 0, 0.25))
    for i in range(4):
        rows.append((0.6 * i, 40 + (2 * i) % 7, 1, 0.5))
    notes = ingest(rows)
    top = max(notes, key=lambda n: n.pitch)
    low = min(notes, key=lambda n: n.pitch)
    path = tmp_path / "piece.notes"
    write_notes_text(path, notes, melodic_ids=[top.id], bass_ids=[low.id])
    return str(path)


@pytest.fixture
def midi_score(tmp_path):
    voices = [
        [(0.5 * i, 70 + (2 * i) % 8, 0.4) for i in range(6)],
        [(1.0 * i, 45 + i % 5, 0.8) for i in range(3)],
    ]
    path = tmp_path / "piece.mid"
    write_smf(path, voices)
    return str(path)


def run(argv):
    return main([str(a) for a in argv])


# ---------------------------------------------------------------------------
# condense
# ---------------------------------------------------------------------------

def test_condense_roundtrip_and_determinism(tmp_path, text_score):
    out = tmp_path / "condensed.notes"
    assert run(["condense", text_score, out]) == 0
    notes, mel, bas = read_notes_text(out)
    assert len(notes) == 11
    assert len(mel) == 1 and len(bas) == 1
    first = out.read_bytes()
    assert run(["condense", text_score, out]) == 0
    assert out.read_bytes() == first


def test_condense_infer_flags(tmp_path, midi_score):
    out = tmp_path / "condensed.notes"
    assert run(["condense", midi_score, out, "--infer-mb", "1.0"]) == 0
    _, mel, bas = read_notes_text(out)
    assert mel and bas


def test_condense_missing_input(tmp_path, capsys):
    assert run(["condense", tmp_path / "nope.notes", tmp_path / "o"]) == 1
    assert capsys.readouterr().err.startswith("error:")


# ---------------------------------------------------------------------------
# finger / separate
# ---------------------------------------------------------------------------

def test_finger_output(tmp_path, text_score):
    out = tmp_path / "fingering.csv"
    assert run(["finger", text_score, out, "--hand", "R"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# log_prob=")
    assert lines[1] == "note_id,finger"
    assert len(lines) == 2 + 11
    fingers = [int(l.split(",")[1]) for l in lines[2:]]
    assert all(1 <= f <= 5 for f in fingers)


def test_finger_hand_mismatch(tmp_path, text_score, capsys):
    corpus = tmp_path / "corpus.txt"
    corpus.write_text("60:1 62:2 64:3\n55:1 59:2 62:3\n")
    params = tmp_path / "right.npz"
    assert run(["train-fingering", corpus, params, "--hand", "R"]) == 0
    assert load_fingering_params(params).hand == "R"
    assert run(["finger", text_score, tmp_path / "x.csv", "--hand", "L",
                "--params", params]) == 1
    assert "error:" in capsys.readouterr().err


def test_separate_output(tmp_path, text_score):
    out = tmp_path / "hands.csv"
    assert run(["separate", text_score, out]) == 0
    lines = out.read_text().splitlines()
    assert lines[1] == "note_id,hand,finger"
    hands = {l.split(",")[1] for l in lines[2:]}
    assert hands <= {"L", "R"}
    assert len(lines) == 2 + 11


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def test_analyze_from_tracks(tmp_path, midi_score):
    out = tmp_path / "profile.csv"
    assert run(["analyze", midi_score, out, "--hands", "from-tracks"]) == 0
    prof = read_profile_csv(out)
    assert len(prof) == 9
    # the CSV rounds each column to 6 significant digits separately
    np.testing.assert_allclose(prof.d_both, prof.d_left + prof.d_right,
                               rtol=1e-4)


def test_analyze_from_tracks_needs_two_tracks(tmp_path, capsys):
    path = tmp_path / "mono.mid"
    write_smf(path, [[(0.0, 60, 0.5), (0.5, 62, 0.5)]])
    assert run(["analyze", path, tmp_path / "p.csv",
                "--hands", "from-tracks"]) == 1
    assert "expected 2 note-bearing tracks" in capsys.readouterr().err


def test_analyze_separate_and_noinfo(tmp_path, midi_score):
    out = tmp_path / "profile.csv"
    assert run(["analyze", midi_score, out, "--hands", "separate",
                "--model", "noinfo", "--dt", "2.0"]) == 0
    prof = read_profile_csv(out)
    assert prof.window == 2.0


# ---------------------------------------------------------------------------
# reduce
# ---------------------------------------------------------------------------

def test_reduce_default_iterative(tmp_path, text_score, capsys):
    out = tmp_path / "reduced.mid"
    assert run(["reduce", text_score, out]) == 0
    msg = capsys.readouterr().out
    assert "kept" in msg and "iteration" in msg
    sidecar = tmp_path / "reduced.mid.report.csv"
    assert sidecar.exists()
    header = sidecar.read_text().splitlines()[0]
    assert header.endswith(",zeta_final")
    assert read_smf(out) or True  # parses as MIDI


def test_reduce_is_byte_deterministic(tmp_path, text_score):
    a, b = tmp_path / "a.mid", tmp_path / "b.mid"
    for out in (a, b):
        assert run(["reduce", text_score, out, "--preset", "medium",
                    "--sidecar", str(out) + ".csv"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.mid.csv").read_text() == \
        (tmp_path / "b.mid.csv").read_text()


def test_reduce_targets_override_tightens(tmp_path, text_score):
    loose, tight = tmp_path / "loose.mid", tmp_path / "tight.mid"
    assert run(["reduce", text_score, loose, "--targets", "500,500,900"]) == 0
    assert run(["reduce", text_score, tight, "--targets", "4,4,6",
                "--max-iterations", "12"]) == 0
    assert len(read_smf(loose)) >= len(read_smf(tight))


def test_reduce_one_time_and_models(tmp_path, text_score):
    out = tmp_path / "r.mid"
    assert run(["reduce", text_score, out, "--optimizer", "one-time",
                "--rho", "0.3"]) == 0
    assert run(["reduce", text_score, out, "--model", "fingering",
                "--max-iterations", "4"]) == 0
    assert run(["reduce", text_score, out, "--model", "distance",
                "--max-iterations", "4"]) == 0


def test_reduce_bad_targets(tmp_path, text_score, capsys):
    assert run(["reduce", text_score, tmp_path / "r.mid",
                "--targets", "1,2"]) == 1
    assert "three comma-separated" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# eval-errors
# ---------------------------------------------------------------------------

@pytest.fixture
def profile_and_annotations(tmp_path, midi_score):
    prof_path = tmp_path / "profile.csv"
    assert run(["analyze", midi_score, prof_path,
                "--hands", "from-tracks"]) == 0
    prof = read_profile_csv(prof_path)
    hard = np.argsort(prof.d_both)[-3:]
    ann_path = tmp_path / "errors.txt"
    write_error_annotations(ann_path,
                            [(int(prof.note_ids[i]), 1, 0, 0) for i in hard])
    return str(prof_path), str(ann_path)


def test_eval_errors_fixed_thresholds(tmp_path, profile_and_annotations):
    prof, ann = profile_and_annotations
    out = tmp_path / "metrics.csv"
    assert run(["eval-errors", out, "--profile", prof, "--annotations", ann,
                "--thresholds", "10,10,15"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("threshold_left,")
    assert len(lines) == 2
    assert lines[1].split(",")[0] == "10"


def test_eval_errors_sweep(tmp_path, profile_and_annotations):
    prof, ann = profile_and_annotations
    out = tmp_path / "metrics.csv"
    assert run(["eval-errors", out, "--profile", prof, "--annotations", ann,
                "--sweep", "5:25:5,5:25:5,10:40:10"]) == 0
    row = out.read_text().splitlines()[1].split(",")
    f_weighted = float(row[8])
    assert 0.0 <= f_weighted <= 1.0


def test_eval_errors_input_mismatch(tmp_path, profile_and_annotations, capsys):
    prof, ann = profile_and_annotations
    assert run(["eval-errors", tmp_path / "m.csv", "--profile", prof,
                "--profile", prof, "--annotations", ann]) == 1
    assert "one --annotations per --profile" in capsys.readouterr().err
    assert run(["eval-errors", tmp_path / "m.csv", "--profile", prof,
                "--annotations", ann]) == 1
    assert "--thresholds" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# train-fingering
# ---------------------------------------------------------------------------

def test_train_fingering_creates_loadable_params(tmp_path):
    corpus = tmp_path / "corpus.txt"
    corpus.write_text("60:1 62:2 64:3 65:1 67:2\n48:5 52:3 55:2 60:1\n")
    out = tmp_path / "params.npz"
    assert run(["train-fingering", corpus, out, "--hand", "L",
                "--alpha", "0.2"]) == 0
    params = load_fingering_params(out)
    assert params.hand == "L"
    assert run(["train-fingering", corpus, tmp_path / "again.npz",
                "--hand", "L", "--alpha", "0.2"]) == 0
    assert out.read_bytes() == (tmp_path / "again.npz").read_bytes()


def test_train_fingering_bad_corpus(tmp_path, capsys):
    corpus = tmp_path / "corpus.txt"
    corpus.write_text("60:9 62:2\n")
    assert run(["train-fingering", corpus, tmp_path / "p.npz"]) == 1
    assert "error:" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def test_report_two_pieces_and_jobs_parity(tmp_path, text_score, midi_score):
    out1 = tmp_path / "report1.csv"
    argv = ["report", text_score, midi_score, out1,
            "--methods", "one-time-gaussian,iterated-gaussian",
            "--presets", "medium,hard", "--max-iterations", "8",
            "--infer-mb", "1.0"]
    assert run(argv) == 0
    lines = out1.read_text().splitlines()
    assert lines[0].startswith("piece,method,")
    piece_rows = [l for l in lines[1:] if not l.startswith("MEAN")]
    mean_rows = [l for l in lines[1:] if l.startswith("MEAN")]
    assert len(piece_rows) == 2 * 2 * 2
    assert len(mean_rows) == 2 * 2
    out2 = tmp_path / "report2.csv"
    assert run(argv[:3] + [out2] + argv[4:] + ["--jobs", "2"]) == 0
    assert out1.read_text() == out2.read_text()


def test_report_rejects_unknown_method_and_preset(tmp_path, text_score,
                                                  capsys):
    assert run(["report", text_score, tmp_path / "r.csv",
                "--methods", "psychic"]) == 1
    assert "unknown method" in capsys.readouterr().err
    assert run(["report", text_score, tmp_path / "r.csv",
                "--presets", "impossible"]) == 1
    assert "unknown preset" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# top level
# ---------------------------------------------------------------------------

def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["transmogrify"])
    assert exc.value.code == 2


def test_missing_required_argument_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["condense"])
    assert exc.value.code == 2


def test_version_flag():
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
