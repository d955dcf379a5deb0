"""Command line interface.

Subcommands: condense, finger, separate, analyze, reduce, eval-errors,
train-fingering, report. Score files ending in .mid/.midi/.smf are read as
standard MIDI, anything else as the plain-text note format. All outputs are
deterministic: rerunning a command on the same inputs writes identical
bytes.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .decoder import DecodeError, decode_fingering, separate_hands
from .difficulty import (Thresholds, difficulty_profile, error_counts,
                         error_prediction_metrics, predict_errors,
                         read_error_annotations, read_profile_csv,
                         sweep_thresholds, write_profile_csv)
from .models import (EditParams, GaussianParams, ModelError,
                     default_fingering_params, load_fingering_params,
                     read_fingering_corpus, save_fingering_params,
                     train_fingering)
from .reduction import (PRESETS, TargetDifficulty, ensemble_difficulty,
                        export_reduction, iterative_reduce, one_time_reduce)
from .report import ReportError, batch_report, evaluate_reduction
from .score import (PianoScore, ScoreError, apply_overlay, bar_boundaries,
                    condense, infer_melody_bass, ingest, read_notes_text,
                    read_overlay, write_notes_text)
from .smf import read_smf

MIDI_SUFFIXES = (".mid", ".midi", ".smf")


def _is_midi(path):
    return str(path).lower().endswith(MIDI_SUFFIXES)


def read_score(path):
    """Read notes plus any inline melody/bass flags from a score file."""
    if _is_midi(path):
        return ingest(read_smf(path)), set(), set()
    return read_notes_text(path)


def load_condensed(path, infer_mb=None, overlay=None):
    """Read, condense and annotate a score file.

    Inline text flags survive condensation (a flag on any duplicate lands on
    the kept note); ``infer_mb`` (a bar length in seconds) replaces flags by
    the register baseline; ``overlay`` applies last.
    """
    notes, mel, bas = read_score(path)
    score = condense(notes)
    rep = {(n.onset, n.pitch): n.id for n in score.notes}
    mel_ids = {rep[(n.onset, n.pitch)] for n in notes if n.id in mel}
    bas_ids = {rep[(n.onset, n.pitch)] for n in notes if n.id in bas}
    score = score.with_flags(mel_ids, bas_ids)
    if infer_mb is not None:
        score = infer_melody_bass(score, bar_boundaries(notes, infer_mb))
    if overlay is not None:
        score = apply_overlay(score, read_overlay(overlay))
    return score


def _parse_targets(args):
    if args.targets:
        parts = args.targets.split(",")
        if len(parts) != 3:
            raise ModelError("--targets needs three comma-separated values")
        return TargetDifficulty(*(float(p) for p in parts))
    return PRESETS[args.preset]


def _fingering_params(args):
    left = load_fingering_params(args.params_left) if args.params_left else None
    right = load_fingering_params(args.params_right) if args.params_right else None
    return left, right


def _hands_from_tracks(notes):
    tracks = sorted({n.track for n in notes})
    if len(tracks) != 2:
        raise ScoreError(f"expected 2 note-bearing tracks for --hands "
                         f"from-tracks, found {len(tracks)}; "
                         f"use --hands separate")
    low = tracks[0]
    return tuple("L" if n.track == low else "R" for n in notes)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_condense(args):
    score = load_condensed(args.input, args.infer_mb, args.overlay)
    mel = [n.id for n, m in zip(score.notes, score.melodic) if m]
    bas = [n.id for n, b in zip(score.notes, score.bass) if b]
    write_notes_text(args.output, score.notes, mel, bas, score.multiplicity)
    return 0


def cmd_finger(args):
    notes, _, _ = read_score(args.input)
    if not notes:
        raise ScoreError(f"{args.input}: no notes")
    params = (load_fingering_params(args.params) if args.params
              else default_fingering_params(args.hand))
    if params.hand != args.hand:
        raise ModelError(f"parameter file is for hand {params.hand}, "
                         f"requested {args.hand}")
    path = decode_fingering([n.pitch for n in notes], params)
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# log_prob={path.log_prob:.6g}\n")
        fh.write("note_id,finger\n")
        for n, f in zip(notes, path.states):
            fh.write(f"{n.id},{f}\n")
    return 0


def cmd_separate(args):
    notes, _, _ = read_score(args.input)
    if not notes:
        raise ScoreError(f"{args.input}: no notes")
    left, right = _fingering_params(args)
    sep = separate_hands([n.pitch for n in notes], left, right)
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# log_prob={sep.log_prob:.6g}\n")
        fh.write("note_id,hand,finger\n")
        for n, h, f in zip(notes, sep.hands, sep.fingers):
            fh.write(f"{n.id},{h},{f}\n")
    return 0


def cmd_analyze(args):
    notes, _, _ = read_score(args.input)
    if not notes:
        raise ScoreError(f"{args.input}: no notes")
    if args.hands == "from-tracks":
        hands = _hands_from_tracks(notes)
    else:
        left, right = _fingering_params(args)
        hands = separate_hands([n.pitch for n in notes], left, right).hands
    piano = PianoScore(notes, hands)
    left, right = _fingering_params(args)
    profile = difficulty_profile(piano, args.model, args.dt,
                                 gaussian=GaussianParams(sigma=args.sigma),
                                 fingering_left=left, fingering_right=right)
    write_profile_csv(profile, args.output)
    return 0


def cmd_reduce(args):
    score = load_condensed(args.input, args.infer_mb, args.overlay)
    targets = _parse_targets(args)
    left, right = _fingering_params(args)
    gaussian = GaussianParams(sigma=args.sigma)
    common = dict(model=args.model, edit=EditParams(), window=args.dt,
                  gaussian=gaussian, fingering_left=left,
                  fingering_right=right, beam=args.beam)
    if args.optimizer == "one-time":
        result = one_time_reduce(score, targets, scale=args.rho,
                                 include_both=args.include_both, **common)
    else:
        result = iterative_reduce(score, targets, decay=args.decay,
                                  max_iterations=args.max_iterations,
                                  floor=args.floor, **common)
    sidecar = args.sidecar or (args.output + ".report.csv")
    export_reduction(result, args.output, sidecar)
    print(f"{args.input}: kept {len(result.notes)}/{len(score.notes)} notes, "
          f"{result.iterations} iteration(s), {result.termination}")
    return 0


def cmd_eval_errors(args):
    if len(args.profile) != len(args.annotations):
        raise ScoreError("need one --annotations per --profile")
    runs = []
    for ppath, apath in zip(args.profile, args.annotations):
        profile = read_profile_csv(ppath)
        ann = read_error_annotations(apath)
        runs.append((profile, error_counts(ann, profile.note_ids)))
    if args.sweep:
        axes = _parse_sweep(args.sweep)
        thresholds, metrics = sweep_thresholds(runs, *axes)
    else:
        if not args.thresholds:
            raise ModelError("need --thresholds L,R,B or --sweep")
        parts = args.thresholds.split(",")
        if len(parts) != 3:
            raise ModelError("--thresholds needs three comma-separated values")
        thresholds = Thresholds(*(float(p) for p in parts))
        pred = np.concatenate([predict_errors(p, thresholds) for p, _ in runs])
        counts = np.concatenate([c for _, c in runs])
        metrics = error_prediction_metrics(pred, counts)
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("threshold_left,threshold_right,threshold_both,precision,"
                 "recall,f_score,precision_weighted,recall_weighted,"
                 "f_weighted,true_pos,false_pos,missed,undefined\n")
        undef = ";".join(sorted(metrics.undefined))
        fh.write(f"{thresholds.left:.6g},{thresholds.right:.6g},"
                 f"{thresholds.both:.6g},{metrics.precision:.6g},"
                 f"{metrics.recall:.6g},{metrics.f_score:.6g},"
                 f"{metrics.precision_weighted:.6g},"
                 f"{metrics.recall_weighted:.6g},{metrics.f_weighted:.6g},"
                 f"{metrics.true_pos},{metrics.false_pos},{metrics.missed},"
                 f"{undef}\n")
    return 0


def _parse_sweep(spec):
    axes = spec.split(",")
    if len(axes) != 3:
        raise ModelError("--sweep needs three start:stop:step ranges")
    out = []
    for axis in axes:
        parts = axis.split(":")
        if len(parts) != 3:
            raise ModelError(f"bad sweep range {axis!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ModelError(f"bad sweep range {axis!r}")
        out.append(np.arange(start, stop + step / 2.0, step))
    return out


def cmd_train_fingering(args):
    corpus = read_fingering_corpus(args.corpus)
    params = train_fingering(corpus, alpha=args.alpha, hand=args.hand)
    save_fingering_params(params, args.output)
    return 0


_REPORT_METHODS = ("one-time-gaussian", "one-time-fingering",
                   "iterated-gaussian", "iterated-fingering",
                   "iterated-distance")


def _report_piece(path, methods, presets, args):
    score = load_condensed(path, args.infer_mb, args.overlay)
    left, right = _fingering_params(args)
    gaussian = GaussianParams(sigma=args.sigma)
    ensemble = None
    rows = []
    for method in methods:
        model = method.rsplit("-", 1)[1]
        for preset in presets:
            targets = PRESETS[preset]
            common = dict(model=model, window=args.dt, gaussian=gaussian,
                          fingering_left=left, fingering_right=right,
                          beam=args.beam)
            if method.startswith("one-time"):
                if ensemble is None:
                    ensemble = ensemble_difficulty(score, window=args.dt,
                                                   gaussian=gaussian,
                                                   fingering_left=left,
                                                   fingering_right=right)
                result = one_time_reduce(score, targets, scale=args.rho,
                                         ensemble=ensemble, **common)
            else:
                result = iterative_reduce(score, targets, decay=args.decay,
                                          max_iterations=args.max_iterations,
                                          floor=args.floor, **common)
            rows.append((path, method, targets, evaluate_reduction(result, targets)))
    return rows


def cmd_report(args):
    methods = args.methods.split(",")
    for m in methods:
        if m not in _REPORT_METHODS:
            raise ModelError(f"unknown method {m!r}; choose from "
                             f"{', '.join(_REPORT_METHODS)}")
    presets = args.presets.split(",")
    for p in presets:
        if p not in PRESETS:
            raise ModelError(f"unknown preset {p!r}")
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            per_piece = list(pool.map(
                lambda path: _report_piece(path, methods, presets, args),
                args.inputs))
    else:
        per_piece = [_report_piece(path, methods, presets, args)
                     for path in args.inputs]
    rows = [row for piece_rows in per_piece for row in piece_rows]
    text = batch_report(rows)
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common_model_flags(p):
    p.add_argument("--dt", type=float, default=1.0,
                   help="difficulty window in seconds (default 1.0)")
    p.add_argument("--sigma", type=float, default=5.0,
                   help="pitch model standard deviation (default 5.0)")
    p.add_argument("--params-left", help="left-hand fingering parameter file")
    p.add_argument("--params-right", help="right-hand fingering parameter file")


def _add_annotation_flags(p):
    p.add_argument("--infer-mb", type=float, metavar="BAR_SECONDS",
                   help="infer melody/bass flags with this bar length")
    p.add_argument("--overlay", help="melody/bass overlay file")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pianoreduce",
        description="Difficulty-aware piano reduction of ensemble scores.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("condense", help="deduplicate an ensemble score")
    p.add_argument("input")
    p.add_argument("output")
    _add_annotation_flags(p)
    p.set_defaults(func=cmd_condense)

    p = sub.add_parser("finger", help="estimate fingering of one hand's part")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--hand", choices=("L", "R"), default="R")
    p.add_argument("--params", help="fingering parameter file")
    p.set_defaults(func=cmd_finger)

    p = sub.add_parser("separate", help="assign notes to hands")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--params-left")
    p.add_argument("--params-right")
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("analyze", help="per-note difficulty profile")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--model", choices=("noinfo", "gaussian", "fingering"),
                   default="gaussian")
    p.add_argument("--hands", choices=("from-tracks", "separate"),
                   default="from-tracks")
    _add_common_model_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("reduce", help="difficulty-constrained reduction")
    p.add_argument("input")
    p.add_argument("output", help="output MIDI file")
    p.add_argument("--preset", choices=sorted(PRESETS), default="medium")
    p.add_argument("--targets", help="explicit targets L,R,B (overrides --preset)")
    p.add_argument("--optimizer", choices=("one-time", "iterative"),
                   default="iterative")
    p.add_argument("--model", choices=("gaussian", "fingering", "distance"),
                   default="gaussian")
    p.add_argument("--rho", type=float, default=0.5,
                   help="one-time control scale (default 0.5)")
    p.add_argument("--decay", type=float, default=0.85,
                   help="iterative control decay (default 0.85)")
    p.add_argument("--max-iterations", type=int, default=50)
    p.add_argument("--floor", type=float, default=1e-6,
                   help="iterative control floor (default 1e-6)")
    p.add_argument("--include-both", action="store_true",
                   help="include the both-hands ratio in one-time control")
    p.add_argument("--beam", type=int,
                   help="approximate decoding with this beam width")
    p.add_argument("--sidecar", help="sidecar CSV path "
                                     "(default OUTPUT.report.csv)")
    _add_common_model_flags(p)
    _add_annotation_flags(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("eval-errors", help="error-prediction metrics")
    p.add_argument("output")
    p.add_argument("--profile", action="append", required=True)
    p.add_argument("--annotations", action="append", required=True)
    p.add_argument("--thresholds", help="fixed thresholds L,R,B")
    p.add_argument("--sweep", help="threshold grid Ls:Le:Lstep,R...,B...")
    p.set_defaults(func=cmd_eval_errors)

    p = sub.add_parser("train-fingering", help="train fingering parameters")
    p.add_argument("corpus")
    p.add_argument("output")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--hand", choices=("L", "R"), default="R")
    p.set_defaults(func=cmd_train_fingering)

    p = sub.add_parser("report", help="batch reduction quality report")
    p.add_argument("inputs", nargs="+")
    p.add_argument("output")
    p.add_argument("--methods", default="one-time-gaussian,iterated-gaussian")
    p.add_argument("--presets", default="medium")
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--decay", type=float, default=0.85)
    p.add_argument("--max-iterations", type=int, default=50)
    p.add_argument("--floor", type=float, default=1e-6)
    p.add_argument("--beam", type=int)
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel workers across input files")
    _add_common_model_flags(p)
    _add_annotation_flags(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ScoreError, ModelError, DecodeError, ReportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
