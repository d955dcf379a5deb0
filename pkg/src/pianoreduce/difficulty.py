"""Windowed performance-difficulty measures and the error-prediction harness.

Difficulty at time t is the negative log-probability of the notes inside
the closed window [t - w/2, t + w/2], scored as a standalone sequence under
a piano-score model, divided by the window length. Per-hand values D_L and
D_R are computed on each hand's part alone; D_B is their sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .decoder import decode_fingering
from .models import (
    GaussianParams, ModelError, UNIFORM_PITCH_LOGP, _gauss_tables,
    default_fingering_params, no_info_logprob,
)
from .score import PITCH_MIN, ScoreError

__all__ = [
    "Thresholds", "DifficultyProfile", "PredictionMetrics",
    "window_notes", "difficulty_at", "difficulty_profile", "predict_errors",
    "error_prediction_metrics", "sweep_thresholds", "attribute_errors",
    "read_error_annotations", "write_error_annotations", "error_counts",
    "write_profile_csv", "read_profile_csv",
]

DIFFICULTY_MODELS = ("noinfo", "gaussian", "fingering")


@dataclass(frozen=True)
class Thresholds:
    """Per-hand and both-hand difficulty thresholds."""

    left: float
    right: float
    both: float

    def __post_init__(self):
        for v in (self.left, self.right, self.both):
            if not math.isfinite(v) or v < 0:
                raise ModelError("thresholds must be finite and >= 0")


@dataclass(frozen=True)
class DifficultyProfile:
    """Per-note difficulty triplets of a piano score."""

    note_ids: np.ndarray
    onsets: np.ndarray
    d_left: np.ndarray
    d_right: np.ndarray
    d_both: np.ndarray
    window: float

    def __post_init__(self):
        for name in ("note_ids", "onsets", "d_left", "d_right", "d_both"):
            arr = np.asarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
            if len(arr) != len(self.note_ids):
                raise ScoreError("profile columns must align")

    def __len__(self):
        return len(self.note_ids)


def window_notes(onsets, pitches, center, window=1.0):
    """Pitches whose onset lies in the closed window around ``center``.

    ``onsets`` must be ascending; the result keeps score order.
    """
    onsets = np.asarray(onsets, dtype=float)
    pitches = np.asarray(pitches)
    lo, hi = _window_bounds(onsets, center, window)
    return pitches[lo:hi]


def _window_bounds(onsets, center, window):
    lo = int(np.searchsorted(onsets, center - window / 2.0, side="left"))
    hi = int(np.searchsorted(onsets, center + window / 2.0, side="right"))
    return lo, hi


def _sequence_logprob(pitches, fingers, hand, model, gaussian, fingering):
    """Standalone log-probability of one hand's window content."""
    n = len(pitches)
    if model == "noinfo":
        return no_info_logprob(n)
    if n == 0:
        return 0.0
    if model == "gaussian":
        tables = _gauss_tables(gaussian or GaussianParams())
        idx = np.asarray(pitches, dtype=int) - PITCH_MIN
        lp = tables["log_init"][hand][idx[0]]
        if n > 1:
            lp += tables["log_trans"][idx[:-1], idx[1:]].sum()
        return float(lp)
    if model == "fingering":
        params = fingering or default_fingering_params(hand)
        if fingers is None:
            return decode_fingering(pitches, params).log_prob
        tables = params._tables()
        f = np.asarray(fingers, dtype=int) - 1
        idx = np.asarray(pitches, dtype=int) - PITCH_MIN
        lp = tables["log_init"][f[0]] + UNIFORM_PITCH_LOGP
        if n > 1:
            lp += tables["log_trans"][f[:-1], f[1:]].sum()
            lp += tables["log_move"][idx[:-1], f[:-1], f[1:], idx[1:]].sum()
        return float(lp)
    raise ModelError(f"unknown difficulty model {model!r}")


def difficulty_at(onsets, pitches, center, *, hand="R", model="gaussian",
                  window=1.0, fingers=None, gaussian=None, fingering=None):
    """Difficulty of one hand's part at time ``center``.

    The notes inside the closed window are scored as a standalone sequence
    (the window's first note uses the model's initial probability); an empty
    window has difficulty 0. With the fingering model and ``fingers=None``
    the most probable fingering of the window is used.
    """
    if window <= 0:
        raise ModelError("window must be positive")
    onsets = np.asarray(onsets, dtype=float)
    lo, hi = _window_bounds(onsets, center, window)
    wf = None if fingers is None else np.asarray(fingers)[lo:hi]
    lp = _sequence_logprob(np.asarray(pitches)[lo:hi], wf, hand, model,
                           gaussian, fingering)
    return -lp / window


def difficulty_profile(score, model="gaussian", window=1.0, *, gaussian=None,
                       fingering_left=None, fingering_right=None):
    """Difficulty triplets (D_L, D_R, D_B) at every note onset of a piano
    score.

    D_B is computed as D_L + D_R, so the identity holds exactly in floats.
    """
    if window <= 0:
        raise ModelError("window must be positive")
    if model not in DIFFICULTY_MODELS:
        raise ModelError(f"unknown difficulty model {model!r}")
    parts = {}
    for hand, fingering in (("L", fingering_left), ("R", fingering_right)):
        onsets, pitches, fingers = score.hand_part(hand)
        cache = {}

        def cost(center, onsets=onsets, pitches=pitches, fingers=fingers,
                 hand=hand, fingering=fingering, cache=cache):
            lo, hi = _window_bounds(onsets, center, window)
            if (lo, hi) not in cache:
                wf = None if fingers is None else fingers[lo:hi]
                lp = _sequence_logprob(pitches[lo:hi], wf, hand, model,
                                       gaussian, fingering)
                cache[(lo, hi)] = -lp / window
            return cache[(lo, hi)]

        parts[hand] = cost

    ids = np.array([n.id for n in score.notes], dtype=int)
    onsets = np.array([n.onset for n in score.notes], dtype=float)
    d_left = np.array([parts["L"](t) for t in onsets])
    d_right = np.array([parts["R"](t) for t in onsets])
    return DifficultyProfile(ids, onsets, d_left, d_right, d_left + d_right,
                             window)


def predict_errors(profile, thresholds):
    """Boolean error prediction per note: positive when any of D_L, D_R, D_B
    exceeds its threshold."""
    return ((profile.d_left > thresholds.left)
            | (profile.d_right > thresholds.right)
            | (profile.d_both > thresholds.both))


# ---------------------------------------------------------------------------
# error annotations and prediction metrics
# ---------------------------------------------------------------------------

def attribute_errors(onsets, error_times, window=1.0):
    """Count, per note, the performance errors whose time falls inside the
    note's closed difficulty window."""
    onsets = np.asarray(onsets, dtype=float)
    counts = np.zeros(len(onsets), dtype=int)
    for t in error_times:
        counts += (onsets >= t - window / 2.0) & (onsets <= t + window / 2.0)
    return counts


def write_error_annotations(path, rows):
    """Write per-note error annotations: ``note_id pitch_err extra missing``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# note_id pitch_errors extra_notes missing_notes\n")
        for note_id, pitch_err, extra, missing in rows:
            fh.write(f"{note_id} {pitch_err} {extra} {missing}\n")


def read_error_annotations(path):
    """Read annotations written by write_error_annotations.

    Returns {note_id: (pitch_errors, extra, missing)}; notes absent from the
    file carry zero counts.
    """
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 4:
                raise ScoreError(f"{path}:{lineno}: expected 4 integer columns")
            try:
                nid, pe, ex, mi = (int(p) for p in parts)
            except ValueError:
                raise ScoreError(f"{path}:{lineno}: bad integer") from None
            if min(pe, ex, mi) < 0:
                raise ScoreError(f"{path}:{lineno}: negative error count")
            out[nid] = (pe, ex, mi)
    return out


def error_counts(annotations, note_ids):
    """Total error count per note id (pitch + extra + missing)."""
    return np.array([sum(annotations.get(int(i), (0, 0, 0))) for i in note_ids],
                    dtype=int)


@dataclass(frozen=True)
class PredictionMetrics:
    """Precision/recall/F of boolean error prediction, plus variants that
    weight each note by its error count. ``undefined`` names any ratio whose
    denominator was zero (reported as 0)."""

    precision: float
    recall: float
    f_score: float
    precision_weighted: float
    recall_weighted: float
    f_weighted: float
    true_pos: int
    false_pos: int
    missed: int
    true_pos_weighted: int
    missed_weighted: int
    undefined: frozenset = field(default_factory=frozenset)


def _ratio(num, den, name, undefined):
    if den == 0:
        undefined.add(name)
        return 0.0
    return num / den


def error_prediction_metrics(predicted, counts):
    """Precision, recall and F for a boolean prediction against per-note
    error counts.

    A note is a true positive when predicted positive and carrying at least
    one error; weighted variants replace positive-note counts by their error
    counts (false positives stay unweighted: a clean note contributes 1).
    """
    predicted = np.asarray(predicted, dtype=bool)
    counts = np.asarray(counts, dtype=int)
    if predicted.shape != counts.shape:
        raise ScoreError("prediction and error counts must align")
    has_err = counts > 0
    tp = int((predicted & has_err).sum())
    fp = int((predicted & ~has_err).sum())
    missed = int((~predicted & has_err).sum())
    tp_w = int(counts[predicted & has_err].sum())
    missed_w = int(counts[~predicted & has_err].sum())

    undefined = set()
    precision = _ratio(tp, tp + fp, "precision", undefined)
    recall = _ratio(tp, tp + missed, "recall", undefined)
    f_score = _ratio(2 * precision * recall, precision + recall, "f_score", undefined)
    precision_w = _ratio(tp_w, tp_w + fp, "precision_weighted", undefined)
    recall_w = _ratio(tp_w, tp_w + missed_w, "recall_weighted", undefined)
    f_weighted = _ratio(2 * precision_w * recall_w, precision_w + recall_w,
                        "f_weighted", undefined)
    return PredictionMetrics(precision, recall, f_score, precision_w, recall_w,
                             f_weighted, tp, fp, missed, tp_w, missed_w,
                             frozenset(undefined))


def sweep_thresholds(runs, left_values, right_values, both_values):
    """Grid-search thresholds maximizing the weighted F score.

    Parameters
    ----------
    runs : list of (DifficultyProfile, error count array) pairs, pooled
    left_values, right_values, both_values : candidate threshold axes

    Returns (Thresholds, PredictionMetrics) for the best cell; ties go to
    the lexicographically smallest (left, right, both).
    """
    if not runs:
        raise ScoreError("no profiles to sweep")
    data = [(p.d_left, p.d_right, p.d_both, np.asarray(c, dtype=int))
            for p, c in runs]
    for (dl, _, _, c) in data:
        if len(dl) != len(c):
            raise ScoreError("profile and error counts must align")
    best = None
    for a in sorted(set(float(v) for v in left_values)):
        for b in sorted(set(float(v) for v in right_values)):
            for c in sorted(set(float(v) for v in both_values)):
                pred = np.concatenate([(dl > a) | (dr > b) | (db > c)
                                       for dl, dr, db, _ in data])
                counts = np.concatenate([cnt for _, _, _, cnt in data])
                metrics = error_prediction_metrics(pred, counts)
                if best is None or metrics.f_weighted > best[1].f_weighted:
                    best = (Thresholds(a, b, c), metrics)
    return best


# ---------------------------------------------------------------------------
# profile CSV
# ---------------------------------------------------------------------------

def _fmt(x):
    return f"{x:.6g}"


def write_profile_csv(profile, path):
    """Write a difficulty profile as CSV (note_id, onset, D_L, D_R, D_B)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# window={profile.window!r}\n")
        fh.write("note_id,onset,D_L,D_R,D_B\n")
        for i in range(len(profile)):
            fh.write(f"{int(profile.note_ids[i])},{_fmt(profile.onsets[i])},"
                     f"{_fmt(profile.d_left[i])},{_fmt(profile.d_right[i])},"
                     f"{_fmt(profile.d_both[i])}\n")


def read_profile_csv(path):
    """Read a profile written by write_profile_csv."""
    window = math.nan
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "window=" in line:
                    window = float(line.split("window=", 1)[1])
                continue
            if line.startswith("note_id"):
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise ScoreError(f"{path}:{lineno}: expected 5 columns")
            try:
                rows.append((int(parts[0]),) + tuple(float(v) for v in parts[1:]))
            except ValueError:
                raise ScoreError(f"{path}:{lineno}: bad value") from None
    if not rows:
        raise ScoreError(f"{path}: empty profile")
    ids, onsets, dl, dr, db = (np.array(col) for col in zip(*rows))
    return DifficultyProfile(ids.astype(int), onsets, dl, dr, db, window)
