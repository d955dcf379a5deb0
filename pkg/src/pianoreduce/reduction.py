"""Difficulty-constrained piano reduction.

Couples the merged reduction decoder with the windowed difficulty measure:
per-note deletion probabilities rise as a control factor in [0, 1] falls,
either set once from ensemble-difficulty ratios (one-time) or lowered
geometrically in violating regions until the reduction satisfies the
difficulty targets (iterative).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .decoder import (DecodedPath, decode_reduction, decode_region,
                      score_reduction_path, separate_hands)
from .difficulty import difficulty_profile
from .models import EditParams, GaussianParams, ModelError, importance_weights
from .score import NoteEvent, PianoScore, ScoreError

__all__ = [
    "TargetDifficulty", "PRESETS", "ControlState", "IterationRecord",
    "ReductionResult", "deletion_prob", "deletion_probs",
    "ensemble_difficulty", "one_time_control", "one_time_reduce",
    "violation_regions", "iterative_reduce", "reduction_piano_score",
    "export_reduction", "RHO_GRID",
]

REDUCTION_MODELS = ("gaussian", "fingering", "distance")

#: candidate control scales for matching the one-time method to a target
RHO_GRID = tuple(round(0.1 * k, 1) for k in range(1, 11))


@dataclass(frozen=True)
class TargetDifficulty:
    """Upper difficulty targets for the left hand, right hand and both."""

    left: float
    right: float
    both: float

    def __post_init__(self):
        for v in (self.left, self.right, self.both):
            if not math.isfinite(v) or v <= 0:
                raise ModelError("difficulty targets must be finite and > 0")


PRESETS = {
    "easy": TargetDifficulty(15.0, 15.0, 30.0),
    "medium": TargetDifficulty(30.0, 30.0, 40.0),
    "hard": TargetDifficulty(40.0, 40.0, 50.0),
}


@dataclass(frozen=True)
class ControlState:
    """Per-note control factors plus the update schedule that produced them."""

    values: np.ndarray
    iteration: int
    decay: float = 0.85
    floor: float = 1e-6
    max_iterations: int = 50

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if (values < 0).any() or (values > 1).any():
            raise ModelError("control values must lie in [0, 1]")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class IterationRecord:
    """One optimizer pass: violation count, re-decoded regions, and the
    control values after this pass's update."""

    iteration: int
    violations: int
    regions: tuple
    control_values: np.ndarray


@dataclass(frozen=True)
class ReductionResult:
    """A finished reduction.

    ``notes`` are the kept notes (fresh ids, track 0 = left hand, 1 = right)
    with ``hands``/``fingers``/``source_ids`` aligned to them; ``provenance``
    has one entry per source note: 'kept', 'shifted+12', 'shifted-12' or
    'deleted'.
    """

    source: object
    notes: tuple
    hands: tuple
    fingers: tuple
    source_ids: tuple
    provenance: tuple
    control: ControlState
    profile: DifficultyProfile
    iterations: int
    termination: str
    log_prob: float
    history: tuple


def deletion_prob(control, importance, params=None):
    """Probability of the skip branch for one note:
    (1 - control) * exp(-importance_gain * importance)."""
    params = params or EditParams()
    if not 0.0 <= control <= 1.0:
        raise ModelError("control must lie in [0, 1]")
    return (1.0 - control) * math.exp(-params.importance_gain * importance)


def deletion_probs(score, control_values, params=None):
    """Vector of skip probabilities for a condensed score."""
    params = params or EditParams()
    values = np.asarray(control_values, dtype=float)
    if values.shape != (len(score.notes),):
        raise ModelError("one control value per note required")
    if (values < 0).any() or (values > 1).any():
        raise ModelError("control values must lie in [0, 1]")
    h = importance_weights(score, params)
    return (1.0 - values) * np.exp(-params.importance_gain * h)


def ensemble_difficulty(score, *, window=1.0, gaussian=None,
                        fingering_left=None, fingering_right=None,
                        weights=None):
    """Difficulty profile of the unreduced ensemble score.

    Hands are assigned by merged-model hand separation, then the Gaussian
    windowed difficulty is evaluated at every note.
    """
    sep = separate_hands([n.pitch for n in score.notes],
                         fingering_left, fingering_right, weights)
    piano = PianoScore(score.notes, sep.hands)
    return difficulty_profile(piano, "gaussian", window, gaussian=gaussian)


def one_time_control(profile, targets, scale, include_both=False):
    """Control factors from ensemble-difficulty ratios.

    Per note: scale * min over hands of target/difficulty, clamped to
    [0, 1]; hands with zero difficulty are excluded from the min, and the
    both-hands ratio participates only when ``include_both`` is set.
    """
    if scale < 0:
        raise ModelError("scale must be >= 0")
    ratios = []
    for d, t in ((profile.d_left, targets.left), (profile.d_right, targets.right)):
        with np.errstate(divide="ignore"):
            ratios.append(np.where(d > 0, t / np.where(d > 0, d, 1.0), np.inf))
    if include_both:
        d = profile.d_both
        ratios.append(np.where(d > 0, targets.both / np.where(d > 0, d, 1.0), np.inf))
    best = np.minimum.reduce(ratios)
    values = scale * np.where(np.isfinite(best), best, 1.0 / scale if scale > 0 else 1.0)
    return np.clip(values, 0.0, 1.0)


def _result_from_path(score, path, control, iterations, termination, history,
                      window, difficulty_gaussian):
    notes, hands, fingers, source_ids = [], [], [], []
    provenance = []
    for m, state in enumerate(path.states):
        src = score.notes[m]
        if state.hand is None:
            provenance.append("deleted")
            continue
        sub = state.left if state.hand == "L" else state.right
        shift = sub.pitch - src.pitch
        provenance.append({0: "kept", 12: "shifted+12", -12: "shifted-12"}[shift])
        notes.append(NoteEvent(len(notes), src.onset, sub.pitch,
                               0 if state.hand == "L" else 1, src.duration))
        hands.append(state.hand)
        fingers.append(sub.finger)
        source_ids.append(src.id)
    piano = PianoScore(tuple(notes), tuple(hands))
    profile = difficulty_profile(piano, "gaussian", window,
                                 gaussian=difficulty_gaussian)
    return ReductionResult(score, tuple(notes), tuple(hands), tuple(fingers),
                           tuple(source_ids), tuple(provenance), control,
                           profile, iterations, termination, path.log_prob,
                           tuple(history))


def one_time_reduce(score, targets, scale=0.5, model="gaussian", *,
                    edit=None, window=1.0, include_both=False, gaussian=None,
                    fingering_left=None, fingering_right=None, distance=None,
                    hand_weights=None, ensemble=None, beam=None):
    """Reduce with control factors fixed once from the ensemble difficulty.

    ``ensemble`` may carry a precomputed ensemble difficulty profile (e.g.
    when sweeping ``scale``); otherwise it is computed here.
    """
    if model not in REDUCTION_MODELS:
        raise ModelError(f"unknown reduction model {model!r}")
    edit = edit or EditParams()
    if ensemble is None:
        ensemble = ensemble_difficulty(score, window=window, gaussian=gaussian,
                                       fingering_left=fingering_left,
                                       fingering_right=fingering_right,
                                       weights=hand_weights)
    values = one_time_control(ensemble, targets, scale, include_both)
    control = ControlState(values, iteration=1)
    path = decode_reduction(score, deletion_probs(score, values, edit), edit,
                            model, gaussian=gaussian,
                            fingering_left=fingering_left,
                            fingering_right=fingering_right,
                            distance=distance, beam=beam)
    return _result_from_path(score, path, control, 1, "one_time", (),
                             window, gaussian)


def violation_regions(score, profile, targets, window=1.0):
    """Contiguous source-note regions implicated by difficulty violations.

    A reduction note violates the targets when any of its difficulty values
    reaches or exceeds the corresponding target; every source note whose
    onset falls in the violating note's window is implicated. Returns
    maximal runs of implicated indices as half-open (start, stop) pairs.
    """
    onsets = score.onsets()
    mask = np.zeros(len(onsets), dtype=bool)
    bad = ((profile.d_left >= targets.left)
           | (profile.d_right >= targets.right)
           | (profile.d_both >= targets.both))
    for t in profile.onsets[bad]:
        lo = np.searchsorted(onsets, t - window / 2.0, side="left")
        hi = np.searchsorted(onsets, t + window / 2.0, side="right")
        mask[lo:hi] = True
    regions = []
    start = None
    for i, flagged in enumerate(mask):
        if flagged and start is None:
            start = i
        elif not flagged and start is not None:
            regions.append((start, i))
            start = None
    if start is not None:
        regions.append((start, len(mask)))
    return regions


def iterative_reduce(score, targets, model="gaussian", *, edit=None,
                     window=1.0, decay=0.85, max_iterations=50, floor=1e-6,
                     gaussian=None, fingering_left=None, fingering_right=None,
                     distance=None, beam=None):
    """Reduce by lowering control factors in violating regions until the
    difficulty targets hold everywhere.

    Starts from control 1 (no difficulty pressure), decodes, then repeats:
    evaluate the reduction's difficulty, find violating regions, decay the
    control of every source note inside them (never below ``floor``), and
    re-decode those regions with the surrounding path clamped. Stops when no
    region violates ('converged'), after ``max_iterations`` passes
    ('max_iterations'), or when every implicated control value is already at
    the floor ('zeta_floor').
    """
    if model not in REDUCTION_MODELS:
        raise ModelError(f"unknown reduction model {model!r}")
    if not 0.0 < decay < 1.0:
        raise ModelError("decay must lie in (0, 1)")
    if max_iterations < 1:
        raise ModelError("max_iterations must be >= 1")
    if not 0.0 < floor <= 1.0:
        raise ModelError("floor must lie in (0, 1]")
    edit = edit or EditParams()
    n = len(score.notes)
    if n == 0:
        raise ScoreError("empty score")
    model_kw = dict(gaussian=gaussian, fingering_left=fingering_left,
                    fingering_right=fingering_right, distance=distance,
                    beam=beam)

    values = np.ones(n)
    path = decode_reduction(score, deletion_probs(score, values, edit), edit,
                            model, **model_kw)
    iteration = 1
    history = []
    while True:
        profile = _reduction_profile(score, path, window, gaussian)
        regions = violation_regions(score, profile, targets, window)
        violations = int(((profile.d_left >= targets.left)
                          | (profile.d_right >= targets.right)
                          | (profile.d_both >= targets.both)).sum())
        if not regions:
            termination = "converged"
        elif iteration >= max_iterations:
            termination = "max_iterations"
        else:
            implicated = np.zeros(n, dtype=bool)
            for s, e in regions:
                implicated[s:e] = True
            if (values[implicated] <= floor).all():
                termination = "zeta_floor"
            else:
                termination = None
        if termination is not None:
            history.append(IterationRecord(iteration, violations,
                                           tuple(regions), values.copy()))
            break

        values = values.copy()
        values[implicated] = np.maximum(decay * values[implicated], floor)
        skip = deletion_probs(score, values, edit)
        states = list(path.states)
        for s, e in regions:
            left_state = states[s - 1] if s > 0 else None
            next_state = states[e] if e < n else None
            part = decode_region(score, skip, s, e, left_state=left_state,
                                 next_state=next_state, edit=edit, model=model,
                                 **model_kw)
            states[s:e] = part.states
        path = DecodedPath(tuple(states), math.nan)
        history.append(IterationRecord(iteration, violations, tuple(regions),
                                       values.copy()))
        iteration += 1

    log_prob = score_reduction_path(score, deletion_probs(score, values, edit),
                                    path.states, edit, model,
                                    **{k: v for k, v in model_kw.items()
                                       if k != "beam"})
    path = DecodedPath(path.states, log_prob)
    control = ControlState(values, iteration, decay, floor, max_iterations)
    return _result_from_path(score, path, control, iteration, termination,
                             history, window, gaussian)


def _reduction_profile(score, path, window, gaussian):
    notes, hands = [], []
    for m, state in enumerate(path.states):
        if state.hand is None:
            continue
        sub = state.left if state.hand == "L" else state.right
        src = score.notes[m]
        notes.append(NoteEvent(len(notes), src.onset, sub.pitch,
                               0 if state.hand == "L" else 1, src.duration))
        hands.append(state.hand)
    piano = PianoScore(tuple(notes), tuple(hands))
    return difficulty_profile(piano, "gaussian", window, gaussian=gaussian)


def reduction_piano_score(result):
    """The kept notes of a reduction as a PianoScore."""
    fingers = None
    if any(f is not None for f in result.fingers):
        fingers = result.fingers
    return PianoScore(result.notes, result.hands, fingers)


def export_reduction(result, smf_path, sidecar_path=None):
    """Write a reduction as a two-track MIDI file plus a sidecar CSV.

    The MIDI file has a tempo track followed by the left-hand and
    right-hand tracks. The sidecar has one row per source note:
    note_id,source_id,hand,finger,pitch,provenance,zeta_final (note fields
    empty for deleted notes).
    """
    from .smf import write_smf
    left = [(n.onset, n.pitch, n.duration) for n, h in
            zip(result.notes, result.hands) if h == "L"]
    right = [(n.onset, n.pitch, n.duration) for n, h in
             zip(result.notes, result.hands) if h == "R"]
    write_smf(smf_path, [left, right])
    if sidecar_path is None:
        return
    by_source = {}
    for i, sid in enumerate(result.source_ids):
        by_source[sid] = i
    with open(sidecar_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("note_id,source_id,hand,finger,pitch,provenance,zeta_final\n")
        for m, src in enumerate(result.source.notes):
            control = f"{result.control.values[m]:.6g}"
            i = by_source.get(src.id)
            if i is None:
                fh.write(f",{src.id},,,,deleted,{control}\n")
            else:
                finger = result.fingers[i]
                fh.write(f"{result.notes[i].id},{src.id},{result.hands[i]},"
                         f"{'' if finger is None else finger},"
                         f"{result.notes[i].pitch},{result.provenance[m]},"
                         f"{control}\n")
