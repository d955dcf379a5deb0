"""Log-space Viterbi decoders.

Contains a generic dense Viterbi routine, the fingering decoder, and the
merged two-hand decoders (hand separation, reduction with note deletion,
and clamped-region re-decoding). The merged decoders run on a pruned
lattice: each hand's sub-state space is restricted to pitches that can
actually emit an observed note (the observed pitches and, for reduction,
their octave shifts), plus one pseudo sub-state for "hand not used yet".
A hand's model chain starts at its first emission with the model's initial
probability. Ties are broken deterministically: arriving branches at a
grid cell prefer skip, then the left hand, then the lower previous index;
between equally good final cells the lowest (left, right) grid pair wins
row-major, so a cell where the left hand stays unused sorts first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import (
    EditParams, GaussianParams, DistanceParams, HandWeights,
    UNIFORM_PITCH_LOGP, _gauss_tables, default_fingering_params,
    distance_pitch_prob, octave_shift_prob,
)
from .score import PITCH_MAX, PITCH_MIN

__all__ = [
    "DecodeError", "DecodedPath", "HandSub", "MergedState",
    "SeparationResult", "viterbi", "decode_fingering", "separate_hands",
    "decode_reduction", "decode_region", "score_reduction_path",
]

NEG_INF = -np.inf


class DecodeError(ValueError):
    """No feasible path, or malformed decoder input."""


@dataclass(frozen=True)
class DecodedPath:
    """A best path: one state per observation plus its joint log-probability."""

    states: tuple
    log_prob: float


@dataclass(frozen=True)
class HandSub:
    """Sub-state of one hand: the finger on a key (finger is None for
    pitch-only models)."""

    finger: int | None
    pitch: int


@dataclass(frozen=True)
class MergedState:
    """Joint state of the two-hand decoders.

    ``hand`` names which hand emitted the note ('L'/'R') or None when the
    note was skipped; ``left``/``right`` are the hands' sub-states (None
    until a hand's first emission).
    """

    hand: str | None
    left: HandSub | None
    right: HandSub | None


@dataclass(frozen=True)
class SeparationResult:
    """Hand separation output: a hand label and a finger per note."""

    hands: tuple
    fingers: tuple
    log_prob: float
    states: tuple


# ---------------------------------------------------------------------------
# generic Viterbi
# ---------------------------------------------------------------------------

def viterbi(init_logp, trans_logp, out_logp, observations):
    """Max-product decoding of a discrete HMM in log space.

    Parameters
    ----------
    init_logp : (S,) initial log-probabilities
    trans_logp : (S, S) matrix, or a sequence of per-step matrices (entry t-1
        used for the step into observation t), or a callable (t, i, j)
    out_logp : callable (state index, observation) -> log-probability
    observations : the observation sequence

    Returns
    -------
    DecodedPath with one state index per observation. Ties break toward the
    lower-indexed state. Raises DecodeError when every path has zero
    probability, naming the first dead observation index.
    """
    obs = list(observations)
    if not obs:
        raise DecodeError("empty observation sequence")
    init = np.asarray(init_logp, dtype=float)
    n_states = len(init)

    def trans_at(t):
        if callable(trans_logp):
            return np.array([[trans_logp(t, i, j) for j in range(n_states)]
                             for i in range(n_states)])
        arr = np.asarray(trans_logp, dtype=float)
        if arr.ndim == 2:
            return arr
        return np.asarray(trans_logp[t - 1], dtype=float)

    def out_at(t):
        return np.array([out_logp(s, obs[t]) for s in range(n_states)])

    scores = init + out_at(0)
    if not np.isfinite(scores.max()):
        raise DecodeError("no feasible state at observation 0")
    backs = []
    for t in range(1, len(obs)):
        step = scores[:, None] + trans_at(t)
        backs.append(step.argmax(axis=0))
        scores = step.max(axis=0) + out_at(t)
        if not np.isfinite(scores.max()):
            raise DecodeError(f"no feasible state at observation {t}")
    state = int(scores.argmax())
    path = [state]
    for back in reversed(backs):
        state = int(back[state])
        path.append(state)
    path.reverse()
    return DecodedPath(tuple(path), float(scores.max()))


def decode_fingering(pitches, params=None):
    """Most probable fingering of a single-hand pitch sequence.

    Returns a DecodedPath whose states are fingers 1..5 and whose log_prob
    is the joint log-probability of pitches and fingers.
    """
    pitches = list(pitches)
    if not pitches:
        raise DecodeError("empty pitch sequence")
    params = params or default_fingering_params("R")
    tables = params._tables()
    init = tables["log_init"] + UNIFORM_PITCH_LOGP
    steps = [
        tables["log_trans"]
        + tables["log_move"][prev - PITCH_MIN, :, :, cur - PITCH_MIN]
        for prev, cur in zip(pitches, pitches[1:])
    ]
    path = viterbi(init, steps, lambda s, o: 0.0, pitches)
    return DecodedPath(tuple(s + 1 for s in path.states), path.log_prob)


# ---------------------------------------------------------------------------
# hand lattices for the merged decoders
# ---------------------------------------------------------------------------

class _GaussianLattice:
    """Pitch-only sub-states under the Gaussian random-walk model."""

    def __init__(self, hand, cand_pitches, params):
        tables = _gauss_tables(params or GaussianParams())
        self.subs = [HandSub(None, int(p)) for p in cand_pitches]
        idx = np.asarray(cand_pitches, dtype=int) - PITCH_MIN
        self._entry = tables["log_init"][hand][idx]
        self._step = tables["log_trans"][np.ix_(idx, idx)]
        self.n_grid = len(self.subs) + 1
        self._by_pitch = {s.pitch: np.array([g + 1]) for g, s in enumerate(self.subs)}

    def emit(self, pitch):
        return self._by_pitch.get(pitch, np.empty(0, dtype=int))

    def entry_logw(self, slot, grid_idx):
        return self._entry[grid_idx - 1]

    def step_logw(self, slot, grid_idx):
        return self._step[:, grid_idx - 1]


class _FingeringLattice:
    """(finger, pitch) sub-states under the fingering model, ordered by
    (finger, pitch)."""

    def __init__(self, cand_pitches, params):
        tables = params._tables()
        pitches = np.asarray(cand_pitches, dtype=int)
        self.subs = [HandSub(f, int(p)) for f in range(1, 6) for p in pitches]
        f_idx = np.repeat(np.arange(5), len(pitches))
        p_idx = np.tile(pitches - PITCH_MIN, 5)
        self._entry = tables["log_init"][f_idx] + UNIFORM_PITCH_LOGP
        self._step = (tables["log_trans"][f_idx[:, None], f_idx[None, :]]
                      + tables["log_move"][p_idx[:, None], f_idx[:, None],
                                           f_idx[None, :], p_idx[None, :]])
        self.n_grid = len(self.subs) + 1
        self._by_pitch = {}
        for g, s in enumerate(self.subs):
            self._by_pitch.setdefault(s.pitch, []).append(g + 1)
        self._by_pitch = {p: np.array(v) for p, v in self._by_pitch.items()}

    def emit(self, pitch):
        return self._by_pitch.get(pitch, np.empty(0, dtype=int))

    def entry_logw(self, slot, grid_idx):
        return self._entry[grid_idx - 1]

    def step_logw(self, slot, grid_idx):
        return self._step[:, grid_idx - 1]


class _DistanceLattice:
    """Pitch sub-states under the melody/bass-distance baseline; the pitch
    distribution depends only on the slot, not on the previous state."""

    def __init__(self, cand_pitches, score, params):
        params = params or DistanceParams()
        pitches = np.asarray(cand_pitches, dtype=int)
        self.subs = [HandSub(None, int(p)) for p in pitches]
        idx = pitches - PITCH_MIN
        with np.errstate(divide="ignore"):
            self._rows = np.stack([
                np.log(distance_pitch_prob(m, score, params))[idx]
                for m in range(len(score.notes))
            ])
        self.n_grid = len(self.subs) + 1
        self._by_pitch = {s.pitch: np.array([g + 1]) for g, s in enumerate(self.subs)}

    def emit(self, pitch):
        return self._by_pitch.get(pitch, np.empty(0, dtype=int))

    def entry_logw(self, slot, grid_idx):
        return self._rows[slot, grid_idx - 1]

    def step_logw(self, slot, grid_idx):
        row = self._rows[slot, grid_idx - 1]
        return np.broadcast_to(row, (self.n_grid - 1, len(grid_idx)))


@dataclass
class _Slot:
    """Per-note branch weights and emission candidates for the merged engine.

    ``index`` is the note's index in the full score, which slot-dependent
    lattices (the distance baseline) need even when only a region is
    decoded.
    """

    index: int
    skip_logw: float | None
    left_w: float
    right_w: float
    left_cands: np.ndarray
    left_out: np.ndarray
    right_cands: np.ndarray
    right_out: np.ndarray


def _merged_decode(left, right, slots, start_cell=(0, 0), end_logw=None, beam=None):
    """Viterbi over the joint (left sub, right sub) grid.

    Grid index 0 of each axis is the hand's "not used yet" state. Returns
    (cells, branch ids, log_prob) for the best path.
    """
    n_l, n_r = left.n_grid, right.n_grid
    grid = np.full((n_l, n_r), NEG_INF)
    grid[start_cell] = 0.0
    back_branch = []
    back_prev = []

    for t, slot in enumerate(slots):
        if slot.skip_logw is None:
            nxt = np.full((n_l, n_r), NEG_INF)
        else:
            nxt = grid + slot.skip_logw
        branch = np.zeros((n_l, n_r), dtype=np.uint8)
        prev = np.zeros((n_l, n_r), dtype=np.uint16)

        if len(slot.left_cands):
            trans = np.empty((n_l, len(slot.left_cands)))
            trans[0] = left.entry_logw(slot.index, slot.left_cands)
            trans[1:] = left.step_logw(slot.index, slot.left_cands)
            for j, g in enumerate(slot.left_cands):
                col = grid + trans[:, j][:, None]
                best = col.max(axis=0) + slot.left_w + slot.left_out[j]
                better = best > nxt[g]
                if better.any():
                    arg = col.argmax(axis=0)
                    nxt[g] = np.where(better, best, nxt[g])
                    branch[g] = np.where(better, 1, branch[g])
                    prev[g] = np.where(better, arg, prev[g])

        if len(slot.right_cands):
            trans = np.empty((n_r, len(slot.right_cands)))
            trans[0] = right.entry_logw(slot.index, slot.right_cands)
            trans[1:] = right.step_logw(slot.index, slot.right_cands)
            for j, g in enumerate(slot.right_cands):
                row = grid + trans[:, j][None, :]
                best = row.max(axis=1) + slot.right_w + slot.right_out[j]
                better = best > nxt[:, g]
                if better.any():
                    arg = row.argmax(axis=1)
                    nxt[:, g] = np.where(better, best, nxt[:, g])
                    branch[:, g] = np.where(better, 2, branch[:, g])
                    prev[:, g] = np.where(better, arg, prev[:, g])

        if beam is not None and beam > 0:
            flat = nxt.ravel()
            live = np.isfinite(flat)
            if live.sum() > beam:
                cutoff = np.partition(flat[live], -beam)[-beam]
                flat[flat < cutoff] = NEG_INF

        grid = nxt
        if not np.isfinite(grid.max()):
            raise DecodeError(f"no feasible state at note {slot.index}")
        back_branch.append(branch)
        back_prev.append(prev)

    if end_logw is not None:
        grid = grid + end_logw
        if not np.isfinite(grid.max()):
            raise DecodeError("no state compatible with the clamped boundary")

    flat_best = int(grid.argmax())  # row-major: lowest (left, right) wins ties
    cell = np.unravel_index(flat_best, grid.shape)
    log_prob = float(grid[cell])
    cells = [cell]
    branches = []
    for t in range(len(slots) - 1, -1, -1):
        b = int(back_branch[t][cell])
        p = int(back_prev[t][cell])
        branches.append(b)
        if b == 0:
            pass
        elif b == 1:
            cell = (p, cell[1])
        else:
            cell = (cell[0], p)
        if t:
            cells.append(cell)
    cells.reverse()
    branches.reverse()
    return cells, branches, log_prob


def _states_from_cells(left, right, cells, branches):
    out = []
    for (gl, gr), b in zip(cells, branches):
        hand = (None, "L", "R")[b]
        sub_l = left.subs[gl - 1] if gl else None
        sub_r = right.subs[gr - 1] if gr else None
        out.append(MergedState(hand, sub_l, sub_r))
    return tuple(out)


# ---------------------------------------------------------------------------
# hand separation
# ---------------------------------------------------------------------------

def separate_hands(pitches, left_params=None, right_params=None, weights=None):
    """Assign each note of a pitch sequence to a hand.

    Decodes the merged two-hand fingering model in which every note is
    emitted by exactly one hand and the other hand's state persists.

    Returns a SeparationResult with per-note hand labels ('L'/'R') and the
    emitting hand's finger.
    """
    pitches = [int(p) for p in pitches]
    if not pitches:
        raise DecodeError("empty pitch sequence")
    for p in pitches:
        if not PITCH_MIN <= p <= PITCH_MAX:
            raise DecodeError(f"pitch {p} outside key range")
    left_params = left_params or default_fingering_params("L")
    right_params = right_params or default_fingering_params("R")
    weights = weights or HandWeights()
    cand = sorted(set(pitches))
    left = _FingeringLattice(cand, left_params)
    right = _FingeringLattice(cand, right_params)
    log_l = math.log(weights.left) if weights.left > 0 else NEG_INF
    log_r = math.log(weights.right) if weights.right > 0 else NEG_INF
    slots = []
    for i, p in enumerate(pitches):
        lc = left.emit(p)
        rc = right.emit(p)
        slots.append(_Slot(i, None, log_l, log_r,
                           lc, np.zeros(len(lc)), rc, np.zeros(len(rc))))
    cells, branches, log_prob = _merged_decode(left, right, slots)
    states = _states_from_cells(left, right, cells, branches)
    hands = tuple(s.hand for s in states)
    fingers = tuple((s.left if s.hand == "L" else s.right).finger for s in states)
    return SeparationResult(hands, fingers, log_prob, states)


# ---------------------------------------------------------------------------
# reduction decoding
# ---------------------------------------------------------------------------

def _octave_candidates(pitch):
    return [q for q in (pitch - 12, pitch, pitch + 12) if PITCH_MIN <= q <= PITCH_MAX]


def _reduction_lattices(score, model, gaussian, fingering_left, fingering_right,
                        distance):
    universe = sorted({q for n in score.notes for q in _octave_candidates(n.pitch)})
    if model == "gaussian":
        left = _GaussianLattice("L", universe, gaussian)
        right = _GaussianLattice("R", universe, gaussian)
    elif model == "fingering":
        left = _FingeringLattice(universe, fingering_left or default_fingering_params("L"))
        right = _FingeringLattice(universe, fingering_right or default_fingering_params("R"))
    elif model == "distance":
        left = _DistanceLattice(universe, score, distance)
        right = _DistanceLattice(universe, score, distance)
    else:
        raise DecodeError(f"unknown reduction model {model!r}")
    return left, right


def _reduction_slots(score, skip_probs, edit, left, right, start=0, stop=None):
    stop = len(score.notes) if stop is None else stop
    skip_probs = np.asarray(skip_probs, dtype=float)
    if skip_probs.shape != (len(score.notes),):
        raise DecodeError("one skip probability per note required")
    if (skip_probs < 0).any() or (skip_probs > 1).any():
        raise DecodeError("skip probabilities must lie in [0, 1]")
    out_cache = {}
    slots = []
    for m in range(start, stop):
        pitch = score.notes[m].pitch
        cands = out_cache.get(pitch)
        if cands is None:
            lc = np.sort(np.concatenate(
                [left.emit(q) for q in _octave_candidates(pitch)]))
            rc = np.sort(np.concatenate(
                [right.emit(q) for q in _octave_candidates(pitch)]))
            with np.errstate(divide="ignore"):
                lo = np.log([octave_shift_prob(left.subs[g - 1].pitch, pitch, edit)
                             for g in lc])
                ro = np.log([octave_shift_prob(right.subs[g - 1].pitch, pitch, edit)
                             for g in rc])
            cands = (lc, lo, rc, ro)
            out_cache[pitch] = cands
        lc, lo, rc, ro = cands
        b_np = skip_probs[m]
        keep = (1.0 - b_np) / 2.0
        skip_w = (math.log(b_np) if b_np > 0 else NEG_INF) + UNIFORM_PITCH_LOGP
        keep_w = math.log(keep) if keep > 0 else NEG_INF
        slots.append(_Slot(m, skip_w, keep_w, keep_w, lc, lo, rc, ro))
    return slots


def decode_reduction(score, skip_probs, edit=None, model="gaussian", *,
                     gaussian=None, fingering_left=None, fingering_right=None,
                     distance=None, beam=None):
    """Best reduction path of a condensed score.

    Each note is either skipped (probability ``skip_probs[m]``, explained by
    a uniform pitch draw) or taken over by one hand at its own pitch or an
    octave shift of it, scored by the hand's sequence model and the octave
    edit channel.

    Returns a DecodedPath of MergedState values.
    """
    edit = edit or EditParams()
    left, right = _reduction_lattices(score, model, gaussian,
                                      fingering_left, fingering_right, distance)
    slots = _reduction_slots(score, skip_probs, edit, left, right)
    cells, branches, log_prob = _merged_decode(left, right, slots, beam=beam)
    return DecodedPath(_states_from_cells(left, right, cells, branches), log_prob)


def _grid_index(lattice, sub):
    if sub is None:
        return 0
    for g, s in enumerate(lattice.subs):
        if s == sub:
            return g + 1
    raise DecodeError(f"boundary sub-state {sub} not in lattice")


def decode_region(score, skip_probs, start, stop, *, left_state=None,
                  next_state=None, edit=None, model="gaussian",
                  gaussian=None, fingering_left=None, fingering_right=None,
                  distance=None, beam=None):
    """Re-decode notes [start, stop) with the surrounding path clamped.

    ``left_state`` is the path state at note start-1 (None when the region
    begins the score); ``next_state`` the state at note stop (None when the
    region ends the score). The reported log_prob covers the in-region
    terms plus the transition into ``next_state``.
    """
    n = len(score.notes)
    if not (0 <= start < stop <= n):
        raise DecodeError(f"bad region [{start}, {stop}) for {n} notes")
    edit = edit or EditParams()
    left, right = _reduction_lattices(score, model, gaussian,
                                      fingering_left, fingering_right, distance)
    slots = _reduction_slots(score, skip_probs, edit, left, right, start, stop)

    if left_state is None:
        start_cell = (0, 0)
    else:
        start_cell = (_grid_index(left, left_state.left),
                      _grid_index(right, left_state.right))

    end_logw = None
    if next_state is not None:
        end_logw = np.full((left.n_grid, right.n_grid), NEG_INF)
        gl = _grid_index(left, next_state.left)
        gr = _grid_index(right, next_state.right)
        if next_state.hand is None:
            end_logw[gl, gr] = 0.0
        elif next_state.hand == "L":
            col = np.empty(left.n_grid)
            col[0] = left.entry_logw(stop, np.array([gl]))[0]
            col[1:] = left.step_logw(stop, np.array([gl]))[:, 0]
            end_logw[:, gr] = col
        else:
            row = np.empty(right.n_grid)
            row[0] = right.entry_logw(stop, np.array([gr]))[0]
            row[1:] = right.step_logw(stop, np.array([gr]))[:, 0]
            end_logw[gl, :] = row

    cells, branches, log_prob = _merged_decode(left, right, slots,
                                               start_cell=start_cell,
                                               end_logw=end_logw, beam=beam)
    return DecodedPath(_states_from_cells(left, right, cells, branches), log_prob)


def score_reduction_path(score, skip_probs, states, edit=None, model="gaussian",
                         *, gaussian=None, fingering_left=None,
                         fingering_right=None, distance=None):
    """Joint log-probability of an arbitrary reduction state sequence.

    Recomputes every branch, transition and output term along ``states``
    and validates persistence (a non-emitting hand's sub-state must not
    change). Useful to re-score spliced paths and to cross-check decoders.
    """
    edit = edit or EditParams()
    skip_probs = np.asarray(skip_probs, dtype=float)
    if len(states) != len(score.notes) or skip_probs.shape != (len(states),):
        raise DecodeError("states and skip probabilities must cover the score")

    if model == "gaussian":
        tables = _gauss_tables(gaussian or GaussianParams())

        def hand_logp(hand, prev, sub, slot):
            if prev is None:
                return tables["log_init"][hand][sub.pitch - PITCH_MIN]
            return tables["log_trans"][prev.pitch - PITCH_MIN,
                                       sub.pitch - PITCH_MIN]
    elif model == "fingering":
        params = {"L": fingering_left or default_fingering_params("L"),
                  "R": fingering_right or default_fingering_params("R")}

        def hand_logp(hand, prev, sub, slot):
            t = params[hand]._tables()
            if prev is None:
                return t["log_init"][sub.finger - 1] + UNIFORM_PITCH_LOGP
            return (t["log_trans"][prev.finger - 1, sub.finger - 1]
                    + t["log_move"][prev.pitch - PITCH_MIN, prev.finger - 1,
                                    sub.finger - 1, sub.pitch - PITCH_MIN])
    elif model == "distance":

        def hand_logp(hand, prev, sub, slot):
            probs = distance_pitch_prob(slot, score, distance)
            p = probs[sub.pitch - PITCH_MIN]
            return math.log(p) if p > 0 else NEG_INF
    else:
        raise DecodeError(f"unknown reduction model {model!r}")

    total = 0.0
    cur = {"L": None, "R": None}
    for m, state in enumerate(states):
        b_np = float(skip_probs[m])
        if state.hand is None:
            if state.left != cur["L"] or state.right != cur["R"]:
                raise DecodeError(f"note {m}: sub-states changed on a skip")
            total += (math.log(b_np) if b_np > 0 else NEG_INF) + UNIFORM_PITCH_LOGP
            continue
        keep = (1.0 - b_np) / 2.0
        sub = state.left if state.hand == "L" else state.right
        other = state.right if state.hand == "L" else state.left
        other_cur = cur["R"] if state.hand == "L" else cur["L"]
        if sub is None:
            raise DecodeError(f"note {m}: emitting hand has no sub-state")
        if other != other_cur:
            raise DecodeError(f"note {m}: idle hand's sub-state changed")
        out = octave_shift_prob(sub.pitch, score.notes[m].pitch, edit)
        total += (math.log(keep) if keep > 0 else NEG_INF)
        total += hand_logp(state.hand, cur[state.hand], sub, m)
        total += math.log(out) if out > 0 else NEG_INF
        cur[state.hand] = sub
    return float(total)
