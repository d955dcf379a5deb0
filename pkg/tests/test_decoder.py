"""Viterbi decoders: generic routine, fingering, separation, reduction."""

import math

import numpy as np
import pytest

from pianoreduce.decoder import (DecodeError, DecodedPath, HandSub,
                                 MergedState, decode_fingering,
                                 decode_region, decode_reduction,
                                 score_reduction_path, separate_hands,
                                 viterbi)
from pianoreduce.models import (EditParams, GaussianParams, HandWeights,
                                default_fingering_params)
from pianoreduce.score import condense, ingest

import _oracles as orc

LN_KEYS = math.log(88)


def make_condensed(pitches, onsets=None, melodic=(), bass=()):
    if onsets is None:
        onsets = [0.5 * i for i in range(len(pitches))]
    notes = ingest([(t, int(p), 0, 0.4) for t, p in zip(onsets, pitches)])
    cond = condense(notes)
    return cond.with_flags(melodic_ids=melodic, bass_ids=bass)


def path_score(init, trans, out, states):
    lp = init[states[0]] + out[0, states[0]]
    for t in range(1, len(states)):
        lp += trans[states[t - 1], states[t]] + out[t, states[t]]
    return lp


# ---------------------------------------------------------------------------
# generic Viterbi
# ---------------------------------------------------------------------------

def test_viterbi_matches_exhaustive_random():
    rng = np.random.default_rng(401)
    for _ in range(60):
        n_states = int(rng.integers(2, 6))
        n_obs = int(rng.integers(2, 7))
        init = np.log(rng.random(n_states) + 1e-3)
        trans = np.log(rng.random((n_states, n_states)) + 1e-3)
        out = np.log(rng.random((n_obs, n_states)) + 1e-3)
        # knock out a few cells so -inf handling gets exercised
        mask = rng.random(out.shape) < 0.15
        out = np.where(mask & ~np.all(mask, axis=1, keepdims=True),
                       -np.inf, out)
        res = viterbi(init, trans, lambda s, o: out[o, s], range(n_obs))
        assert res.log_prob == pytest.approx(orc.best_generic(init, trans, out),
                                             abs=1e-9)
        assert path_score(init, trans, out, res.states) == pytest.approx(
            res.log_prob, abs=1e-12)


def test_viterbi_transition_forms_agree():
    rng = np.random.default_rng(402)
    init = np.log(rng.random(4))
    mats = [np.log(rng.random((4, 4))) for _ in range(3)]
    out = np.log(rng.random((4, 4)))

    by_list = viterbi(init, mats, lambda s, o: out[o, s], range(4))

    def call(t, i, j):
        return mats[t - 1][i, j]

    by_fn = viterbi(init, call, lambda s, o: out[o, s], range(4))
    assert by_list.states == by_fn.states
    assert by_list.log_prob == by_fn.log_prob

    # a single matrix equals the per-step list repeating it
    single = viterbi(init, mats[0], lambda s, o: out[o, s], range(4))
    repeated = viterbi(init, [mats[0]] * 3, lambda s, o: out[o, s], range(4))
    assert single.states == repeated.states
    assert single.log_prob == repeated.log_prob


def test_viterbi_observation_reaches_output_fn():
    init = np.zeros(2)
    trans = np.zeros((2, 2))

    def out(s, o):
        return 0.0 if s == o else -np.inf

    res = viterbi(init, trans, out, [0, 1, 1, 0])
    assert res.states == (0, 1, 1, 0)


def test_viterbi_tie_breaks_to_lower_state():
    init = np.zeros(3)
    trans = np.zeros((3, 3))
    res = viterbi(init, trans, lambda s, o: 0.0, "ab")
    assert res.states == (0, 0)


def test_viterbi_dead_observation_is_named():
    init = np.zeros(2)
    trans = np.zeros((2, 2))
    dead_at = 2

    def out(s, o):
        return -np.inf if o == dead_at else 0.0

    with pytest.raises(DecodeError, match="observation 2"):
        viterbi(init, trans, out, range(4))
    with pytest.raises(DecodeError, match="observation 0"):
        viterbi(np.full(2, -np.inf), trans, lambda s, o: 0.0, range(3))


def test_viterbi_empty_observations():
    with pytest.raises(DecodeError):
        viterbi(np.zeros(2), np.zeros((2, 2)), lambda s, o: 0.0, [])


# ---------------------------------------------------------------------------
# fingering decoder
# ---------------------------------------------------------------------------

def test_decode_fingering_matches_exhaustive():
    rng = np.random.default_rng(403)
    params = default_fingering_params("R")
    for n in (1, 2, 3, 4):
        for _ in range(3):
            pitches = [int(p) for p in rng.integers(50, 81, size=n)]
            res = decode_fingering(pitches, params)
            best_lp, _ = orc.best_fingering(pitches, params)
            assert res.log_prob == pytest.approx(best_lp, abs=1e-9)
            assert orc.fingering_seq_logp(pitches, res.states, params) == \
                pytest.approx(res.log_prob, abs=1e-9)
            assert all(1 <= f <= 5 for f in res.states)


def test_decode_fingering_single_note():
    params = default_fingering_params("R")
    res = decode_fingering([60], params)
    best = int(np.argmax(params.initial_finger)) + 1
    assert res.states == (best,)
    assert res.log_prob == pytest.approx(
        math.log(params.initial_finger[best - 1]) - LN_KEYS, abs=1e-12)


def test_decode_fingering_empty():
    with pytest.raises(DecodeError):
        decode_fingering([])


# ---------------------------------------------------------------------------
# hand separation
# ---------------------------------------------------------------------------

def test_separate_hands_matches_exhaustive():
    rng = np.random.default_rng(404)
    left = default_fingering_params("L")
    right = default_fingering_params("R")
    for n in (2, 3, 4):
        for _ in range(2):
            pitches = [int(p) for p in rng.integers(40, 85, size=n)]
            res = separate_hands(pitches)
            best_lp, _ = orc.best_separation(pitches, left, right)
            assert res.log_prob == pytest.approx(best_lp, abs=1e-9)
            assert len(res.hands) == len(res.fingers) == n
            assert set(res.hands) <= {"L", "R"}


def test_separate_hands_weighted():
    pitches = [60, 64, 55]
    left = default_fingering_params("L")
    right = default_fingering_params("R")
    res = separate_hands(pitches, weights=HandWeights(0.9, 0.1))
    best_lp, _ = orc.best_separation(pitches, left, right,
                                     w_left=0.9, w_right=0.1)
    assert res.log_prob == pytest.approx(best_lp, abs=1e-9)


def test_separate_hands_symmetric_tie_is_deterministic():
    # identical params make L and R exactly symmetric; the final-cell rule
    # (lowest grid pair, left axis first) keeps the left hand unused
    params = default_fingering_params("R")
    res = separate_hands([60], left_params=params, right_params=params)
    again = separate_hands([60], left_params=params, right_params=params)
    assert res.hands == again.hands == ("R",)
    assert res.log_prob == again.log_prob


def test_separate_hands_identical_pitches():
    pitches = [60, 60, 60, 60]
    left = default_fingering_params("L")
    right = default_fingering_params("R")
    res = separate_hands(pitches)
    best_lp, _ = orc.best_separation(pitches, left, right)
    assert res.log_prob == pytest.approx(best_lp, abs=1e-9)


def test_separate_hands_persistence_in_states():
    pitches = [60, 72, 48, 65]
    res = separate_hands(pitches)
    prev = {"L": None, "R": None}
    for state in res.states:
        idle = "R" if state.hand == "L" else "L"
        idle_sub = state.right if idle == "R" else state.left
        assert idle_sub == prev[idle]
        prev[state.hand] = state.left if state.hand == "L" else state.right


def test_separate_hands_rejects_bad_input():
    with pytest.raises(DecodeError):
        separate_hands([])
    with pytest.raises(DecodeError, match="key range"):
        separate_hands([60, 20])


# ---------------------------------------------------------------------------
# reduction decoding vs exhaustive search
# ---------------------------------------------------------------------------

def check_reduction_instance(pitches, skips, model="gaussian", **kw):
    score = kw.pop("score", None)
    if score is None:
        score = make_condensed(pitches)
    res = decode_reduction(score, skips, model=model, **kw)
    rescored = score_reduction_path(score, skips, res.states, model=model, **kw)
    assert rescored == pytest.approx(res.log_prob, abs=1e-9)
    return res


def test_decode_reduction_gaussian_matches_exhaustive():
    rng = np.random.default_rng(405)
    for n in (2, 3, 4):
        for _ in range(3):
            pitches = [int(p) for p in rng.integers(36, 92, size=n)]
            skips = rng.uniform(0.05, 0.95, size=n)
            res = check_reduction_instance(pitches, skips)
            best_lp, _ = orc.best_reduction_gaussian(pitches, skips)
            assert res.log_prob == pytest.approx(best_lp, abs=1e-9)


def test_decode_reduction_gaussian_skip_edges():
    pitches = [60, 67, 52]
    for skips in ([1.0, 1.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.5]):
        res = check_reduction_instance(pitches, np.array(skips))
        best_lp, _ = orc.best_reduction_gaussian(pitches, skips)
        assert res.log_prob == pytest.approx(best_lp, abs=1e-9)
        for b, state in zip(skips, res.states):
            if b == 1.0:
                assert state.hand is None
            if b == 0.0:
                assert state.hand in ("L", "R")
    # certain skips everywhere: the all-skip path scores -n*ln(88)
    res = decode_reduction(make_condensed(pitches), [1.0, 1.0, 1.0])
    assert res.log_prob == pytest.approx(-3 * LN_KEYS, abs=1e-12)


def test_decode_reduction_identical_pitches():
    pitches = [60] * 4
    skips = [0.3] * 4
    res = check_reduction_instance(pitches, skips)
    best_lp, _ = orc.best_reduction_gaussian(pitches, skips)
    assert res.log_prob == pytest.approx(best_lp, abs=1e-9)


def test_decode_reduction_fingering_matches_exhaustive():
    rng = np.random.default_rng(406)
    left = default_fingering_params("L")
    right = default_fingering_params("R")
    for n in (2, 3):
        for _ in range(2):
            pitches = [int(p) for p in rng.integers(45, 85, size=n)]
            skips = rng.uniform(0.05, 0.95, size=n)
            res = check_reduction_instance(pitches, skips, model="fingering")
            best_lp, _ = orc.best_reduction_fingering(pitches, skips,
                                                      left, right)
            assert res.log_prob == pytest.approx(best_lp, abs=1e-9)
            for state in res.states:
                if state.hand is not None:
                    sub = state.left if state.hand == "L" else state.right
                    assert 1 <= sub.finger <= 5


def test_decode_reduction_distance_matches_exhaustive():
    rng = np.random.default_rng(407)
    for n in (2, 3, 4):
        pitches = [int(p) for p in rng.integers(36, 92, size=n)]
        skips = rng.uniform(0.05, 0.95, size=n)
        melodic = (n - 1,)
        bass = (0,)
        score = make_condensed(pitches, melodic=melodic, bass=bass)
        res = check_reduction_instance(pitches, skips, model="distance",
                                       score=score)
        flags = [i in melodic or i in bass for i in range(n)]
        onsets = [note.onset for note in score.notes]
        best_lp, _ = orc.best_reduction_distance(pitches, onsets, flags,
                                                 skips)
        assert res.log_prob == pytest.approx(best_lp, abs=1e-9)


def test_decode_reduction_octave_shift_provenance():
    # every kept latent pitch must be the source pitch or +/- one octave
    rng = np.random.default_rng(408)
    pitches = [int(p) for p in rng.integers(30, 100, size=6)]
    score = make_condensed(pitches)
    res = decode_reduction(score, [0.4] * 6)
    for note, state in zip(score.notes, res.states):
        if state.hand is None:
            continue
        sub = state.left if state.hand == "L" else state.right
        assert sub.pitch - note.pitch in (-12, 0, 12)


def test_decode_reduction_input_validation():
    score = make_condensed([60, 64])
    with pytest.raises(DecodeError, match="one skip probability"):
        decode_reduction(score, [0.5])
    with pytest.raises(DecodeError, match=r"\[0, 1\]"):
        decode_reduction(score, [0.5, 1.5])
    with pytest.raises(DecodeError, match="unknown reduction model"):
        decode_reduction(score, [0.5, 0.5], model="cubist")


def test_decode_reduction_beam_none_equals_wide_beam():
    rng = np.random.default_rng(409)
    pitches = [int(p) for p in rng.integers(36, 92, size=8)]
    skips = rng.uniform(0.1, 0.9, size=8)
    score = make_condensed(pitches)
    exact = decode_reduction(score, skips)
    wide = decode_reduction(score, skips, beam=10 ** 6)
    assert exact.states == wide.states
    assert exact.log_prob == wide.log_prob


def test_decode_reduction_narrow_beam_stays_consistent():
    rng = np.random.default_rng(410)
    pitches = [int(p) for p in rng.integers(36, 92, size=8)]
    skips = rng.uniform(0.1, 0.9, size=8)
    score = make_condensed(pitches)
    exact = decode_reduction(score, skips)
    pruned = decode_reduction(score, skips, beam=1)
    assert pruned.log_prob <= exact.log_prob + 1e-12
    rescored = score_reduction_path(score, skips, pruned.states)
    assert rescored == pytest.approx(pruned.log_prob, abs=1e-9)


# ---------------------------------------------------------------------------
# path scoring
# ---------------------------------------------------------------------------

def test_score_reduction_path_manual_gaussian():
    pitches = [60, 64, 80]
    score = make_condensed(pitches)
    skips = [0.7, 0.2, 0.4]
    states = (
        MergedState(None, None, None),
        MergedState("L", HandSub(None, 64), None),
        MergedState("R", HandSub(None, 64), HandSub(None, 68)),
    )
    got = score_reduction_path(score, skips, states)
    want = (
        math.log(0.7) - LN_KEYS
        + math.log(0.8 / 2) + math.log(orc.gauss_row(48)[64 - 21])
        + math.log(orc.octave_channel(64, 64))
        + math.log(0.6 / 2) + math.log(orc.gauss_row(72)[68 - 21])
        + math.log(orc.octave_channel(68, 80))
    )
    assert got == pytest.approx(want, abs=1e-12)


def test_score_reduction_path_manual_fingering():
    params = default_fingering_params("R")
    pitches = [60, 62]
    score = make_condensed(pitches)
    skips = [0.5, 0.5]
    states = (
        MergedState("R", None, HandSub(1, 60)),
        MergedState("R", None, HandSub(2, 62)),
    )
    got = score_reduction_path(score, skips, states, model="fingering")
    want = (
        2 * math.log(0.25)
        + 2 * math.log(orc.octave_channel(60, 60))
        + orc.fingering_seq_logp([60, 62], [1, 2], params)
    )
    assert got == pytest.approx(want, abs=1e-12)


def test_score_reduction_path_rejects_broken_persistence():
    score = make_condensed([60, 64])
    sub = HandSub(None, 60)
    ok_first = MergedState("L", sub, None)
    with pytest.raises(DecodeError, match="note 1.*skip"):
        score_reduction_path(score, [0.5, 0.5],
                             (ok_first, MergedState(None, HandSub(None, 52),
                                                    None)))
    with pytest.raises(DecodeError, match="note 1.*idle"):
        score_reduction_path(score, [0.5, 0.5],
                             (ok_first, MergedState("R", HandSub(None, 52),
                                                    HandSub(None, 64))))
    with pytest.raises(DecodeError, match="no sub-state"):
        score_reduction_path(score, [0.5, 0.5],
                             (ok_first, MergedState("R", sub, None)))


def test_score_reduction_path_length_checks():
    score = make_condensed([60, 64])
    states = (MergedState(None, None, None),)
    with pytest.raises(DecodeError, match="cover the score"):
        score_reduction_path(score, [0.5, 0.5], states)
    with pytest.raises(DecodeError, match="cover the score"):
        score_reduction_path(score, [0.5],
                             states + (MergedState(None, None, None),))


# ---------------------------------------------------------------------------
# clamped-region re-decoding
# ---------------------------------------------------------------------------

def region_best_gaussian(score, skips, start, stop, left_state, next_state,
                         gamma=0.001):
    """Exhaustive best over the region with boundary states pinned."""
    init = {"L": orc.gauss_row(48), "R": orc.gauss_row(72)}
    pitches = [n.pitch for n in score.notes[start:stop]]

    def model_term(hand, last, q):
        p = init[hand][q - 21] if last is None else orc.gauss_row(last)[q - 21]
        return math.log(p) if p > 0 else -math.inf

    seed = {"L": None, "R": None}
    if left_state is not None:
        seed["L"] = left_state.left.pitch if left_state.left else None
        seed["R"] = left_state.right.pitch if left_state.right else None

    best = -math.inf
    import itertools
    for combo in itertools.product(*orc._reduction_options(pitches, False)):
        lp = 0.0
        last = dict(seed)
        dead = False
        for p, b, opt in zip(pitches, skips[start:stop], combo):
            if opt is None:
                if b <= 0:
                    dead = True
                    break
                lp += math.log(b) - LN_KEYS
                continue
            h, q = opt
            keep = (1.0 - b) / 2.0
            ch = orc.octave_channel(q, p, gamma)
            if keep <= 0 or ch <= 0:
                dead = True
                break
            lp += math.log(keep) + math.log(ch) + model_term(h, last[h], q)
            last[h] = q
        if dead:
            continue
        if next_state is not None:
            if next_state.hand is None:
                want = {"L": next_state.left.pitch if next_state.left else None,
                        "R": next_state.right.pitch if next_state.right else None}
                if last != want:
                    continue
            else:
                h = next_state.hand
                sub = next_state.left if h == "L" else next_state.right
                idle = "R" if h == "L" else "L"
                idle_sub = next_state.right if h == "L" else next_state.left
                if last[idle] != (idle_sub.pitch if idle_sub else None):
                    continue
                lp += model_term(h, last[h], sub.pitch)
        if lp > best:
            best = lp
    return best


def test_decode_region_full_range_equals_decode_reduction():
    rng = np.random.default_rng(411)
    pitches = [int(p) for p in rng.integers(40, 90, size=5)]
    skips = rng.uniform(0.1, 0.9, size=5)
    score = make_condensed(pitches)
    for model in ("gaussian", "fingering"):
        full = decode_reduction(score, skips, model=model)
        region = decode_region(score, skips, 0, 5, model=model)
        assert region.states == full.states
        assert region.log_prob == pytest.approx(full.log_prob, abs=1e-12)


def test_decode_region_splice_preserves_score():
    rng = np.random.default_rng(412)
    pitches = [int(p) for p in rng.integers(40, 90, size=7)]
    skips = rng.uniform(0.1, 0.9, size=7)
    score = make_condensed(pitches)
    full = decode_reduction(score, skips)
    start, stop = 2, 5
    region = decode_region(score, skips, start, stop,
                           left_state=full.states[start - 1],
                           next_state=full.states[stop])
    assert len(region.states) == stop - start
    spliced = full.states[:start] + region.states + full.states[stop:]
    assert score_reduction_path(score, skips, spliced) == pytest.approx(
        full.log_prob, abs=1e-9)


def test_decode_region_matches_regional_exhaustive():
    rng = np.random.default_rng(413)
    pitches = [int(p) for p in rng.integers(40, 90, size=6)]
    skips = rng.uniform(0.1, 0.9, size=6)
    score = make_condensed(pitches)
    full = decode_reduction(score, skips)
    for start, stop in ((1, 4), (2, 5), (0, 3)):
        left_state = full.states[start - 1] if start > 0 else None
        next_state = full.states[stop] if stop < 6 else None
        region = decode_region(score, skips, start, stop,
                               left_state=left_state, next_state=next_state)
        want = region_best_gaussian(score, skips, start, stop,
                                    left_state, next_state)
        assert region.log_prob == pytest.approx(want, abs=1e-9)


def test_decode_region_tail_region_without_next_state():
    rng = np.random.default_rng(414)
    pitches = [int(p) for p in rng.integers(40, 90, size=5)]
    skips = rng.uniform(0.1, 0.9, size=5)
    score = make_condensed(pitches)
    full = decode_reduction(score, skips)
    region = decode_region(score, skips, 1, 5, left_state=full.states[0])
    spliced = full.states[:1] + region.states
    assert score_reduction_path(score, skips, spliced) == pytest.approx(
        full.log_prob, abs=1e-9)


def test_decode_region_validation():
    score = make_condensed([60, 64, 67])
    skips = [0.5, 0.5, 0.5]
    with pytest.raises(DecodeError, match="bad region"):
        decode_region(score, skips, 2, 2)
    with pytest.raises(DecodeError, match="bad region"):
        decode_region(score, skips, 0, 4)
    bad = MergedState("L", HandSub(None, 30), None)
    with pytest.raises(DecodeError, match="boundary sub-state"):
        decode_region(score, skips, 1, 3, left_state=bad)
