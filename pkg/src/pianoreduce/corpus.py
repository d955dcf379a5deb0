"""Seeded synthetic ensemble pieces for tests and demos.

Each piece has four tracks (melody, counter-voice, harmony chords, bass)
on a common eighth-note grid, with calm/normal/burst bars so the ensemble
difficulty sweeps from well under to well over the reduction presets.
Duplicate (pitch, onset) pairs across tracks are injected on purpose so
condensation has multiplicities to count.
"""

from __future__ import annotations

import numpy as np

from .score import bar_boundaries, condense, infer_melody_bass, ingest

__all__ = ["generate_piece", "generate_corpus", "prepared_corpus", "inject_errors"]

_MAJOR = (0, 2, 4, 5, 7, 9, 11)
CORPUS_SEED = 8834


def _scale(root, lo, hi):
    return [p for p in range(lo, hi + 1) if (p - root) % 12 in _MAJOR]


def _walk(rng, grid, start):
    """Endless mostly-stepwise random walk over a pitch grid."""
    idx = min(range(len(grid)), key=lambda i: abs(grid[i] - start))
    while True:
        yield grid[idx]
        idx += int(rng.choice([-3, -2, -1, -1, 1, 1, 2, 3]))
        idx = max(0, min(len(grid) - 1, idx))


def generate_piece(seed, n_bars=None):
    """One synthetic four-track ensemble piece.

    Returns (notes, bar_length_seconds); notes are ingested NoteEvents.
    """
    rng = np.random.default_rng(seed)
    eighth = float(rng.choice([0.2, 0.25, 0.3]))
    bar = 8.0 * eighth
    if n_bars is None:
        n_bars = int(rng.integers(15, 21))
    # register plan: melody on top, counter-voice just below it, harmony
    # next to the bass. Bar means stay disjoint (melody > counter, bass <
    # harmony) so the per-bar register baseline flags the right tracks, and
    # each hand gets a contiguous range (bass+harmony low, counter+melody
    # high) the way keyboard textures actually sit
    root = int(rng.integers(0, 12))
    mel_grid = _scale(root, 66, 86)
    cnt_grid = _scale(root, 54, 64)
    bas_grid = _scale(root, 26, 40)

    melody = _walk(rng, mel_grid, 76)
    counter = _walk(rng, cnt_grid, 58)
    bass = _walk(rng, bas_grid, 34)

    raw = []
    mel_notes = []  # kept for doubling

    for b in range(n_bars):
        start = b * bar
        kind = rng.choice(["calm", "normal", "burst"], p=[0.3, 0.45, 0.25])

        # melody, track 0; stays on the eighth grid even in bursts so the
        # protected melody+bass core remains playable at the medium preset
        if kind == "calm":
            slots, fill = 4, 0.5
        elif kind == "normal":
            slots, fill = 8, 0.7
        else:
            slots, fill = 8, 1.0
        step = bar / slots
        for s in range(slots):
            if rng.random() < fill:
                onset = start + s * step
                pitch = next(melody)
                raw.append((onset, pitch, 0, step * 0.9))
                mel_notes.append((onset, pitch))

        # counter-voice, track 1; carries the burst density (deletable)
        if kind == "calm":
            c_slots, c_fill = 2, 0.4
        elif kind == "normal":
            c_slots, c_fill = 4, 0.6
        else:
            c_slots, c_fill = 16, 0.85
        c_step = bar / c_slots
        for s in range(c_slots):
            if rng.random() < c_fill:
                raw.append((start + s * c_step, next(counter), 1, c_step * 0.9))

        # harmony chords, track 2
        h_slots = 2 if kind == "calm" else 4 if kind == "normal" else 8
        h_step = bar / h_slots
        degree_grid = _scale(root, 42, 58)
        for s in range(h_slots):
            if rng.random() < 0.9:
                base = int(rng.choice(degree_grid[:len(degree_grid) - 5]))
                size = int(rng.integers(2, 4)) if kind != "burst" else int(rng.integers(3, 5))
                chord = {base}
                for third in range(1, size):
                    cand = base + 3 * third + int(rng.integers(0, 2))
                    snapped = min(degree_grid, key=lambda p: abs(p - cand))
                    chord.add(snapped)
                for p in sorted(chord):
                    raw.append((start + s * h_step, p, 2, h_step * 0.9))

        # bass, track 3; always sounds on the downbeat so every bar has a
        # bottom voice for the register baseline
        b_slots = 1 if kind == "calm" else 2 if kind == "normal" else 4
        b_step = bar / b_slots
        for s in range(b_slots):
            if s == 0 or rng.random() < 0.9:
                raw.append((start + s * b_step, next(bass), 3, b_step * 0.9))

    # deliberate duplicates: the counter-voice doubles some melody notes
    for onset, pitch in mel_notes:
        if rng.random() < 0.08:
            raw.append((onset, pitch, 1, eighth * 0.9))

    return ingest(raw), bar


def generate_corpus(seed=CORPUS_SEED, count=6):
    """A list of (name, notes, bar_length) pieces with derived sub-seeds."""
    out = []
    for k in range(count):
        notes, bar = generate_piece([seed, k])
        out.append((f"piece{k + 1:02d}", notes, bar))
    return out


def prepared_corpus(seed=CORPUS_SEED, count=6):
    """Condensed, melody/bass-annotated versions of generate_corpus."""
    out = []
    for name, notes, bar in generate_corpus(seed, count):
        score = infer_melody_bass(condense(notes), bar_boundaries(notes, bar))
        out.append((name, score))
    return out


def inject_errors(profile, seed, base_rate=0.02, hard_rate=0.65, pivot=None):
    """Synthetic per-note performance-error counts correlated with
    difficulty: notes above the pivot difficulty err often, others rarely.

    Returns an integer count array aligned with the profile.
    """
    rng = np.random.default_rng(seed)
    d = profile.d_both
    if pivot is None:
        pivot = float(np.quantile(d, 0.75))
    counts = np.zeros(len(d), dtype=int)
    for i in range(len(d)):
        p = hard_rate if d[i] > pivot else base_rate
        if rng.random() < p:
            counts[i] = int(rng.integers(1, 4))
    return counts
