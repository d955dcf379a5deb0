"""Windowed difficulty profiles of a piano score.

Separates a generated piece into hands, then compares the Gaussian
pitch-model difficulty against the no-information ceiling (every key
equally likely), which depends only on how many notes fall in the window.
"""

import numpy as np

from pianoreduce.corpus import prepared_corpus
from pianoreduce.decoder import separate_hands
from pianoreduce.difficulty import difficulty_profile
from pianoreduce.score import PianoScore


def main():
    name, score = prepared_corpus(count=1)[0]
    sep = separate_hands([n.pitch for n in score.notes])
    piano = PianoScore(score.notes, sep.hands)
    n_left = sum(1 for h in sep.hands if h == "L")
    print(f"{name}: {len(piano.notes)} notes, "
          f"{n_left} left / {len(piano.notes) - n_left} right")

    gauss = difficulty_profile(piano, "gaussian")
    ceiling = difficulty_profile(piano, "noinfo")
    print(f"\n{'model':<10} {'mean L':>8} {'mean R':>8} {'mean B':>8} {'max B':>8}")
    for label, prof in (("gaussian", gauss), ("ceiling", ceiling)):
        print(f"{label:<10} {prof.d_left.mean():8.2f} {prof.d_right.mean():8.2f} "
              f"{prof.d_both.mean():8.2f} {prof.d_both.max():8.2f}")

    # the both-hands column is the exact sum of the per-hand columns
    assert np.array_equal(gauss.d_both, gauss.d_left + gauss.d_right)

    hardest = np.argsort(gauss.d_both)[-5:][::-1]
    print("\nfive hardest notes (gaussian):")
    for i in hardest:
        print(f"  note {int(gauss.note_ids[i]):4d} at t={gauss.onsets[i]:7.2f}s  "
              f"D_B = {gauss.d_both[i]:6.2f} nats/s")


if __name__ == "__main__":
    main()
