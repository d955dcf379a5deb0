"""Predicting performance errors from windowed difficulty.

Synthesizes error annotations whose rate rises with both-hands difficulty,
then grid-searches per-hand and both-hands thresholds that flag risky
notes. The weighted F score of the best thresholds is compared against the
always-flag baseline.
"""

import numpy as np

from pianoreduce.corpus import inject_errors, prepared_corpus
from pianoreduce.difficulty import error_prediction_metrics, sweep_thresholds
from pianoreduce.reduction import ensemble_difficulty


def main():
    runs = []
    for k, (name, score) in enumerate(prepared_corpus(count=3)):
        profile = ensemble_difficulty(score)
        counts = inject_errors(profile, seed=100 + k)
        runs.append((profile, counts))
        print(f"{name}: {len(profile)} notes, "
              f"{int((counts > 0).sum())} with injected errors")

    pooled = lambda attr: np.concatenate([getattr(p, attr) for p, _ in runs])
    quantiles = [0.4, 0.6, 0.75, 0.9, 0.97]
    thresholds, best = sweep_thresholds(
        runs,
        np.quantile(pooled("d_left"), quantiles),
        np.quantile(pooled("d_right"), quantiles),
        np.quantile(pooled("d_both"), quantiles))

    all_counts = np.concatenate([c for _, c in runs])
    baseline = error_prediction_metrics(
        np.ones(len(all_counts), dtype=bool), all_counts)

    print(f"\nbest thresholds: L > {thresholds.left:.2f}, "
          f"R > {thresholds.right:.2f}, B > {thresholds.both:.2f}")
    print(f"  precision {best.precision:.3f}, recall {best.recall:.3f}, "
          f"weighted F {best.f_weighted:.3f}")
    print(f"always-flag baseline: weighted F {baseline.f_weighted:.3f}")
    print(f"improvement: +{best.f_weighted - baseline.f_weighted:.3f}")


if __name__ == "__main__":
    main()
