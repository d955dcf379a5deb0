"""One-time versus iterative difficulty control on one piece.

The one-time optimizer fixes every note's keep/delete control factor from
the unreduced score's difficulty and decodes once; the scale factor rho
trades material kept against constraint violations. The iterative
optimizer re-decodes violating regions with decayed control factors until
the constraints hold. The sweep shows the trade: at a rho aggressive
enough to match the iterative violation rate, one-time has thrown away
more difficulty (and with it, more material).
"""

import numpy as np

from pianoreduce.corpus import prepared_corpus
from pianoreduce.reduction import (PRESETS, RHO_GRID, ensemble_difficulty,
                                   iterative_reduce, one_time_reduce)
from pianoreduce.report import evaluate_reduction


def main():
    name, score = prepared_corpus(count=1)[0]
    targets = PRESETS["medium"]
    print(f"{name}: {len(score.notes)} source notes, medium targets")

    ensemble = ensemble_difficulty(score)

    it = iterative_reduce(score, targets)
    it_metrics = evaluate_reduction(it, targets)
    print(f"\niterative: kept {len(it.notes)}, {it.iterations} iteration(s), "
          f"{it.termination}, out-rate {it_metrics.out_both:.4f}, "
          f"mean D_B {it_metrics.mean_both:.2f}")

    print(f"\n{'rho':>5} {'kept':>5} {'out-rate B':>10} {'mean D_B':>9}")
    for rho in RHO_GRID:
        ot = one_time_reduce(score, targets, scale=rho, ensemble=ensemble)
        m = evaluate_reduction(ot, targets)
        marker = "  <- exceeds iterative out-rate" \
            if m.out_both > it_metrics.out_both else ""
        print(f"{rho:5.1f} {len(ot.notes):5d} {m.out_both:10.4f} "
              f"{m.mean_both:9.2f}{marker}")


if __name__ == "__main__":
    main()
