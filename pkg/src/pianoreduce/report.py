"""Reduction quality metrics and batch reporting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .score import ScoreError

__all__ = ["ReportError", "ReductionMetrics", "evaluate_reduction", "batch_report"]


class ReportError(ScoreError):
    """A metric is undefined for the given reduction."""


@dataclass(frozen=True)
class ReductionMetrics:
    """Summary statistics of one reduction against difficulty targets.

    Out-of-range rates are the fraction of reduction notes whose difficulty
    strictly exceeds the target (``out_any``: any of the three).
    ``additional_rate`` is the number of kept notes beyond the retained
    melody/bass lines relative to the size of those lines;
    ``unplayable_rate`` relates externally counted unplayable notes to the
    additional notes and is None when there are no additional notes.
    """

    mean_left: float
    mean_right: float
    mean_both: float
    max_left: float
    max_right: float
    max_both: float
    out_left: float
    out_right: float
    out_both: float
    out_any: float
    additional_rate: float
    unplayable_rate: float | None
    n_notes: int
    n_melodic: int
    n_bass: int


def evaluate_reduction(result, targets, n_unplayable=None):
    """Compute ReductionMetrics for a ReductionResult.

    ``n_unplayable`` is an externally judged count of unplayable additional
    notes; without it the unplayable rate is None. An empty reduction has no
    difficulty distribution to summarize and raises ReportError.
    """
    if len(result.notes) == 0:
        raise ReportError("empty reduction")
    p = result.profile
    melodic = {n.id for n, m in zip(result.source.notes, result.source.melodic) if m}
    bass = {n.id for n, b in zip(result.source.notes, result.source.bass) if b}
    n_mel = sum(1 for sid in result.source_ids if sid in melodic)
    n_bas = sum(1 for sid in result.source_ids if sid in bass)
    n_notes = len(result.notes)
    if n_mel + n_bas == 0:
        raise ReportError("no retained melody/bass notes to compare against")
    additional = n_notes - n_mel - n_bas
    additional_rate = additional / (n_mel + n_bas)

    unplayable_rate = None
    if n_unplayable is not None and additional > 0:
        unplayable_rate = n_unplayable / additional

    over_l = p.d_left > targets.left
    over_r = p.d_right > targets.right
    over_b = p.d_both > targets.both
    return ReductionMetrics(
        mean_left=float(p.d_left.mean()),
        mean_right=float(p.d_right.mean()),
        mean_both=float(p.d_both.mean()),
        max_left=float(p.d_left.max()),
        max_right=float(p.d_right.max()),
        max_both=float(p.d_both.max()),
        out_left=float(over_l.mean()),
        out_right=float(over_r.mean()),
        out_both=float(over_b.mean()),
        out_any=float((over_l | over_r | over_b).mean()),
        additional_rate=additional_rate,
        unplayable_rate=unplayable_rate,
        n_notes=n_notes,
        n_melodic=n_mel,
        n_bass=n_bas,
    )


_COLUMNS = ("mean_left", "mean_right", "mean_both", "max_left", "max_right",
            "max_both", "out_left", "out_right", "out_both", "out_any",
            "additional_rate", "unplayable_rate")


def _fmt(x):
    return "NA" if x is None else f"{x:.6g}"


def batch_report(rows):
    """CSV summary of reductions: one row per (piece, method, target), plus
    one mean row per (method, target) group.

    ``rows`` holds (piece, method, TargetDifficulty, ReductionMetrics)
    tuples. Mean rows average each column over the group's pieces; the
    unplayable rate averages only defined values and is NA when none are.
    """
    header = ("piece,method,target_left,target_right,target_both,"
              + ",".join(_COLUMNS))
    lines = [header]
    groups = {}
    for piece, method, targets, metrics in rows:
        key = (method, targets.left, targets.right, targets.both)
        groups.setdefault(key, []).append(metrics)
        cells = [piece, method, _fmt(targets.left), _fmt(targets.right),
                 _fmt(targets.both)]
        cells += [_fmt(getattr(metrics, c)) for c in _COLUMNS]
        lines.append(",".join(cells))
    for (method, tl, tr, tb), metrics_list in groups.items():
        cells = ["MEAN", method, _fmt(tl), _fmt(tr), _fmt(tb)]
        for c in _COLUMNS:
            values = [getattr(m, c) for m in metrics_list]
            values = [v for v in values if v is not None]
            cells.append(_fmt(float(np.mean(values)) if values else None))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
