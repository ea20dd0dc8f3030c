"""Detection metrics: precision/recall/F1 and precision-recall sweeps.

Empty denominators never divide: an undefined precision, recall or F1 is
reported as ``None`` (``null`` in JSON, ``nan`` in CSV) so aggregates cannot
be silently faked by a zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .categorize import Category, CategoryReport
from .data import OOD_LABEL, DataError, LatentDataset
from .categorize import quantile_threshold


@dataclass(frozen=True)
class Prf:
    precision: float | None
    recall: float | None
    f1: float | None
    tp: int
    fp: int
    fn: int

    def as_json(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }


def prf(pred_mask, gold_mask) -> Prf:
    """Precision, recall and F1 of a predicted mask against a gold mask."""
    pred = np.asarray(pred_mask, dtype=bool)
    gold = np.asarray(gold_mask, dtype=bool)
    if pred.shape != gold.shape or pred.ndim != 1:
        raise DataError("pred and gold masks must be 1-D and equally long")
    tp = int(np.sum(pred & gold))
    fp = int(np.sum(pred & ~gold))
    fn = int(np.sum(~pred & gold))
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return Prf(precision=precision, recall=recall, f1=f1, tp=tp, fp=fp, fn=fn)


@dataclass(frozen=True)
class PrCurve:
    points: tuple  # (q, precision, recall) triples
    degenerate: bool  # all scores equal: nothing can ever be flagged


def pr_curve(scores, gold_mask, n_points: int) -> PrCurve:
    """Sweep the flagging quantile over an even grid in (0, 1).

    At each q the flagged set is ``score > quantile_threshold(scores, q)``,
    mirroring the strict comparisons used for the Bnd/IDM categories.
    """
    scores = np.asarray(scores, dtype=np.float64)
    gold = np.asarray(gold_mask, dtype=bool)
    if scores.shape != gold.shape or scores.ndim != 1:
        raise DataError("scores and gold mask must be 1-D and equally long")
    if n_points < 2:
        raise DataError("n_points must be >= 2")
    degenerate = bool(scores.size) and bool(np.all(scores == scores[0]))
    qs = np.linspace(0.0, 1.0, n_points + 2)[1:-1]
    points = []
    for q in qs:
        tau = quantile_threshold(scores, float(q))
        m = prf(scores > tau, gold)
        points.append((float(q), m.precision, m.recall))
    return PrCurve(points=tuple(points), degenerate=degenerate)


def save_pr_curve_csv(curve: PrCurve, path) -> None:
    def fmt(v):
        return "nan" if v is None else repr(float(v))

    lines = ["q,precision,recall"]
    for q, p, r in curve.points:
        lines.append(f"{q!r},{fmt(p)},{fmt(r)}")
    if curve.degenerate:
        lines.insert(1, "# degenerate: constant score vector")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def category_report(report: CategoryReport, gold: LatentDataset,
                    gold_masks: dict | None = None) -> dict:
    """Per-category precision/recall/F1 against gold labels.

    Gold OOD rows are those with ``y_true == -1``. Gold masks for the other
    categories (synthetic suites know their own ground truth) are passed via
    ``gold_masks``: a mapping from category value (e.g. ``"IDM"``) to a
    boolean mask aligned with the report. Without masks the result is a
    counts-only report.
    """
    if report.ids != gold.ids:
        raise DataError("report and gold dataset ids do not align")
    out = {"counts": report.counts(), "n_examples": report.n, "metrics": {}}
    masks = {Category.OOD.value: gold.y_true == OOD_LABEL}
    for key, mask in (gold_masks or {}).items():
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (report.n,):
            raise DataError(f"gold mask for {key!r} must have one entry per example")
        masks[key] = mask
    for value, gold_mask in masks.items():
        cat = next((c for c in Category if c.value == value), None)
        if cat is None:
            raise DataError(f"unknown category {value!r} in gold masks")
        out["metrics"][value] = prf(report.mask(cat), gold_mask).as_json()
    return out


def format_category_table(summary: dict) -> str:
    """Aligned text table for a :func:`category_report` summary."""
    def fmt(v):
        return "undefined" if v is None else f"{v:.4f}"

    rows = [("category", "count", "precision", "recall", "f1")]
    metrics = summary["metrics"]
    for value, count in summary["counts"].items():
        m = metrics.get(value)
        if m is None:
            rows.append((value, str(count), "-", "-", "-"))
        else:
            rows.append((value, str(count), fmt(m["precision"]), fmt(m["recall"]), fmt(m["f1"])))
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)) for row in rows]
    return "\n".join(lines)


def save_category_report(summary: dict, path) -> None:
    Path(path).write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
