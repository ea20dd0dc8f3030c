"""Uncertainty categorization via latent densities.

Builds a C x C grid of density models from validation corpora partitioned by
(true class, predicted class), scores test examples with three quantities,

* ``t_ood``  - reciprocal of the training-latent density,
* ``t_bnd``  - summed density of correctly classified validation examples of
  the non-predicted classes (diagonal corpora),
* ``t_idm``  - summed density of validation examples misclassified *into* the
  predicted class (off-diagonal column of the predicted class),

and assigns each example exactly one category:

========  =============================================================
OOD       ``t_ood >= tau_ood`` (checked first; tau_ood is the reciprocal
          of the minimum training-example density, self-term included)
Bnd       ``t_bnd > tau_bnd`` and ``t_idm <= tau_idm``
IDM       ``t_bnd <= tau_bnd`` and ``t_idm > tau_idm``
B&I       both strict inequalities hold
Other     none of the thresholds is exceeded
Trusted   example was not flagged by the upstream uncertainty filter
========  =============================================================

``tau_bnd``/``tau_idm`` are empirical quantiles: the floor(N*q)-th smallest
score (1-indexed, clamped to [1, N]), by default over the test-set scores
with q equal to the validation accuracy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import stats as _scipy_stats

from .data import ClassPair, DataError, LatentDataset
from .kde import KdeModel, KernelKind, kde_eval_batch, kde_fit

#: Finite stand-in for an infinite OOD score (zero training density).
OOD_SCORE_SENTINEL = float(np.finfo(np.float64).max)

#: Sentinel for rank correlations that are undefined (constant score vector).
UNDEFINED_CORRELATION = float("nan")


class Category(Enum):
    OOD = "OOD"
    BND = "Bnd"
    IDM = "IDM"
    BI = "B&I"
    OTHER = "Other"
    TRUSTED = "Trusted"


#: Categories an uncertain (flagged) example can receive.
UNCERTAIN_CATEGORIES = (Category.OOD, Category.BND, Category.IDM, Category.BI, Category.OTHER)


@dataclass(frozen=True)
class ConfusionDensityIndex:
    """Per-class-pair density models plus the training density and tau_ood."""

    kde_grid: tuple  # C x C nested tuple of KdeModel
    corpus_sizes: np.ndarray  # (C, C) int64
    kernel: KernelKind
    train_kde: KdeModel
    tau_ood: float
    num_classes: int
    leave_one_out: bool = False

    @property
    def dim(self) -> int:
        return self.train_kde.dim

    def corpus_model(self, true_class: int, pred_class: int) -> KdeModel:
        return self.kde_grid[true_class][pred_class]

    def corpus(self, pair: ClassPair) -> KdeModel:
        """Density model of the validation corpus addressed by a class pair."""
        c = self.num_classes
        if not (0 <= pair.true_class < c and 0 <= pair.pred_class < c):
            raise DataError(f"class pair {pair} out of range for C={c}")
        return self.kde_grid[pair.true_class][pair.pred_class]


@dataclass(frozen=True)
class ScoreTable:
    """Per-example scores plus the thresholds used to binarize them."""

    ids: tuple
    y_pred: np.ndarray
    t_ood: np.ndarray
    t_bnd: np.ndarray
    t_idm: np.ndarray
    tau_ood: float
    tau_bnd: float | None = None
    tau_idm: float | None = None
    q_bnd: float | None = None
    q_idm: float | None = None

    def __post_init__(self):
        for name in ("t_ood", "t_bnd", "t_idm"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (len(self.ids),):
                raise DataError(f"{name} must have one entry per id")
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} must be finite")
            object.__setattr__(self, name, arr)
        if np.any(self.t_ood <= 0):
            raise DataError("t_ood must be strictly positive")

    @property
    def n(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class CategoryReport:
    """Final assignment for each example plus summary bookkeeping."""

    ids: tuple
    y_pred: np.ndarray
    t_ood: np.ndarray
    t_bnd: np.ndarray
    t_idm: np.ndarray
    categories: tuple  # Category per example
    thresholds: dict
    params: dict

    @property
    def n(self) -> int:
        return len(self.ids)

    def counts(self) -> dict:
        out = {c.value: 0 for c in Category}
        for c in self.categories:
            out[c.value] += 1
        return out

    def mask(self, category: Category) -> np.ndarray:
        return np.asarray([c is category for c in self.categories], dtype=bool)


# ---------------------------------------------------------------------------
# Index construction and scoring
# ---------------------------------------------------------------------------


def build_index(train: LatentDataset, val: LatentDataset, kernel: KernelKind,
                leave_one_out: bool = False) -> ConfusionDensityIndex:
    """Partition the validation set into class-pair corpora and fit densities.

    ``tau_ood`` is the reciprocal of the smallest training-example density,
    including each point's own kernel contribution; with ``leave_one_out``
    set, self-contributions are removed before taking the minimum (needs at
    least two training rows).
    """
    if train.n < 1:
        raise DataError("training set must be nonempty")
    if train.dim != val.dim:
        raise DataError(f"dimension mismatch: train d={train.dim}, val d={val.dim}")
    if train.num_classes != val.num_classes:
        raise DataError("train and val must declare the same number of classes")
    if np.any(val.y_true < 0):
        raise DataError(
            "validation rows must carry real class labels; OOD-labeled rows "
            "cannot be assigned to a (true, predicted) corpus"
        )
    c = train.num_classes
    grid = []
    sizes = np.zeros((c, c), dtype=np.int64)
    for c1 in range(c):
        row = []
        for c2 in range(c):
            mask = (val.y_true == c1) & (val.y_pred == c2)
            refs = val.latents[mask]
            sizes[c1, c2] = refs.shape[0]
            row.append(kde_fit(kernel, refs))
        grid.append(tuple(row))
    train_kde = kde_fit(kernel, train.latents)
    dens = kde_eval_batch(train_kde, train.latents)
    if leave_one_out:
        if train.n < 2:
            raise DataError("leave-one-out tau requires at least two training rows")
        self_term = np.array(
            [_self_kernel_value(kernel, train.dim)] * train.n, dtype=np.float64
        )
        dens = (dens * train.n - self_term) / (train.n - 1)
        dens = np.maximum(dens, 0.0)
    min_density = float(np.min(dens))
    tau_ood = OOD_SCORE_SENTINEL if min_density <= 0.0 else 1.0 / min_density
    return ConfusionDensityIndex(
        kde_grid=tuple(grid),
        corpus_sizes=sizes,
        kernel=kernel,
        train_kde=train_kde,
        tau_ood=tau_ood,
        num_classes=c,
        leave_one_out=leave_one_out,
    )


def _self_kernel_value(kernel: KernelKind, dim: int) -> float:
    from .kde import kernel_eval

    zero = np.zeros(dim)
    return kernel_eval(kernel, zero, zero)


def score(index: ConfusionDensityIndex, test: LatentDataset) -> ScoreTable:
    """Compute (t_ood, t_bnd, t_idm) for every test example.

    Empty corpora contribute zero density. A zero training density (possible
    for the tophat kernel, or through underflow) maps to the finite
    :data:`OOD_SCORE_SENTINEL`, which always satisfies the OOD test.
    """
    if test.dim != index.dim:
        raise DataError(f"dimension mismatch: index d={index.dim}, test d={test.dim}")
    if test.num_classes != index.num_classes:
        raise DataError("test set and index must declare the same number of classes")
    c = index.num_classes
    train_density = kde_eval_batch(index.train_kde, test.latents)
    t_ood = np.where(
        train_density > 0.0,
        1.0 / np.maximum(train_density, np.finfo(np.float64).tiny),
        OOD_SCORE_SENTINEL,
    )
    # Density of each test row under every (c1, c2) corpus.
    grid_density = np.zeros((test.n, c, c), dtype=np.float64)
    for c1 in range(c):
        for c2 in range(c):
            model = index.corpus_model(c1, c2)
            if model.n_refs:
                grid_density[:, c1, c2] = kde_eval_batch(model, test.latents)
    pred = test.y_pred
    rows = np.arange(test.n)
    diag = grid_density[:, np.arange(c), np.arange(c)]  # (N, C) of P[c, c]
    pred_col = grid_density[rows, :, pred]  # (N, C) of P[c, y_pred]
    # Zero the predicted-class slot and sum; subtracting it instead would
    # lose low bits whenever the excluded term dominates.
    off_class = np.ones((test.n, c), dtype=bool)
    off_class[rows, pred] = False
    t_bnd = np.where(off_class, diag, 0.0).sum(axis=1)
    t_idm = np.where(off_class, pred_col, 0.0).sum(axis=1)
    return ScoreTable(
        ids=test.ids,
        y_pred=np.asarray(pred),
        t_ood=t_ood,
        t_bnd=t_bnd,
        t_idm=t_idm,
        tau_ood=index.tau_ood,
    )


def quantile_threshold(scores, q: float) -> float:
    """The floor(N*q)-th smallest score, 1-indexed and clamped to [1, N]."""
    arr = np.asarray(scores, dtype=np.float64).ravel()
    if arr.size == 0:
        raise DataError("cannot take a quantile of an empty score list")
    if not (0.0 < q <= 1.0):
        raise DataError(f"quantile q must lie in (0, 1], got {q}")
    k = int(math.floor(arr.size * q))
    k = min(max(k, 1), arr.size)
    return float(np.sort(arr)[k - 1])


def set_thresholds(table: ScoreTable, q_bnd: float, q_idm: float,
                   bnd_basis=None, idm_basis=None) -> ScoreTable:
    """Attach quantile thresholds to a score table.

    The quantiles are taken over ``bnd_basis``/``idm_basis`` score vectors
    when given (e.g. validation-set scores), otherwise over the table's own
    scores.
    """
    bnd_scores = table.t_bnd if bnd_basis is None else np.asarray(bnd_basis)
    idm_scores = table.t_idm if idm_basis is None else np.asarray(idm_basis)
    return replace(
        table,
        tau_bnd=quantile_threshold(bnd_scores, q_bnd),
        tau_idm=quantile_threshold(idm_scores, q_idm),
        q_bnd=q_bnd,
        q_idm=q_idm,
    )


def categorize(table: ScoreTable, flagged: np.ndarray | None = None,
               params: dict | None = None) -> CategoryReport:
    """Assign exactly one category per example.

    ``flagged`` restricts categorization to the rows an upstream uncertainty
    estimator marked suspicious; unflagged rows pass through as ``Trusted``.
    """
    if table.tau_bnd is None or table.tau_idm is None:
        raise DataError("thresholds not set; call set_thresholds first")
    if flagged is not None:
        flagged = np.asarray(flagged, dtype=bool)
        if flagged.shape != (table.n,):
            raise DataError("flagged mask must have one entry per example")
    cats = []
    for i in range(table.n):
        if flagged is not None and not flagged[i]:
            cats.append(Category.TRUSTED)
            continue
        if table.t_ood[i] >= table.tau_ood:
            cats.append(Category.OOD)
            continue
        over_bnd = table.t_bnd[i] > table.tau_bnd
        over_idm = table.t_idm[i] > table.tau_idm
        if over_bnd and over_idm:
            cats.append(Category.BI)
        elif over_bnd:
            cats.append(Category.BND)
        elif over_idm:
            cats.append(Category.IDM)
        else:
            cats.append(Category.OTHER)
    thresholds = {
        "tau_ood": table.tau_ood,
        "tau_bnd": table.tau_bnd,
        "tau_idm": table.tau_idm,
        "q_bnd": table.q_bnd,
        "q_idm": table.q_idm,
    }
    return CategoryReport(
        ids=table.ids,
        y_pred=table.y_pred,
        t_ood=table.t_ood,
        t_bnd=table.t_bnd,
        t_idm=table.t_idm,
        categories=tuple(cats),
        thresholds=thresholds,
        params=dict(params or {}),
    )


# ---------------------------------------------------------------------------
# Kernel robustness
# ---------------------------------------------------------------------------


def spearman(a, b) -> float:
    """Spearman rank correlation; NaN sentinel when either vector is constant."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError("score vectors must be 1-D and equally long")
    if np.all(a == a[0]) or np.all(b == b[0]):
        return UNDEFINED_CORRELATION
    return float(_scipy_stats.spearmanr(a, b).statistic)


def kernel_robustness(train: LatentDataset, val: LatentDataset, test: LatentDataset,
                      kernels) -> dict:
    """Spearman correlation of each score type across kernel choices.

    Returns ``{"t_ood": R, "t_bnd": R, "t_idm": R}`` where each ``R`` is a
    K x K matrix for the K supplied kernels (same bandwidth expected).
    """
    kernels = list(kernels)
    if len(kernels) < 2:
        raise DataError("need at least two kernels to compare")
    tables = [score(build_index(train, val, k), test) for k in kernels]
    out = {}
    for name in ("t_ood", "t_bnd", "t_idm"):
        k = len(kernels)
        rho = np.empty((k, k), dtype=np.float64)
        for i in range(k):
            for j in range(k):
                rho[i, j] = spearman(getattr(tables[i], name), getattr(tables[j], name))
        out[name] = rho
    return out


# ---------------------------------------------------------------------------
# Report serialization
# ---------------------------------------------------------------------------


def report_to_json(report: CategoryReport) -> dict:
    examples = [
        {
            "id": report.ids[i],
            "y_pred": int(report.y_pred[i]),
            "t_ood": float(report.t_ood[i]),
            "t_bnd": float(report.t_bnd[i]),
            "t_idm": float(report.t_idm[i]),
            "category": report.categories[i].value,
        }
        for i in range(report.n)
    ]
    summary = {
        "counts": report.counts(),
        "thresholds": report.thresholds,
        "n_examples": report.n,
    }
    summary.update(report.params)
    return {"examples": examples, "summary": summary}


def save_report(report: CategoryReport, path) -> None:
    Path(path).write_text(
        json.dumps(report_to_json(report), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )


def load_report(path) -> CategoryReport:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    examples = payload["examples"]
    by_value = {c.value: c for c in Category}
    summary = payload["summary"]
    params = {
        k: v for k, v in summary.items() if k not in ("counts", "thresholds", "n_examples")
    }
    return CategoryReport(
        ids=tuple(e["id"] for e in examples),
        y_pred=np.asarray([e["y_pred"] for e in examples], dtype=np.int64),
        t_ood=np.asarray([e["t_ood"] for e in examples], dtype=np.float64),
        t_bnd=np.asarray([e["t_bnd"] for e in examples], dtype=np.float64),
        t_idm=np.asarray([e["t_idm"] for e in examples], dtype=np.float64),
        categories=tuple(by_value[e["category"]] for e in examples),
        thresholds=summary["thresholds"],
        params=params,
    )
