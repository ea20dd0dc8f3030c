"""Retraining on density-filtered training data.

Given a target set of suspicious test latents (by default the examples
categorized ``B&I``), keep only the training rows whose latent density under
a KDE fitted on the target set reaches the floor(q*N)-th smallest density
(ties retained by the >= rule), retrain the linear classifier on the filtered
rows with the same seed and config, and compare both models on the target
subset and on the full in-distribution test set.

The filter density uses a much smaller bandwidth (default 0.01) than the
categorization densities: the target sets are small and the filter must
resolve which individual training rows resemble them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .categorize import (
    Category,
    CategoryReport,
    build_index,
    categorize,
    score,
    set_thresholds,
)
from .classifier import TrainConfig, predict, train_linear
from .data import DataError, LabeledFeatures, LatentDataset
from .kde import KernelKind, kde_eval_batch, kde_fit


@dataclass(frozen=True)
class FilterConfig:
    q: float = 0.0  # proportion of training data to discard
    bandwidth: float = 0.01
    target: Category = Category.BI

    def __post_init__(self):
        if not (0.0 <= self.q < 1.0):
            raise DataError(f"filter proportion q must lie in [0, 1), got {self.q}")
        if not (math.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise DataError("filter bandwidth must be positive")
        if self.target is Category.TRUSTED:
            raise DataError("Trusted is not a filter target")


def filter_densities(train: LatentDataset, target_latents: np.ndarray,
                     cfg: FilterConfig):
    """Density of each training latent under the target-set KDE, plus tau_test.

    ``tau_test`` is the floor(q*N)-th smallest density (1-indexed, clamped to
    [1, N]); the retained set is ``density >= tau_test``, so the densest
    training row always survives.
    """
    target_latents = np.asarray(target_latents, dtype=np.float64)
    if target_latents.ndim != 2 or target_latents.shape[0] == 0:
        raise DataError("nothing to filter against: target latent set is empty")
    if train.n == 0:
        raise DataError("training set must be nonempty")
    model = kde_fit(KernelKind("gaussian", cfg.bandwidth), target_latents)
    dens = kde_eval_batch(model, train.latents)
    k = int(math.floor(cfg.q * train.n))
    k = min(max(k, 1), train.n)
    tau_test = float(np.sort(dens)[k - 1])
    return dens, tau_test


def filter_train(train: LatentDataset, target_latents: np.ndarray,
                 cfg: FilterConfig) -> LatentDataset:
    """Subset of the training set resembling the target latents, order preserved."""
    dens, tau_test = filter_densities(train, target_latents, cfg)
    return train.take(dens >= tau_test)


def _accuracy(model, latents: np.ndarray, y_true: np.ndarray) -> float | None:
    if latents.shape[0] == 0:
        return None
    y_pred = predict(model, latents).y_pred
    return float(np.mean(y_pred == y_true))


def _as_features(ds: LatentDataset) -> LabeledFeatures:
    return LabeledFeatures(ids=ds.ids, x=ds.latents, y=ds.y_true,
                           num_classes=ds.num_classes)


def inverse_retrain(train: LatentDataset, val: LatentDataset, test: LatentDataset,
                    cfg: FilterConfig, tcfg: TrainConfig,
                    kernel: KernelKind | None = None,
                    q_bnd: float | None = None, q_idm: float | None = None,
                    report: CategoryReport | None = None) -> dict:
    """Retrain on filtered data and compare accuracies on the target subset.

    A categorization of ``test`` identifies the target rows; pass ``report``
    to reuse an existing run, otherwise one is computed here with the given
    ``kernel`` (default Gaussian, bandwidth 1.0) and quantiles (default:
    validation accuracy). Both models train on the latent columns, so this
    applies to identity-feature-extractor pipelines. Accuracies over the full
    test set exclude gold-OOD rows, whose label no classifier can match.
    """
    if report is None:
        kernel = kernel or KernelKind("gaussian", 1.0)
        val_accuracy = float(np.mean(val.y_pred == val.y_true))
        qb = q_bnd if q_bnd is not None else val_accuracy
        qi = q_idm if q_idm is not None else val_accuracy
        table = set_thresholds(score(build_index(train, val, kernel), test), qb, qi)
        report = categorize(table)
    if report.ids != test.ids:
        raise DataError("category report does not align with the test set")

    target_mask = report.mask(cfg.target)
    n_target = int(target_mask.sum())
    base = {
        "q": cfg.q,
        "bandwidth": cfg.bandwidth,
        "target": cfg.target.value,
        "n_target": n_target,
        "n_train_full": train.n,
        "seed": tcfg.seed,
    }
    if n_target == 0:
        base.update(
            {
                "status": "no target examples",
                "n_train_filtered": train.n,
                "acc_full_on_target": None,
                "acc_filtered_on_target": None,
                "acc_full_overall": None,
                "acc_filtered_overall": None,
            }
        )
        return base

    target = test.take(target_mask)
    filtered = filter_train(train, target.latents, cfg)
    model_full = train_linear(_as_features(train), tcfg)
    model_filtered = train_linear(_as_features(filtered), tcfg)

    in_dist = test.take(test.y_true >= 0)
    base.update(
        {
            "status": "ok",
            "n_train_filtered": filtered.n,
            "acc_full_on_target": _accuracy(model_full, target.latents, target.y_true),
            "acc_filtered_on_target": _accuracy(model_filtered, target.latents, target.y_true),
            "acc_full_overall": _accuracy(model_full, in_dist.latents, in_dist.y_true),
            "acc_filtered_overall": _accuracy(model_filtered, in_dist.latents, in_dist.y_true),
        }
    )
    return base


def inverse_grid(train: LatentDataset, val: LatentDataset, test: LatentDataset,
                 qs, bandwidth: float, target: Category, tcfg: TrainConfig,
                 kernel: KernelKind | None = None,
                 q_bnd: float | None = None, q_idm: float | None = None,
                 report: CategoryReport | None = None) -> list:
    """One :func:`inverse_retrain` comparison per discard proportion q."""
    if report is None:
        kernel = kernel or KernelKind("gaussian", 1.0)
        val_accuracy = float(np.mean(val.y_pred == val.y_true))
        qb = q_bnd if q_bnd is not None else val_accuracy
        qi = q_idm if q_idm is not None else val_accuracy
        table = set_thresholds(score(build_index(train, val, kernel), test), qb, qi)
        report = categorize(table)
    out = []
    for q in qs:
        cfg = FilterConfig(q=q, bandwidth=bandwidth, target=target)
        out.append(inverse_retrain(train, val, test, cfg, tcfg, report=report))
    return out


def save_inverse_reports(reports: list, path) -> None:
    Path(path).write_text(
        json.dumps({"comparisons": reports}, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )


def save_accuracy_plot_data(reports: list, path) -> None:
    """Plot-data CSV: accuracy of both models on the target set versus q."""
    lines = ["q,n_train_filtered,acc_full_on_target,acc_filtered_on_target,"
             "acc_full_overall,acc_filtered_overall"]

    def fmt(v):
        return "nan" if v is None else repr(float(v))

    for r in reports:
        lines.append(
            ",".join(
                [
                    repr(float(r["q"])),
                    str(r["n_train_filtered"]),
                    fmt(r["acc_full_on_target"]),
                    fmt(r["acc_filtered_on_target"]),
                    fmt(r["acc_full_overall"]),
                    fmt(r["acc_filtered_overall"]),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
