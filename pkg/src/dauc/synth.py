"""Deterministic synthetic datasets.

Two generators, both fully determined by a 64-bit seed:

* :func:`make_two_smiles` - two interleaved half-circles ("moons") with a
  tight Gaussian cluster per class placed on the *wrong* side of any linear
  decision boundary, plus test-only out-of-distribution clusters. Linear
  models misclassify the swapped clusters systematically, which creates
  regions of repeatable in-distribution misclassification.
* :func:`make_idm_clusters` - two well-separated main blobs plus a pair of
  overlapping, label-swapped "confusion" clusters. Intended for retraining
  experiments: a linear model sacrifices the confusion site to fit the main
  blobs, and only a model retrained on site-local data can recover it.

Randomness discipline (documented so byte-level reproducibility is testable):
all draws come from one ``numpy.random.Generator(PCG64(seed))`` stream, in a
fixed call order (moon noise, per-class split permutations, per-split cluster
noise, OOD noise). Gaussian draws use ``standard_normal``. Reordering any call
would change outputs, so the order is part of the format contract.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import OOD_LABEL, DataError, LabeledFeatures


@dataclass(frozen=True)
class TwoSmilesConfig:
    n_moons: int = 6000
    moon_noise: float = 0.1
    cluster_centers: tuple = ((0.0, 1.5), (1.0, -1.0))
    cluster_labels: tuple = (1, 0)  # (0,1.5) joins the lower-moon class and vice versa
    cluster_n: int = 150  # per center, per split
    cluster_std: float = 0.1
    ood_centers: tuple = ((2.0, 2.0), (-1.0, -1.5))
    ood_n: int = 750  # per center, test only
    ood_std: float = 0.1
    # Moon fractions per split; 0.45 in test makes the default test split
    # come out at exactly 1500 positive / 1500 negative / 1500 OOD rows.
    split_fractions: tuple = (0.275, 0.275, 0.45)
    seed: int = 0

    def __post_init__(self):
        if self.n_moons < 2:
            raise DataError("n_moons must be >= 2")
        if self.moon_noise < 0 or self.cluster_std < 0 or self.ood_std < 0:
            raise DataError("noise levels must be nonnegative")
        if self.cluster_n < 0 or self.ood_n < 0:
            raise DataError("cluster counts must be nonnegative")
        if len(self.cluster_centers) != len(self.cluster_labels):
            raise DataError("cluster_centers and cluster_labels must align")
        if any(lbl not in (0, 1) for lbl in self.cluster_labels):
            raise DataError("cluster labels must be 0 or 1")
        if len(self.split_fractions) != 3:
            raise DataError("split_fractions must have three entries")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise DataError("split_fractions must sum to 1")
        if any(f < 0 for f in self.split_fractions):
            raise DataError("split_fractions must be nonnegative")


@dataclass(frozen=True)
class IdmClustersConfig:
    n_main: int = 400  # per class, per split
    main_centers: tuple = ((-2.0, 0.0), (2.0, 0.0))
    main_std: float = 0.3
    n_confusion: int = 200  # per class, per split
    confusion_centers: tuple = ((0.35, 2.0), (-0.35, 2.0))  # swapped vs. main sides
    confusion_std: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_main < 1 or self.n_confusion < 0:
            raise DataError("cluster counts must be positive")
        if self.main_std < 0 or self.confusion_std < 0:
            raise DataError("noise levels must be nonnegative")


@dataclass(frozen=True)
class SplitBundle:
    """Train/val/test feature tables plus a per-row provenance tag.

    ``groups[split]`` aligns with the rows of that split; tags are
    ``"moon"``, ``"cluster_pos"``, ``"cluster_neg"``, ``"ood"`` for the
    two-smiles data and ``"main"``, ``"confusion"`` for the cluster data.
    """

    train: LabeledFeatures
    val: LabeledFeatures
    test: LabeledFeatures
    groups: dict

    def split(self, name: str) -> LabeledFeatures:
        if name not in ("train", "val", "test"):
            raise DataError(f"unknown split {name!r}")
        return getattr(self, name)


def _two_moons(n: int, noise: float, rng: np.random.Generator):
    """Analytic two-moons: upper arc is class 0, lower shifted arc is class 1."""
    n0 = (n + 1) // 2  # odd n: class 0 gets the extra point
    n1 = n - n0
    theta0 = np.linspace(0.0, math.pi, n0)
    theta1 = np.linspace(0.0, math.pi, n1)
    x = np.empty((n, 2), dtype=np.float64)
    x[:n0, 0] = np.cos(theta0)
    x[:n0, 1] = np.sin(theta0)
    x[n0:, 0] = 1.0 - np.cos(theta1)
    x[n0:, 1] = 0.5 - np.sin(theta1)
    y = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    if noise > 0:
        x = x + noise * rng.standard_normal((n, 2))
    return x, y


def make_two_moons(n: int, noise: float, seed: int):
    """Seeded two-moons sample; returns (points, labels)."""
    if n < 2:
        raise DataError("n must be >= 2")
    rng = np.random.Generator(np.random.PCG64(seed))
    return _two_moons(n, noise, rng)


def _gaussian_blob(center, std: float, n: int, rng: np.random.Generator) -> np.ndarray:
    return np.asarray(center, dtype=np.float64) + std * rng.standard_normal((n, 2))


def make_two_smiles(cfg: TwoSmilesConfig = TwoSmilesConfig()) -> SplitBundle:
    """Generate the moons-plus-clusters benchmark with test-only OOD rows."""
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    moons_x, moons_y = _two_moons(cfg.n_moons, cfg.moon_noise, rng)

    # Stratified moon split: shuffle within each class, then slice
    # floor(frac * n_class) rows for train and val; the remainder is test.
    split_parts = {"train": [], "val": [], "test": []}  # lists of (x, y, group)
    for cls in (0, 1):
        idx = np.flatnonzero(moons_y == cls)
        perm = idx[rng.permutation(idx.shape[0])]
        k_train = int(math.floor(cfg.split_fractions[0] * idx.shape[0]))
        k_val = int(math.floor(cfg.split_fractions[1] * idx.shape[0]))
        chunks = {
            "train": perm[:k_train],
            "val": perm[k_train : k_train + k_val],
            "test": perm[k_train + k_val :],
        }
        for name, rows in chunks.items():
            split_parts[name].append(
                (moons_x[rows], moons_y[rows], ["moon"] * rows.shape[0])
            )

    for name in ("train", "val", "test"):
        for center, label in zip(cfg.cluster_centers, cfg.cluster_labels):
            pts = _gaussian_blob(center, cfg.cluster_std, cfg.cluster_n, rng)
            tag = "cluster_pos" if label == 1 else "cluster_neg"
            split_parts[name].append(
                (pts, np.full(cfg.cluster_n, label, dtype=np.int64), [tag] * cfg.cluster_n)
            )

    for center in cfg.ood_centers:
        pts = _gaussian_blob(center, cfg.ood_std, cfg.ood_n, rng)
        split_parts["test"].append(
            (pts, np.full(cfg.ood_n, OOD_LABEL, dtype=np.int64), ["ood"] * cfg.ood_n)
        )

    return _assemble(split_parts, num_classes=2)


def make_idm_clusters(cfg: IdmClustersConfig = IdmClustersConfig()) -> SplitBundle:
    """Generate the blobs-plus-swapped-confusion-site dataset (no OOD rows)."""
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    split_parts = {"train": [], "val": [], "test": []}
    for name in ("train", "val", "test"):
        for cls, center in enumerate(cfg.main_centers):
            pts = _gaussian_blob(center, cfg.main_std, cfg.n_main, rng)
            split_parts[name].append(
                (pts, np.full(cfg.n_main, cls, dtype=np.int64), ["main"] * cfg.n_main)
            )
        for cls, center in enumerate(cfg.confusion_centers):
            if cfg.n_confusion == 0:
                continue
            pts = _gaussian_blob(center, cfg.confusion_std, cfg.n_confusion, rng)
            split_parts[name].append(
                (pts, np.full(cfg.n_confusion, cls, dtype=np.int64),
                 ["confusion"] * cfg.n_confusion)
            )
    return _assemble(split_parts, num_classes=2)


def _assemble(split_parts: dict, num_classes: int) -> SplitBundle:
    tables = {}
    groups = {}
    for name in ("train", "val", "test"):
        xs = np.concatenate([p[0] for p in split_parts[name]], axis=0)
        ys = np.concatenate([p[1] for p in split_parts[name]], axis=0)
        tags = [t for p in split_parts[name] for t in p[2]]
        ids = tuple(f"{name}-{i:05d}" for i in range(xs.shape[0]))
        tables[name] = LabeledFeatures(ids=ids, x=xs, y=ys, num_classes=num_classes)
        groups[name] = tuple(tags)
    return SplitBundle(train=tables["train"], val=tables["val"], test=tables["test"],
                       groups=groups)


def save_groups_csv(ids, groups, path) -> None:
    """Write the per-row provenance tags as ``id,group`` rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "group"])
        for i, g in zip(ids, groups):
            writer.writerow([i, g])


def load_groups_csv(path) -> dict:
    """Read ``id,group`` rows into an id -> group mapping."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id", "group"]:
            raise DataError(f"malformed group file header in {path}: {header!r}")
        for row in reader:
            if len(row) != 2:
                raise DataError(f"malformed group row in {path}: {row!r}")
            out[row[0]] = row[1]
    return out
