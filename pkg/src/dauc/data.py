"""Dataset containers and the latent-CSV interchange format.

Two immutable containers are shared by every other module: ``LabeledFeatures``
for raw classifier inputs and ``LatentDataset`` for latent rows annotated with
predictions. Both travel on disk as UTF-8 CSV files with a JSON metadata
sidecar (``<name>.meta.json`` recording ``num_classes``, ``dim`` and the split
name).

Latent CSV header::

    id,y_true,y_pred[,u],h0,h1,...,h{d-1}

Feature CSV header::

    id,y_true,x0,x1,...,x{k-1}

Floats are written with ``repr`` (shortest round-trip form), so a
save/load cycle reproduces values exactly. ``y_true`` may be ``-1``
(:data:`OOD_LABEL`) to mark gold out-of-distribution rows; ``y_pred`` is
always a real class index.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

#: Sentinel class label for gold out-of-distribution rows.
OOD_LABEL = -1


class DataError(ValueError):
    """Input data violates a contract (bad shapes, ranges, or files)."""


class ParseError(DataError):
    """A CSV/JSON file could not be parsed; message names the offending line."""


class InternalError(AssertionError):
    """An internal invariant was violated (maps to CLI exit code 3)."""


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalizationStats:
    """Per-dimension z-score statistics (population std, zero-variance -> 1)."""

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        stds = np.asarray(self.stds, dtype=np.float64)
        if means.ndim != 1 or stds.shape != means.shape:
            raise DataError("means and stds must be 1-D arrays of equal length")
        if not np.all(np.isfinite(means)) or not np.all(np.isfinite(stds)):
            raise DataError("normalization stats must be finite")
        if np.any(stds <= 0):
            raise DataError("stds must be strictly positive")
        object.__setattr__(self, "means", _freeze(means))
        object.__setattr__(self, "stds", _freeze(stds))

    @classmethod
    def fit(cls, x: np.ndarray) -> "NormalizationStats":
        """Fit per-column mean and population std; columns with std < 1e-12 get std 1."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise DataError("need a nonempty N x d matrix to fit normalization stats")
        means = x.mean(axis=0)
        stds = x.std(axis=0)
        stds = np.where(stds < 1e-12, 1.0, stds)
        return cls(means, stds)

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.means.shape[0]:
            raise DataError(
                f"dimension mismatch: stats have d={self.means.shape[0]}, "
                f"data has shape {x.shape}"
            )
        return (x - self.means) / self.stds

    def to_json(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "NormalizationStats":
        return cls(np.asarray(obj["means"]), np.asarray(obj["stds"]))


@dataclass(frozen=True)
class ClassPair:
    """A (true class, predicted class) pair indexing one validation corpus."""

    true_class: int
    pred_class: int


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def _check_ids(ids) -> tuple:
    ids = tuple(str(i) for i in ids)
    return ids


# ---------------------------------------------------------------------------
# Containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LabeledFeatures:
    """Raw classifier inputs: ids, an N x k feature matrix and true labels."""

    ids: tuple
    x: np.ndarray
    y: np.ndarray
    num_classes: int

    def __post_init__(self):
        ids = _check_ids(self.ids)
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        if x.ndim != 2 or x.shape[1] < 1:
            raise DataError("features must form an N x k matrix with k >= 1")
        if not np.all(np.isfinite(x)):
            raise DataError("features must be finite")
        if self.num_classes < 2:
            raise DataError("num_classes must be >= 2")
        if len(ids) != x.shape[0] or y.shape != (x.shape[0],):
            raise DataError("ids, features and labels must have equal length")
        bad = (y != OOD_LABEL) & ((y < 0) | (y >= self.num_classes))
        if np.any(bad):
            raise DataError("labels must be -1 or lie in [0, num_classes)")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "x", _freeze(x))
        object.__setattr__(self, "y", _freeze(y))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def take(self, indices) -> "LabeledFeatures":
        indices = np.asarray(indices)
        if indices.dtype == bool:
            indices = np.flatnonzero(indices)
        return LabeledFeatures(
            ids=tuple(self.ids[i] for i in indices),
            x=self.x[indices],
            y=self.y[indices],
            num_classes=self.num_classes,
        )

    def __eq__(self, other):
        return (
            isinstance(other, LabeledFeatures)
            and self.ids == other.ids
            and self.num_classes == other.num_classes
            and self.x.shape == other.x.shape
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
        )


@dataclass(frozen=True, eq=False)
class LatentDataset:
    """Latent rows with predictions: the universal interchange object.

    ``y_true`` entries are class indices in ``[0, num_classes)`` or
    :data:`OOD_LABEL`; ``y_pred`` entries are always class indices. ``u`` is an
    optional per-row uncertainty score in ``[0, 1]``.
    """

    ids: tuple
    latents: np.ndarray
    y_true: np.ndarray
    y_pred: np.ndarray
    num_classes: int
    u: np.ndarray | None = None

    def __post_init__(self):
        ids = _check_ids(self.ids)
        latents = np.asarray(self.latents, dtype=np.float64)
        y_true = np.asarray(self.y_true, dtype=np.int64)
        y_pred = np.asarray(self.y_pred, dtype=np.int64)
        if latents.ndim != 2 or latents.shape[1] < 1:
            raise DataError("latents must form an N x d matrix with d >= 1")
        if not np.all(np.isfinite(latents)):
            raise DataError("latents must be finite")
        if self.num_classes < 2:
            raise DataError("num_classes must be >= 2")
        n = latents.shape[0]
        if len(ids) != n or y_true.shape != (n,) or y_pred.shape != (n,):
            raise DataError("ids, latents and labels must have equal length")
        if np.any((y_pred < 0) | (y_pred >= self.num_classes)):
            raise DataError("y_pred entries must lie in [0, num_classes)")
        bad = (y_true != OOD_LABEL) & ((y_true < 0) | (y_true >= self.num_classes))
        if np.any(bad):
            raise DataError("y_true entries must be -1 or lie in [0, num_classes)")
        u = self.u
        if u is not None:
            u = np.asarray(u, dtype=np.float64)
            if u.shape != (n,):
                raise DataError("u must have one entry per row")
            if np.any(~np.isfinite(u)) or np.any((u < 0) | (u > 1)):
                raise DataError("u entries must lie in [0, 1]")
            u = _freeze(u)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "latents", _freeze(latents))
        object.__setattr__(self, "y_true", _freeze(y_true))
        object.__setattr__(self, "y_pred", _freeze(y_pred))
        object.__setattr__(self, "u", u)

    @property
    def n(self) -> int:
        return self.latents.shape[0]

    @property
    def dim(self) -> int:
        return self.latents.shape[1]

    def take(self, indices) -> "LatentDataset":
        indices = np.asarray(indices)
        if indices.dtype == bool:
            indices = np.flatnonzero(indices)
        return LatentDataset(
            ids=tuple(self.ids[i] for i in indices),
            latents=self.latents[indices],
            y_true=self.y_true[indices],
            y_pred=self.y_pred[indices],
            num_classes=self.num_classes,
            u=None if self.u is None else self.u[indices],
        )

    def with_latents(self, latents: np.ndarray) -> "LatentDataset":
        return LatentDataset(
            ids=self.ids,
            latents=latents,
            y_true=self.y_true,
            y_pred=self.y_pred,
            num_classes=self.num_classes,
            u=self.u,
        )

    def __eq__(self, other):
        if not isinstance(other, LatentDataset):
            return NotImplemented
        if (self.u is None) != (other.u is None):
            return False
        return (
            self.ids == other.ids
            and self.num_classes == other.num_classes
            and self.latents.shape == other.latents.shape
            and np.array_equal(self.latents, other.latents)
            and np.array_equal(self.y_true, other.y_true)
            and np.array_equal(self.y_pred, other.y_pred)
            and (self.u is None or np.array_equal(self.u, other.u))
        )


# ---------------------------------------------------------------------------
# z-score operations
# ---------------------------------------------------------------------------


def zscore_fit(ds: LatentDataset) -> NormalizationStats:
    """Fit per-dimension z-score stats on a dataset's latents (N >= 1)."""
    if ds.n < 1:
        raise DataError("cannot fit normalization stats on an empty dataset")
    return NormalizationStats.fit(ds.latents)


def zscore_apply(ds: LatentDataset, stats: NormalizationStats) -> LatentDataset:
    """Return a copy of ``ds`` with latents replaced by (latents - means) / stds."""
    return ds.with_latents(stats.transform(ds.latents))


# ---------------------------------------------------------------------------
# CSV / metadata I/O
# ---------------------------------------------------------------------------


def meta_path(path) -> Path:
    """Sidecar metadata path: ``dir/name.csv`` -> ``dir/name.meta.json``."""
    p = Path(path)
    return p.parent / (p.stem + ".meta.json")


def _load_meta(path: Path) -> dict:
    mp = meta_path(path)
    if not mp.exists():
        raise ParseError(f"missing metadata sidecar {mp}")
    try:
        meta = json.loads(mp.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in {mp}: {exc}") from exc
    for key in ("num_classes", "dim"):
        if key not in meta:
            raise ParseError(f"metadata {mp} is missing required key {key!r}")
    return meta


def _save_meta(path: Path, num_classes: int, dim: int, split: str, extra: dict | None = None):
    meta = {"num_classes": int(num_classes), "dim": int(dim), "split": split}
    if extra:
        meta.update(extra)
    meta_path(path).write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_meta(path) -> dict:
    """Public accessor for the metadata sidecar of a CSV file."""
    return _load_meta(Path(path))


def _parse_int(cell: str, what: str, lineno: int) -> int:
    try:
        return int(cell)
    except ValueError:
        raise ParseError(f"non-integer {what} {cell!r}, line {lineno}") from None


def _parse_float(cell: str, what: str, lineno: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric {what} {cell!r}, line {lineno}") from None
    if not np.isfinite(value):
        raise ParseError(f"non-finite {what} {cell!r}, line {lineno}")
    return value


def load_latent_csv(path) -> LatentDataset:
    """Load a latent CSV file plus its metadata sidecar into a LatentDataset."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    meta = _load_meta(path)
    num_classes = int(meta["num_classes"])
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"empty file {path}, line 1") from None
        has_u = len(header) > 3 and header[3] == "u"
        fixed = ["id", "y_true", "y_pred"] + (["u"] if has_u else [])
        d = len(header) - len(fixed)
        expected = fixed + [f"h{j}" for j in range(d)]
        if d < 1 or header != expected:
            raise ParseError(f"malformed header in {path}, line 1: {header!r}")
        if int(meta["dim"]) != d:
            raise ParseError(
                f"metadata dim {meta['dim']} does not match header dim {d} in {path}"
            )
        ids, y_true, y_pred, u_vals, rows = [], [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(
                    f"ragged row: expected {len(header)} cells, got {len(row)}, line {lineno}"
                )
            ids.append(row[0])
            yt = _parse_int(row[1], "y_true", lineno)
            yp = _parse_int(row[2], "y_pred", lineno)
            if yp < 0 or yp >= num_classes:
                raise ParseError(f"class index out of range, line {lineno}")
            if yt != OOD_LABEL and (yt < 0 or yt >= num_classes):
                raise ParseError(f"class index out of range, line {lineno}")
            y_true.append(yt)
            y_pred.append(yp)
            off = 3
            if has_u:
                uv = _parse_float(row[3], "u", lineno)
                if uv < 0.0 or uv > 1.0:
                    raise ParseError(f"uncertainty outside [0, 1], line {lineno}")
                u_vals.append(uv)
                off = 4
            rows.append([_parse_float(c, "latent value", lineno) for c in row[off:]])
    latents = np.asarray(rows, dtype=np.float64).reshape(len(ids), d)
    return LatentDataset(
        ids=tuple(ids),
        latents=latents,
        y_true=np.asarray(y_true, dtype=np.int64),
        y_pred=np.asarray(y_pred, dtype=np.int64),
        num_classes=num_classes,
        u=np.asarray(u_vals, dtype=np.float64) if u_vals else None,
    )


def save_latent_csv(ds: LatentDataset, path, split: str = "unspecified",
                    meta_extra: dict | None = None) -> None:
    """Write a latent CSV file plus its metadata sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["id", "y_true", "y_pred"]
    if ds.u is not None:
        header.append("u")
    header += [f"h{j}" for j in range(ds.dim)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(ds.n):
            row = [ds.ids[i], str(int(ds.y_true[i])), str(int(ds.y_pred[i]))]
            if ds.u is not None:
                row.append(repr(float(ds.u[i])))
            row += [repr(float(v)) for v in ds.latents[i]]
            writer.writerow(row)
    _save_meta(path, ds.num_classes, ds.dim, split, meta_extra)


def load_features_csv(path) -> LabeledFeatures:
    """Load a feature CSV file plus its metadata sidecar."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    meta = _load_meta(path)
    num_classes = int(meta["num_classes"])
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"empty file {path}, line 1") from None
        d = len(header) - 2
        expected = ["id", "y_true"] + [f"x{j}" for j in range(d)]
        if d < 1 or header != expected:
            raise ParseError(f"malformed header in {path}, line 1: {header!r}")
        ids, ys, rows = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(
                    f"ragged row: expected {len(header)} cells, got {len(row)}, line {lineno}"
                )
            ids.append(row[0])
            yt = _parse_int(row[1], "y_true", lineno)
            if yt != OOD_LABEL and (yt < 0 or yt >= num_classes):
                raise ParseError(f"class index out of range, line {lineno}")
            ys.append(yt)
            rows.append([_parse_float(c, "feature value", lineno) for c in row[2:]])
    x = np.asarray(rows, dtype=np.float64).reshape(len(ids), d)
    return LabeledFeatures(
        ids=tuple(ids),
        x=x,
        y=np.asarray(ys, dtype=np.int64),
        num_classes=num_classes,
    )


def save_features_csv(feats: LabeledFeatures, path, split: str = "unspecified",
                      meta_extra: dict | None = None) -> None:
    """Write a feature CSV file plus its metadata sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["id", "y_true"] + [f"x{j}" for j in range(feats.dim)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(feats.n):
            writer.writerow(
                [feats.ids[i], str(int(feats.y[i]))]
                + [repr(float(v)) for v in feats.x[i]]
            )
    _save_meta(path, feats.num_classes, feats.dim, split, meta_extra)
