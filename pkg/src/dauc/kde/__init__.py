"""Exact kernel density estimation over latent vectors.

A :class:`KdeModel` stores its reference rows verbatim and evaluates the mean
kernel value between a query and every reference (brute force, O(M*Q*d); no
trees or approximations). Kernels are L1-normalized so densities integrate to
one, which keeps scores comparable across reference sets of different sizes.

Supported kernels (bandwidth ``h``, dimension ``d``, distance ``r``):

* ``gaussian``:     ``(2*pi*h^2)^(-d/2) * exp(-r^2 / (2 h^2))``
* ``exponential``:  ``c_e(d, h) * exp(-r / h)`` with
  ``c_e = Gamma(d/2) / (2 * pi^(d/2) * Gamma(d) * h^d)``
* ``tophat``:       ``c_t(d, h) * 1[r <= h]`` with
  ``c_t = Gamma(d/2 + 1) / (pi^(d/2) * h^d)``

Two interchangeable backends compute the hot reference sums: a numba-jitted
one (default) and a pure-numpy one. Set ``DAUC_NO_NUMBA=1`` before import (or
call :func:`set_backend`) to force the numpy path; ``DAUC_THREADS`` caps the
numba thread count. Both backends fix the summation order (ascending
reference index per query), so repeated runs are deterministic and
``kde_eval_batch`` equals row-by-row ``kde_eval`` bitwise.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from ..data import DataError

KERNELS = ("gaussian", "exponential", "tophat")

from . import _numpy_impl

_numba_backend = None
_NUMBA_ERROR: Exception | None = None
if os.environ.get("DAUC_NO_NUMBA", "").strip().lower() not in ("1", "true", "yes"):
    try:
        from . import _numba_impl as _numba_backend
    except ImportError as exc:  # pragma: no cover - depends on environment
        _NUMBA_ERROR = exc

_BACKEND = "numba" if _numba_backend is not None else "numpy"


def active_backend() -> str:
    """Name of the backend currently used for kernel sums."""
    return _BACKEND


def set_backend(name: str) -> None:
    """Select the kernel-sum backend: ``"numba"`` or ``"numpy"``."""
    global _BACKEND
    if name not in ("numba", "numpy"):
        raise DataError(f"unknown KDE backend {name!r}")
    if name == "numba" and _numba_backend is None:
        raise DataError(f"numba backend unavailable: {_NUMBA_ERROR}")
    _BACKEND = name


def _thread_cap() -> None:
    raw = os.environ.get("DAUC_THREADS")
    if not raw:
        return
    try:
        n = int(raw)
    except ValueError:
        raise DataError(f"DAUC_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise DataError(f"DAUC_THREADS must be a positive integer, got {raw!r}")
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


@dataclass(frozen=True)
class KernelKind:
    """Kernel family plus bandwidth.

    ``scale`` multiplies every kernel evaluation by a positive constant; it
    exists to express unnormalized kernel variants, whose rescaling must leave
    all categorization decisions unchanged.
    """

    name: str
    bandwidth: float
    scale: float = 1.0

    def __post_init__(self):
        if self.name not in KERNELS:
            raise DataError(f"unknown kernel {self.name!r}; expected one of {KERNELS}")
        if not (math.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise DataError("bandwidth must be a positive finite real")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise DataError("kernel scale must be a positive finite real")


@dataclass(frozen=True)
class KdeModel:
    """A fitted density model: kernel plus verbatim reference rows (M x d)."""

    kernel: KernelKind
    refs: np.ndarray

    def __post_init__(self):
        refs = np.ascontiguousarray(self.refs, dtype=np.float64)
        if refs.ndim != 2:
            raise DataError("reference rows must form an M x d matrix")
        if not np.all(np.isfinite(refs)):
            raise DataError("reference rows must be finite")
        refs.flags.writeable = False
        object.__setattr__(self, "refs", refs)

    @property
    def n_refs(self) -> int:
        return self.refs.shape[0]

    @property
    def dim(self) -> int:
        return self.refs.shape[1]


def log_normalizer(name: str, dim: int, bandwidth: float) -> float:
    """Log of the L1-normalizing constant for a kernel in ``dim`` dimensions."""
    d, h = dim, bandwidth
    if name == "gaussian":
        return -0.5 * d * math.log(2.0 * math.pi * h * h)
    if name == "exponential":
        return (
            math.lgamma(0.5 * d)
            - math.log(2.0)
            - 0.5 * d * math.log(math.pi)
            - math.lgamma(d)
            - d * math.log(h)
        )
    if name == "tophat":
        return math.lgamma(0.5 * d + 1.0) - 0.5 * d * math.log(math.pi) - d * math.log(h)
    raise DataError(f"unknown kernel {name!r}")


def kernel_eval(kernel: KernelKind, a: np.ndarray, b: np.ndarray) -> float:
    """Evaluate the kernel between two latent vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or a.shape != b.shape:
        raise DataError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    sq = float(np.dot(diff, diff))
    h = kernel.bandwidth
    norm = kernel.scale * math.exp(log_normalizer(kernel.name, a.shape[0], h))
    if kernel.name == "gaussian":
        return norm * math.exp(-sq * (0.5 / (h * h)))
    if kernel.name == "exponential":
        return norm * math.exp(-math.sqrt(sq) / h)
    return norm if sq <= h * h else 0.0


def kde_fit(kernel: KernelKind, refs: np.ndarray) -> KdeModel:
    """Store reference rows verbatim; an empty (0 x d) reference set is allowed."""
    return KdeModel(kernel=kernel, refs=refs)


def kde_eval_batch(model: KdeModel, queries: np.ndarray) -> np.ndarray:
    """Mean kernel value between each query row and all references.

    Returns zeros for an empty reference set (empty-corpus rule).
    """
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    if queries.ndim != 2 or queries.shape[1] != model.dim:
        raise DataError(
            f"dimension mismatch: model has d={model.dim}, queries have shape {queries.shape}"
        )
    m = model.n_refs
    if m == 0:
        return np.zeros(queries.shape[0], dtype=np.float64)
    if _BACKEND == "numba":
        _thread_cap()
        impl = _numba_backend
    else:
        impl = _numpy_impl
    h = model.kernel.bandwidth
    name = model.kernel.name
    if name == "gaussian":
        sums = impl.sum_gaussian(queries, model.refs, h)
    elif name == "exponential":
        sums = impl.sum_exponential(queries, model.refs, h)
    else:
        sums = impl.sum_tophat(queries, model.refs, h)
    factor = model.kernel.scale * math.exp(log_normalizer(name, model.dim, h)) / m
    return sums * factor


def kde_eval(model: KdeModel, x: np.ndarray) -> float:
    """Single-query density; identical to the matching ``kde_eval_batch`` entry."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DataError("query must be a 1-D vector")
    return float(kde_eval_batch(model, x[None, :])[0])
