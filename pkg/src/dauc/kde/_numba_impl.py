"""Numba-jitted kernel sums (default backend).

Queries are parallelized with ``prange``; the accumulation over references is
sequential in ascending index order for every query, so results do not depend
on the thread count and batch evaluation equals per-query evaluation bitwise.
``fastmath`` stays off to keep IEEE semantics identical across runs.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(parallel=True, cache=True)
def sum_gaussian(queries, refs, h):
    inv2h2 = 0.5 / (h * h)
    n_q, d = queries.shape
    n_r = refs.shape[0]
    out = np.empty(n_q, dtype=np.float64)
    for i in prange(n_q):
        acc = 0.0
        for j in range(n_r):
            sq = 0.0
            for k in range(d):
                diff = refs[j, k] - queries[i, k]
                sq += diff * diff
            acc += np.exp(-sq * inv2h2)
        out[i] = acc
    return out


@njit(parallel=True, cache=True)
def sum_exponential(queries, refs, h):
    inv_h = 1.0 / h
    n_q, d = queries.shape
    n_r = refs.shape[0]
    out = np.empty(n_q, dtype=np.float64)
    for i in prange(n_q):
        acc = 0.0
        for j in range(n_r):
            sq = 0.0
            for k in range(d):
                diff = refs[j, k] - queries[i, k]
                sq += diff * diff
            acc += np.exp(-np.sqrt(sq) * inv_h)
        out[i] = acc
    return out


@njit(parallel=True, cache=True)
def sum_tophat(queries, refs, h):
    h2 = h * h
    n_q, d = queries.shape
    n_r = refs.shape[0]
    out = np.empty(n_q, dtype=np.float64)
    for i in prange(n_q):
        count = 0.0
        for j in range(n_r):
            sq = 0.0
            for k in range(d):
                diff = refs[j, k] - queries[i, k]
                sq += diff * diff
            if sq <= h2:
                count += 1.0
        out[i] = count
    return out
