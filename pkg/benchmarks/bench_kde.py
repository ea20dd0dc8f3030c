"""Benchmark the numba-jitted kernel sums against the pure-numpy fallback.

Run from the repository root::

    python3 benchmarks/bench_kde.py
    python3 benchmarks/bench_kde.py --sizes 2000x500 10000x2000 --dims 2 8

Prints one row per (queries x references, dim, kernel) with the wall time of
both backends and their agreement, and fails loudly if the backends disagree
beyond 1e-12 relative.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from dauc.kde import KERNELS, KernelKind, kde_eval_batch, kde_fit, set_backend

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False


def time_backend(backend: str, model, queries, repeats: int) -> tuple[float, np.ndarray]:
    set_backend(backend)
    kde_eval_batch(model, queries[:1])  # warm up (JIT compile / cache load)
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = kde_eval_batch(model, queries)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", nargs="+", default=["1000x500", "4500x2000", "20000x5000"],
                        help="QxM pairs: query count x reference count")
    parser.add_argument("--dims", nargs="+", type=int, default=[2, 8])
    parser.add_argument("--kernels", nargs="+", default=list(KERNELS))
    parser.add_argument("--bandwidth", type=float, default=1.0)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if not HAS_NUMBA:
        print("numba unavailable; nothing to compare (numpy fallback only)")
        return 0

    rng = np.random.Generator(np.random.PCG64(args.seed))
    header = f"{'size':>12} {'dim':>4} {'kernel':>12} {'numba':>10} {'numpy':>10} {'speedup':>8} {'max rel diff':>13}"
    print(header)
    print("-" * len(header))
    worst = 0.0
    for size in args.sizes:
        q_n, m_n = (int(tok) for tok in size.lower().split("x"))
        for d in args.dims:
            refs = rng.standard_normal((m_n, d))
            queries = rng.standard_normal((q_n, d))
            for name in args.kernels:
                model = kde_fit(KernelKind(name, args.bandwidth), refs)
                t_jit, out_jit = time_backend("numba", model, queries, args.repeats)
                t_np, out_np = time_backend("numpy", model, queries, args.repeats)
                denom = np.maximum(np.abs(out_np), 1e-300)
                rel = float(np.max(np.abs(out_jit - out_np) / denom))
                worst = max(worst, rel)
                print(
                    f"{size:>12} {d:>4} {name:>12} "
                    f"{t_jit * 1e3:>8.1f}ms {t_np * 1e3:>8.1f}ms "
                    f"{t_np / t_jit:>7.1f}x {rel:>13.2e}"
                )
    set_backend("numba")
    if worst > 1e-12:
        print(f"\nbackend disagreement {worst:.2e} exceeds 1e-12")
        return 1
    print(f"\nbackends agree within {worst:.2e} (tolerance 1e-12)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
