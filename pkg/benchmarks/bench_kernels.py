"""Benchmark: compiled likelihood kernels vs the pure-numpy fallback.

Times the fused per-chunk (loglik, gradient, Hessian) reductions that
dominate estimation runtime, at the scale of one full-data Newton iteration.

    python3 benchmarks/bench_kernels.py [--n 200000] [--reps 20]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from pmclogit._kernels import likelihood_py as pyk

try:
    from pmclogit._kernels import _likelihood as ext
except ImportError:
    ext = None


def make_problem(n, k, C, seed=0):
    rng = np.random.default_rng(seed)
    X = np.ascontiguousarray(rng.standard_normal((n, k)))
    y = rng.integers(1, C + 1, n).astype(np.int64)
    beta = rng.standard_normal(k) * 0.3
    cut = np.sort(rng.standard_normal(C - 1))
    cut += np.arange(C - 1) * 0.05
    coef = np.ascontiguousarray(rng.standard_normal((C - 1, k + 1)) * 0.3)
    return X, y, beta, cut, coef


def best_of(fn, reps):
    best = float("inf")
    for _ in range(reps):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def max_diff(a, b):
    return max(
        abs(a[0] - b[0]),
        float(np.abs(a[1] - b[1]).max()),
        float(np.abs(a[2] - b[2]).max()),
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=200_000)
    parser.add_argument("--k", type=int, default=8)
    parser.add_argument("--reps", type=int, default=20)
    args = parser.parse_args()

    n, k, C = args.n, args.k, 3
    X, y, beta, cut, coef = make_problem(n, k, C)

    cases = [
        ("ologit logit", lambda m: m.ologit_chunk(X, y, beta, cut, 0)),
        ("ologit probit", lambda m: m.ologit_chunk(X, y, beta, cut, 1)),
        ("mnl", lambda m: m.mnl_chunk(X, y, coef, 2, C)),
    ]

    print(f"n={n:,} k={k} C={C} reps={args.reps} (best-of timing)")
    header = f"{'kernel':<14} {'python':>10} {'compiled':>10} {'speedup':>8} {'max|diff|':>10}"
    print(header)
    print("-" * len(header))
    for name, call in cases:
        t_py, out_py = best_of(lambda: call(pyk), args.reps)
        if ext is None:
            print(f"{name:<14} {t_py * 1e3:>8.2f}ms {'n/a':>10} {'n/a':>8} {'n/a':>10}")
            continue
        t_ext, out_ext = best_of(lambda: call(ext), args.reps)
        print(
            f"{name:<14} {t_py * 1e3:>8.2f}ms {t_ext * 1e3:>8.2f}ms "
            f"{t_py / t_ext:>7.1f}x {max_diff(out_py, out_ext):>10.2e}"
        )
    if ext is None:
        print("\ncompiled extension not built; install with a C compiler to compare")


if __name__ == "__main__":
    main()
