"""Time the numba kernels against their numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Both backends are called directly, so the environment flag does not
matter here. The first numba call is timed separately (JIT compile).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from bondsim import kernels
from bondsim.curve import LAMBDA_GRID, RCOND_STABLE


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def scoring_case(rng, n=2500, n_features=6, n_categories=40):
    q = rng.uniform(-1, 1, size=(n_features, n_categories))
    codes = rng.integers(0, n_categories, size=(n, n_features))
    w = np.full(n_features, 1.0 / n_features)
    return q, codes, w


def ns_case(rng, n=12):
    tau = np.sort(rng.uniform(0.5, 30.0, n))
    y = 200 - 80 * np.exp(-tau / 3) + rng.normal(0, 5, n)
    return tau, y, np.ones(n)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    if kernels.NUMBA is None:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    q, codes, w = scoring_case(rng)
    tau, y, sw = ns_case(rng)

    cases = {
        "score_candidates (2500 x 6)": lambda b: b.score_candidates(q, codes, w),
        "ns_grid_sse (12 pts, 200 lambdas)": lambda b: b.ns_grid_sse(tau, y, sw, LAMBDA_GRID, 3, RCOND_STABLE),
        "ns_solve (12 pts)": lambda b: b.ns_solve(tau, y, sw, 1.5, 3, RCOND_STABLE),
    }
    print(f"{'kernel':36s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s} {'compile s':>10s}")
    for name, call in cases.items():
        t0 = time.perf_counter()
        ref = call(kernels.NUMBA)
        compile_s = time.perf_counter() - t0
        a, b = call(kernels.NUMPY), ref
        a0 = np.asarray(a[0] if isinstance(a, tuple) else a, dtype=float)
        b0 = np.asarray(b[0] if isinstance(b, tuple) else b, dtype=float)
        ok = np.allclose(a0, b0, rtol=1e-9, atol=1e-9, equal_nan=True)
        t_np = _time(lambda: call(kernels.NUMPY), args.repeat)
        t_nb = _time(lambda: call(kernels.NUMBA), args.repeat)
        flag = "" if ok else "  MISMATCH"
        print(f"{name:36s} {t_np * 1e3:10.3f} {t_nb * 1e3:10.3f} {t_np / t_nb:8.1f} {compile_s:10.2f}{flag}")


if __name__ == "__main__":
    main()
