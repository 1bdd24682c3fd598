"""Hot loops: candidate scoring and the Nelson-Siegel lambda scan.

Each kernel has a numba ``@njit`` version and a pure-numpy version with the
same signature. The numba path is used when numba imports and the
environment variable ``BONDSIM_DISABLE_NUMBA`` is unset or ``0``; otherwise
the numpy path is used. Both are always importable, so tests can compare
them directly.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


# A design column counts as collinear with the ones before it when the part
# of it orthogonal to them (|R[k, k]| after QR) is at most ``rcond`` times its
# own norm. Such designs report sse = inf and NaN betas.


def numba_disabled() -> bool:
    return os.environ.get("BONDSIM_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


# --------------------------------------------------------------------------
# candidate scoring
# --------------------------------------------------------------------------

def score_candidates_numpy(qrows, codes, weights):
    """Weighted mean of per-feature similarities for every candidate row.

    ``qrows[f, v]`` is the similarity of the query's feature ``f`` to
    category code ``v``; ``codes`` (n, F) holds candidate category codes and
    ``weights`` (F,) sums to 1. Zero-weight features are skipped. Each score
    is clamped to the [min, max] of its weighted per-feature values; NaN
    (missing embedding) propagates.
    """
    n = codes.shape[0]
    acc = np.zeros(n)
    lo = np.full(n, np.inf)
    hi = np.full(n, -np.inf)
    for f in range(codes.shape[1]):
        w = weights[f]
        if w == 0.0:
            continue
        s = qrows[f, codes[:, f]]
        acc = acc + w * s
        lo = np.minimum(lo, s)
        hi = np.maximum(hi, s)
    return np.minimum(np.maximum(acc, lo), hi)


def _score_candidates_loop(qrows, codes, weights):
    n = codes.shape[0]
    nf = codes.shape[1]
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        lo = math.inf
        hi = -math.inf
        bad = False
        for f in range(nf):
            w = weights[f]
            if w == 0.0:
                continue
            s = qrows[f, codes[i, f]]
            if s != s:
                bad = True
            acc = acc + w * s
            if s < lo:
                lo = s
            if s > hi:
                hi = s
        if bad:
            out[i] = math.nan
        else:
            if acc < lo:
                acc = lo
            if acc > hi:
                acc = hi
            out[i] = acc
    return out


# --------------------------------------------------------------------------
# Nelson-Siegel least squares for a fixed decay
# --------------------------------------------------------------------------

def ns_loadings_numpy(tau, lam):
    """Slope and curvature loadings at maturities ``tau`` for decay ``lam``."""
    x = np.asarray(tau, dtype=np.float64) / lam
    slope = -np.expm1(-x) / x
    return slope, slope - np.exp(-x)


def _design(tau, lam, ncols):
    slope, curv = ns_loadings_numpy(tau, lam)
    cols = [np.ones_like(slope), slope, curv][:ncols]
    return np.stack(cols, axis=1)


def ns_solve_numpy(tau, y, sw, lam, ncols, rcond):
    """Weighted LS for the betas at fixed lambda.

    ``sw`` are square roots of the point weights. Returns ``(betas, sse)``
    where ``sse`` is the weighted residual sum of squares, or ``inf`` when the
    design is rank deficient.
    """
    X = _design(tau, lam, ncols) * sw[:, None]
    b = y * sw
    if X.shape[0] < ncols:
        return np.full(3, np.nan), math.inf
    q, r = np.linalg.qr(X)
    d = np.abs(np.diag(r))
    norms = np.sqrt((X * X).sum(axis=0))
    if d.size == 0 or not np.all(np.isfinite(d)) or np.any(d <= rcond * norms):
        return np.full(3, np.nan), math.inf
    beta = np.linalg.solve(r, q.T @ b)
    res = b - X @ beta
    out = np.zeros(3)
    out[:ncols] = beta
    return out, float(res @ res)


def ns_grid_sse_numpy(tau, y, sw, lambdas, ncols, rcond):
    """SSE at every lambda in ``lambdas`` (batched QR across the grid)."""
    x = np.asarray(tau)[None, :] / np.asarray(lambdas)[:, None]
    slope = -np.expm1(-x) / x
    cols = [np.ones_like(slope), slope, slope - np.exp(-x)][:ncols]
    X = np.stack(cols, axis=2) * sw[None, :, None]
    b = y * sw
    if X.shape[1] < ncols:
        return np.full(len(lambdas), np.inf)
    q, r = np.linalg.qr(X)
    d = np.abs(np.diagonal(r, axis1=1, axis2=2))
    norms = np.sqrt((X * X).sum(axis=1))
    ok = np.all(d > rcond * norms, axis=1)
    qtb = np.einsum("gnk,n->gk", q, b)
    sse = np.full(len(lambdas), np.inf)
    for g in np.flatnonzero(ok):
        beta = np.linalg.solve(r[g], qtb[g])
        res = b - X[g] @ beta
        sse[g] = res @ res
    return sse


def _ns_solve_loop(tau, y, sw, lam, ncols, rcond):
    # Householder QR on an (n, ncols) design, ncols <= 3
    n = tau.shape[0]
    A = np.empty((n, ncols))
    b = np.empty(n)
    for i in range(n):
        x = tau[i] / lam
        slope = -math.expm1(-x) / x
        A[i, 0] = sw[i]
        if ncols > 1:
            A[i, 1] = slope * sw[i]
        if ncols > 2:
            A[i, 2] = (slope - math.exp(-x)) * sw[i]
        b[i] = y[i] * sw[i]
    X = A.copy()
    rhs = b.copy()
    collinear = n < ncols
    for k in range(ncols):
        cn = 0.0
        for i in range(n):
            cn += A[i, k] * A[i, k]
        cn = math.sqrt(cn)
        norm = 0.0
        for i in range(k, n):
            norm += A[i, k] * A[i, k]
        norm = math.sqrt(norm)
        if norm == 0.0 or k >= n:
            collinear = True
            continue
        alpha = -norm if A[k, k] >= 0.0 else norm
        v0 = A[k, k] - alpha
        # v = (v0, A[k+1:, k]); H = I - 2 v v^T / (v^T v)
        vtv = v0 * v0
        for i in range(k + 1, n):
            vtv += A[i, k] * A[i, k]
        if vtv > 0.0:
            for j in range(k + 1, ncols):
                dot = v0 * A[k, j]
                for i in range(k + 1, n):
                    dot += A[i, k] * A[i, j]
                c = 2.0 * dot / vtv
                A[k, j] -= c * v0
                for i in range(k + 1, n):
                    A[i, j] -= c * A[i, k]
            dot = v0 * rhs[k]
            for i in range(k + 1, n):
                dot += A[i, k] * rhs[i]
            c = 2.0 * dot / vtv
            rhs[k] -= c * v0
            for i in range(k + 1, n):
                rhs[i] -= c * A[i, k]
        A[k, k] = alpha
        if not (abs(alpha) > rcond * cn):
            collinear = True
    beta = np.zeros(3)
    if collinear:
        for k in range(3):
            beta[k] = math.nan
        return beta, math.inf
    for k in range(ncols - 1, -1, -1):
        s = rhs[k]
        for j in range(k + 1, ncols):
            s -= A[k, j] * beta[j]
        beta[k] = s / A[k, k]
    sse = 0.0
    for i in range(n):
        r = b[i]
        for j in range(ncols):
            r -= X[i, j] * beta[j]
        sse += r * r
    return beta, sse


def _ns_grid_sse_loop(tau, y, sw, lambdas, ncols, rcond):
    out = np.empty(lambdas.shape[0])
    for g in range(lambdas.shape[0]):
        _, sse = _ns_solve_loop(tau, y, sw, lambdas[g], ncols, rcond)
        out[g] = sse
    return out


if HAVE_NUMBA:
    score_candidates_numba = njit(cache=True, nogil=True)(_score_candidates_loop)
    ns_solve_numba = njit(cache=True, nogil=True)(_ns_solve_loop)
    _ns_solve_for_grid = ns_solve_numba

    @njit(cache=True, nogil=True)
    def ns_grid_sse_numba(tau, y, sw, lambdas, ncols, rcond):
        out = np.empty(lambdas.shape[0])
        for g in range(lambdas.shape[0]):
            _, sse = _ns_solve_for_grid(tau, y, sw, lambdas[g], ncols, rcond)
            out[g] = sse
        return out
else:  # pragma: no cover
    score_candidates_numba = _score_candidates_loop
    ns_solve_numba = _ns_solve_loop
    ns_grid_sse_numba = _ns_grid_sse_loop


class Backend:
    """Bundle of kernel implementations."""

    def __init__(self, name, score_candidates, ns_solve, ns_grid_sse):
        self.name = name
        self.score_candidates = score_candidates
        self.ns_solve = ns_solve
        self.ns_grid_sse = ns_grid_sse

    def __repr__(self):
        return f"Backend({self.name!r})"


NUMPY = Backend("numpy", score_candidates_numpy, ns_solve_numpy, ns_grid_sse_numpy)
NUMBA = Backend("numba", score_candidates_numba, ns_solve_numba, ns_grid_sse_numba) if HAVE_NUMBA else None


def active() -> Backend:
    """Backend selected by the environment at call time."""
    if NUMBA is None or numba_disabled():
        return NUMPY
    return NUMBA
