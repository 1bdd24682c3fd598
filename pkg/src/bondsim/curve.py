"""Nelson-Siegel spread curves, least-squares fitting and error metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .errors import (
    AllExcluded,
    DegenerateDesign,
    EmptyInput,
    LengthMismatch,
    NonPositiveMaturity,
    TooFewPoints,
)

LAMBDA_GRID = np.geomspace(0.05, 30.0, 200)
TWO_POINT_LAMBDA = 2.0
REFINE_SPAN = 2
REFINE_POINTS = 65
# Only the lowest few local minima are refined at each level; flat,
# roundoff-noisy stretches of SSE(lambda) can hold hundreds of spurious ones.
REFINE_MINIMA = 4
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

# Collinearity guards for the design columns (see kernels). RCOND_EXACT only
# rejects designs too ill-conditioned for double precision, so noiseless
# curves are recovered to well under 1e-6 bps. RCOND_STABLE also rejects
# decays where the slope and curvature loadings are nearly collinear over the
# sampled maturities: there the betas blow up into huge offsetting pairs that
# fit noisy points but extrapolate wildly to other maturities.
RCOND_EXACT = 1e-6
RCOND_STABLE = 1e-2


@dataclass(frozen=True)
class NSParams:
    """Level, slope and curvature in bps; decay ``lam`` in years."""

    beta0: float
    beta1: float
    beta2: float
    lam: float

    def __post_init__(self):
        vals = (self.beta0, self.beta1, self.beta2, self.lam)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"NS parameters must be finite: {vals}")
        if self.lam <= 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")

    def scaled(self, alpha: float) -> "NSParams":
        return NSParams(alpha * self.beta0, alpha * self.beta1, alpha * self.beta2, self.lam)

    def as_dict(self) -> dict:
        return {"beta0": self.beta0, "beta1": self.beta1, "beta2": self.beta2, "lambda": self.lam}


def ns_spread(params: NSParams, tau):
    """Spread in bps at maturity ``tau`` (scalar or array, years)."""
    t = np.asarray(tau, dtype=np.float64)
    if np.any(~(t > 0)):
        raise NonPositiveMaturity(f"maturity must be > 0, got {tau!r}")
    slope, curv = kernels.ns_loadings_numpy(t, params.lam)
    s = params.beta0 + params.beta1 * slope + params.beta2 * curv
    return float(s) if s.ndim == 0 else s


@dataclass(frozen=True)
class CurveFit:
    params: NSParams
    n_points: int
    in_sample_rmse_bps: float
    residuals: tuple[tuple[float, float], ...]
    n_factors: int = 3
    sse: float = 0.0

    def predict(self, tau):
        return ns_spread(self.params, tau)

    def as_dict(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "n_points": self.n_points,
            "n_factors": self.n_factors,
            "in_sample_rmse_bps": self.in_sample_rmse_bps,
        }


def _golden(f, a: float, b: float, tol: float = 1e-12, max_iter: int = 200):
    """Minimise a unimodal ``f`` on [a, b] to an absolute bracket ``tol``; returns (x, f(x))."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _local_minima(values: np.ndarray, limit: int | None = None) -> list[int]:
    """Indices of local minima, lowest first, at most ``limit`` of them."""
    v = np.where(np.isfinite(values), values, np.inf)
    n = v.size
    out = []
    for j in range(n):
        left = v[j - 1] if j > 0 else np.inf
        right = v[j + 1] if j < n - 1 else np.inf
        if np.isfinite(v[j]) and v[j] <= left and v[j] <= right:
            out.append(j)
    out.sort(key=lambda j: (v[j], j))
    return out if limit is None else out[:limit]


def fit_ns(
    points: Sequence[tuple[float, float]],
    weights: Sequence[float] | None = None,
    *,
    refine: bool = True,
    rcond: float = RCOND_EXACT,
    backend: kernels.Backend | None = None,
) -> CurveFit:
    """Fit a Nelson-Siegel curve to (maturity, spread) points.

    Scans the decay over ``LAMBDA_GRID`` solving the betas by linear least
    squares at each grid value, then golden-section refines log(lambda)
    between the neighbours of each local grid minimum and keeps the best.
    With fewer than four distinct maturities the curvature factor is dropped;
    with exactly two the decay is fixed at ``TWO_POINT_LAMBDA``. Decays whose
    design fails the ``rcond`` collinearity guard are skipped.
    """
    be = backend or kernels.active()
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2) if len(points) else np.empty((0, 2))
    if pts.shape[0] < 2:
        raise TooFewPoints(f"need at least 2 points, got {pts.shape[0]}")
    tau = np.ascontiguousarray(pts[:, 0])
    y = np.ascontiguousarray(pts[:, 1])
    if np.any(~(tau > 0)):
        raise NonPositiveMaturity("all maturities must be > 0")
    if not np.all(np.isfinite(y)):
        raise ValueError("spreads must be finite")
    if weights is None:
        sw = np.ones_like(tau)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != tau.shape or np.any(~(w > 0)) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be positive, finite and one per point")
        sw = np.sqrt(w)

    distinct = np.unique(tau).size
    if distinct < 2:
        raise DegenerateDesign("all maturities are identical")
    ncols = 3 if distinct >= 4 else 2

    if distinct == 2:
        lam = TWO_POINT_LAMBDA
        beta, sse = be.ns_solve(tau, y, sw, lam, ncols, rcond)
    else:
        grid_sse = be.ns_grid_sse(tau, y, sw, LAMBDA_GRID, ncols, rcond)
        if ncols == 3 and not np.any(np.isfinite(grid_sse)):
            # curvature not separable from slope anywhere on the grid
            ncols = 2
            grid_sse = be.ns_grid_sse(tau, y, sw, LAMBDA_GRID, ncols, rcond)
        if not np.any(np.isfinite(grid_sse)):
            raise DegenerateDesign("loadings are collinear at every decay on the grid")
        i = int(np.argmin(grid_sse))
        lam, sse = float(LAMBDA_GRID[i]), float(grid_sse[i])
        if refine:

            def objective(log_lam):
                return be.ns_solve(tau, y, sw, math.exp(log_lam), ncols, rcond)[1]

            # SSE(lambda) can be multimodal, with wells closer together than
            # the grid spacing when the curvature factor is near zero; each
            # low local grid minimum gets a fine sub-scan, then golden-section
            # on the low sub-scan minima.
            for j in _local_minima(grid_sse, REFINE_MINIMA):
                lo = LAMBDA_GRID[max(j - REFINE_SPAN, 0)]
                hi = LAMBDA_GRID[min(j + REFINE_SPAN, LAMBDA_GRID.size - 1)]
                fine = np.geomspace(lo, hi, REFINE_POINTS)
                fine_sse = be.ns_grid_sse(tau, y, sw, fine, ncols, rcond)
                for m in _local_minima(fine_sse, REFINE_MINIMA):
                    a = math.log(fine[max(m - 1, 0)])
                    b = math.log(fine[min(m + 1, fine.size - 1)])
                    x, fx = _golden(objective, a, b)
                    if fx < sse:
                        lam, sse = math.exp(x), fx
        beta, sse = be.ns_solve(tau, y, sw, lam, ncols, rcond)
    if not math.isfinite(sse):
        raise DegenerateDesign("rank-deficient design")
    params = NSParams(float(beta[0]), float(beta[1]), float(beta[2]) if ncols == 3 else 0.0, float(lam))
    fitted = ns_spread(params, tau)
    resid = y - fitted
    return CurveFit(
        params=params,
        n_points=int(tau.size),
        in_sample_rmse_bps=float(np.sqrt(np.mean(resid**2))),
        residuals=tuple((float(t), float(r)) for t, r in zip(tau, resid)),
        n_factors=ncols,
        sse=float(sse),
    )


def _pair(pred, actual) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64).ravel()
    a = np.asarray(actual, dtype=np.float64).ravel()
    if p.size != a.size:
        raise LengthMismatch(f"{p.size} predictions vs {a.size} actuals")
    if p.size == 0:
        raise EmptyInput("no values")
    return p, a


def rmse(pred, actual) -> float:
    p, a = _pair(pred, actual)
    return float(np.sqrt(np.mean((p - a) ** 2)))


def mape(pred, actual, *, eps: float = 1e-9, return_excluded: bool = False):
    """Mean absolute percentage error; points with ``|actual| < eps`` are skipped.

    With ``return_excluded`` the result is ``(mape_pct, n_excluded)``.
    """
    p, a = _pair(pred, actual)
    keep = np.abs(a) >= eps
    n_excl = int(keep.size - keep.sum())
    if not keep.any():
        raise AllExcluded(f"all {keep.size} actual values are within {eps} of zero")
    val = float(100.0 * np.mean(np.abs((p[keep] - a[keep]) / a[keep])))
    return (val, n_excl) if return_excluded else val


def tenor_grid(start: float = 0.25, stop: float = 30.0, n: int = 120) -> np.ndarray:
    return np.linspace(start, stop, n)


def write_curve_csv(params: NSParams, path: str | Path, grid: np.ndarray | None = None) -> None:
    taus = tenor_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    values = ns_spread(params, taus)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tau_years", "spread_bps"])
        for t, s in zip(np.atleast_1d(taus), np.atleast_1d(values)):
            w.writerow([repr(float(t)), repr(float(s))])
