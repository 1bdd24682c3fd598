"""Sparsify, augment, refit, score: the reconstruction benchmark.

For each eligible issuer and each drop count, a trial removes a random subset
of the issuer's bonds, retrieves peers for every retained (query) bond with a
chosen similarity model, post-filters them, fits a Nelson-Siegel curve to the
queries plus their peers and scores that curve on the held-out bonds. Trials
are binned by sparsity and summarised with boxplot statistics.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .catalog import FEATURES, Bond, Catalog, sparsify_issuer
from .curve import RCOND_STABLE, CurveFit, fit_ns, mape, ns_spread, rmse, tenor_grid
from .embedding import VectorStore
from .errors import (
    AllExcluded,
    BondSimError,
    CurveError,
    DropTooLarge,
    EvaluationError,
    InvalidConfig,
    NoCandidatesAfterFilters,
    NoEligibleIssuers,
    ZeroTotal,
)
from .filters import DEFAULT_FILTERS, FilterConfig, apply_filters
from .search import (
    DEFAULT_PROFILE,
    UNIFORM,
    FeatureWeights,
    Neighbor,
    NumericalProfile,
    SimilarityResult,
    TwoStepOrder,
    generic_search,
    numerical_search,
    one_hot_top_k,
    top_k,
    two_step_search,
)

SPARSITY_MODES = ("complement", "paper_formula")
RMSE_MODES = ("holdout", "grid")


def sparsity_metric(n_queries: int, n_similars: int, mode: str = "complement") -> float:
    """Share of the fit set that came from peers (``complement``) or from the issuer itself.

    ``complement`` is ``n_similars / (n_queries + n_similars)``, so two
    retained bonds augmented with five peers sit at 5/7. ``paper_formula``
    is the other share, ``n_queries / (n_queries + n_similars)``.
    """
    if n_queries < 0 or n_similars < 0:
        raise ValueError("counts must be nonnegative")
    total = n_queries + n_similars
    if total == 0:
        raise ZeroTotal("n_queries + n_similars is zero")
    if mode == "complement":
        return n_similars / total
    if mode == "paper_formula":
        return n_queries / total
    raise InvalidConfig(f"unknown sparsity mode {mode!r}; expected one of {SPARSITY_MODES}")


# -- model variants ---------------------------------------------------------------

class VariantKind(str, enum.Enum):
    XEmbedding = "XEmbedding"
    OneHot = "OneHot"
    Generic = "Generic"
    Numerical = "Numerical"
    TwoStep1 = "TwoStep1"
    TwoStep2 = "TwoStep2"

    @property
    def needs_store(self) -> bool:
        return self in (VariantKind.XEmbedding, VariantKind.TwoStep1, VariantKind.TwoStep2)


DEFAULT_GENERIC_RULES = ("IssuerIndustry", "rating")


@dataclass(frozen=True)
class ModelVariant:
    """One search strategy with its settings.

    ``store`` is required by the embedding-based kinds and ignored by the
    rest. ``label`` names the variant in reports; it defaults to the kind.
    """

    kind: VariantKind
    weights: FeatureWeights = UNIFORM
    store: VectorStore | None = field(default=None, compare=False, repr=False)
    shortlist_size: int | None = None
    rules: tuple = DEFAULT_GENERIC_RULES
    profile: NumericalProfile = DEFAULT_PROFILE
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", VariantKind(self.kind))
        if self.kind.needs_store and self.store is None:
            raise InvalidConfig(f"variant {self.kind.value} needs a vector store")
        if not self.rules:
            raise InvalidConfig("generic rules must not be empty")

    @property
    def name(self) -> str:
        return self.label or self.kind.value

    def rank(self, query: Bond, catalog: Catalog, k: int, *, exclude_issuer: bool = True) -> SimilarityResult:
        """Top ``k`` peers of ``query`` as a full ``SimilarityResult``."""
        kind = self.kind
        if kind is VariantKind.XEmbedding:
            return top_k(query, catalog, k, self.weights, self.store, exclude_issuer=exclude_issuer)
        if kind is VariantKind.OneHot:
            return one_hot_top_k(query, catalog, k, self.weights, exclude_issuer=exclude_issuer)
        if kind is VariantKind.Numerical:
            return numerical_search(query, catalog, k, self.profile, exclude_issuer=exclude_issuer)
        if kind is VariantKind.Generic:
            own = set(catalog.issuer_index.get(query.issuer_id, ())) if exclude_issuer else set()
            ids = [b for b in generic_search(query, catalog, self.rules) if b not in own]
            return SimilarityResult(query.bond_id, tuple(Neighbor(b, 1.0) for b in ids[:k]))
        order = (
            TwoStepOrder.categorical_then_numerical
            if kind is VariantKind.TwoStep1
            else TwoStepOrder.numerical_then_categorical
        )
        return two_step_search(
            query, catalog, k, order, self.shortlist_size, self.weights, self.store,
            self.profile, exclude_issuer=exclude_issuer,
        )

    def search(self, query: Bond, catalog: Catalog, k: int) -> list[tuple[str, float]]:
        """Ranked ``(bond_id, score)`` peers from other issuers."""
        return [(n.bond_id, n.score) for n in self.rank(query, catalog, k).ranked]

    def describe(self) -> dict:
        out = {"label": self.name, "kind": self.kind.value}
        if self.kind in (VariantKind.XEmbedding, VariantKind.OneHot, VariantKind.TwoStep1, VariantKind.TwoStep2):
            out["weights"] = {f.value: w for f, w in zip(FEATURES, self.weights.normalized.tolist())}
        if self.kind in (VariantKind.TwoStep1, VariantKind.TwoStep2):
            out["shortlist_size"] = self.shortlist_size
        if self.kind is VariantKind.Generic:
            out["rules"] = [r if isinstance(r, str) else list(r) for r in self.rules]
        if self.kind in (VariantKind.Numerical, VariantKind.TwoStep1, VariantKind.TwoStep2):
            out["profile"] = list(self.profile.fields)
        return out


# -- protocol -----------------------------------------------------------------------

@dataclass(frozen=True)
class Protocol:
    """Shared evaluation settings.

    ``drop_counts`` fixes absolute drop counts; otherwise each issuer's drop
    counts come from ``drop_fractions`` of its size, rounded half up and
    capped so at least one bond is retained. ``fit_rcond`` is the curve fit's
    collinearity guard; the strict default keeps refits on augmented points
    from extrapolating wildly to the held-out maturities.
    """

    min_bonds: int = 8
    drop_fractions: tuple[float, ...] = (0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85)
    drop_counts: tuple[int, ...] | None = None
    k: int = 5
    n_bins: int = 10
    sparsity_mode: str = "complement"
    rmse_mode: str = "holdout"
    fit_rcond: float = RCOND_STABLE
    filters: FilterConfig = DEFAULT_FILTERS

    def __post_init__(self):
        if int(self.min_bonds) != self.min_bonds or self.min_bonds < 2:
            raise InvalidConfig("min_bonds must be an integer >= 2")
        if int(self.k) != self.k or self.k < 1:
            raise InvalidConfig("k must be a positive integer")
        if int(self.n_bins) != self.n_bins or self.n_bins < 1:
            raise InvalidConfig("n_bins must be a positive integer")
        if self.sparsity_mode not in SPARSITY_MODES:
            raise InvalidConfig(f"sparsity_mode must be one of {SPARSITY_MODES}")
        if self.rmse_mode not in RMSE_MODES:
            raise InvalidConfig(f"rmse_mode must be one of {RMSE_MODES}")
        if not isinstance(self.fit_rcond, (int, float)) or not 0 <= self.fit_rcond < 1:
            raise InvalidConfig("fit_rcond must be a number in [0, 1)")
        if self.drop_counts is not None:
            object.__setattr__(self, "drop_counts", tuple(int(c) for c in self.drop_counts))
            if not self.drop_counts or any(c < 0 for c in self.drop_counts):
                raise InvalidConfig("drop_counts must be a nonempty list of nonnegative integers")
        else:
            object.__setattr__(self, "drop_fractions", tuple(float(f) for f in self.drop_fractions))
            if not self.drop_fractions or any(not 0 <= f < 1 for f in self.drop_fractions):
                raise InvalidConfig("drop_fractions must lie in [0, 1)")

    def drops_for(self, n_bonds: int) -> list[int]:
        if self.drop_counts is not None:
            return sorted(set(self.drop_counts))
        counts = {min(int(math.floor(f * n_bonds + 0.5)), n_bonds - 1) for f in self.drop_fractions}
        return sorted(counts)

    def as_dict(self) -> dict:
        f = self.filters
        return {
            "min_bonds": self.min_bonds,
            "drop_fractions": None if self.drop_counts is not None else list(self.drop_fractions),
            "drop_counts": None if self.drop_counts is None else list(self.drop_counts),
            "k": self.k,
            "n_bins": self.n_bins,
            "sparsity_mode": self.sparsity_mode,
            "rmse_mode": self.rmse_mode,
            "fit_rcond": self.fit_rcond,
            "filters": {
                "enforce_currency": f.enforce_currency,
                "maturity_lower_years": f.maturity_lower_years,
                "maturity_upper_years": f.maturity_upper_years,
                "maturity_mode": f.maturity_mode,
                "rating_tolerance_notches": f.rating_tolerance_notches,
            },
        }


def trial_seed(seed: int, issuer_id: str, n_drop: int) -> int:
    """Stable 63-bit seed for one issuer-trial, independent of the variant."""
    digest = hashlib.blake2b(f"{int(seed)}|{issuer_id}|{int(n_drop)}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") >> 1


# -- trials -------------------------------------------------------------------------

class TrialStatus(str, enum.Enum):
    ok = "ok"
    no_holdout = "no_holdout"
    no_candidates = "no_candidates"
    fit_failed = "fit_failed"
    drop_too_large = "drop_too_large"
    search_failed = "search_failed"


@dataclass(frozen=True)
class IssuerTrial:
    issuer_id: str
    n_drop: int
    seed: int
    status: TrialStatus
    n_queries: int = 0
    n_similars: int = 0
    sparsity: float | None = None
    rmse_bps: float | None = None
    mape_pct: float | None = None
    neighbor_ids: tuple[str, ...] = ()
    dropped_ids: tuple[str, ...] = ()
    fitted: CurveFit | None = None
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status is TrialStatus.ok

    @property
    def key(self) -> str:
        return f"{self.issuer_id}:{self.n_drop}"

    def as_dict(self) -> dict:
        return {
            "issuer_id": self.issuer_id,
            "n_drop": self.n_drop,
            "seed": self.seed,
            "status": self.status.value,
            "n_queries": self.n_queries,
            "n_similars": self.n_similars,
            "sparsity": self.sparsity,
            "rmse_bps": self.rmse_bps,
            "mape_pct": self.mape_pct,
            "neighbor_ids": list(self.neighbor_ids),
            "dropped_ids": list(self.dropped_ids),
            "fitted": None if self.fitted is None else self.fitted.as_dict(),
            "detail": self.detail,
        }


def _filtered_top(
    query: Bond, sparse: Catalog, variant: ModelVariant, filter_config: FilterConfig, k: int
) -> list[tuple[Bond, float]]:
    """First ``k`` entries of the query's full ranking that pass the filters.

    The ranking is requested in growing prefixes, which gives the same
    result as filtering the whole list without materialising it.
    """
    pool = len(sparse)
    want = 4 * k
    while True:
        ranked = [(sparse.get(bid), s) for bid, s in variant.search(query, sparse, min(want, pool))]
        kept = apply_filters(query, ranked, filter_config, sparse.rating_scale)
        if len(kept) >= k or len(ranked) < min(want, pool) or want >= pool:
            return kept[:k]
        want *= 4


def augment_peers(
    sparse: Catalog,
    queries: Sequence[Bond],
    variant: ModelVariant,
    filter_config: FilterConfig,
    k: int,
) -> list[Bond]:
    """Issuer-level peer set: the best ``k`` of the merged per-query filtered lists.

    Per-query hits are merged by bond id keeping the highest score, then
    ranked by that score (ties on bond id) and cut to ``k``.
    """
    best: dict[str, float] = {}
    for q in queries:
        for bond, s in _filtered_top(q, sparse, variant, filter_config, k):
            if s > best.get(bond.bond_id, -math.inf):
                best[bond.bond_id] = s
    ids = sorted(best, key=lambda b: (-best[b], b))[:k]
    return [sparse.get(b) for b in ids]


def run_trial(
    catalog: Catalog,
    issuer_id: str,
    n_drop: int,
    variant: ModelVariant,
    filter_config: FilterConfig = DEFAULT_FILTERS,
    k: int = 5,
    seed: int = 0,
    *,
    sparsity_mode: str = "complement",
    rmse_mode: str = "holdout",
    fit_rcond: float = RCOND_STABLE,
) -> IssuerTrial:
    """Sparsify one issuer, augment it with ``variant`` and score the refit curve.

    ``seed`` is the trial's own seed (see :func:`trial_seed`). Search, filter
    and fit failures come back as a trial with a failure status.
    ``DropTooLarge`` is raised.
    """
    if k < 1:
        raise InvalidConfig("k must be positive")
    outcome = sparsify_issuer(catalog, issuer_id, n_drop, seed)
    sparse = outcome.sparse_catalog
    queries = [sparse.get(b) for b in outcome.retained]
    base = dict(issuer_id=issuer_id, n_drop=int(n_drop), seed=int(seed), dropped_ids=outcome.dropped)
    try:
        peers = augment_peers(sparse, queries, variant, filter_config, k)
    except (EvaluationError, CurveError):
        raise
    except BondSimError as exc:
        return IssuerTrial(status=TrialStatus.search_failed, detail=f"{type(exc).__name__}: {exc}", **base)
    n_q, n_s = len(queries), len(peers)
    base.update(n_queries=n_q, n_similars=n_s, neighbor_ids=tuple(p.bond_id for p in peers))
    if not peers:
        # nothing in the sparse catalog passes the filters for any query
        exc = NoCandidatesAfterFilters(f"no peers left for issuer {issuer_id!r} after filtering")
        return IssuerTrial(status=TrialStatus.no_candidates, detail=str(exc), **base)
    base["sparsity"] = sparsity_metric(n_q, n_s, sparsity_mode)

    fit_set = queries + peers
    try:
        fit = fit_ns([(b.maturity_years, b.spread_bps) for b in fit_set], rcond=fit_rcond)
    except (CurveError, ValueError) as exc:
        return IssuerTrial(status=TrialStatus.fit_failed, detail=f"{type(exc).__name__}: {exc}", **base)
    base["fitted"] = fit
    if not outcome.dropped:
        return IssuerTrial(status=TrialStatus.no_holdout, detail="nothing held out", **base)

    if rmse_mode == "holdout":
        held = [catalog.get(b) for b in outcome.dropped]
        tau = np.array([b.maturity_years for b in held])
        actual = np.array([b.spread_bps for b in held])
    else:
        try:
            own = catalog.issuer_bonds(issuer_id)
            truth = fit_ns([(b.maturity_years, b.spread_bps) for b in own], rcond=fit_rcond)
        except (CurveError, ValueError) as exc:
            return IssuerTrial(status=TrialStatus.fit_failed, detail=f"reference fit: {exc}", **base)
        tau = tenor_grid()
        actual = np.atleast_1d(ns_spread(truth.params, tau))
    pred = np.atleast_1d(fit.predict(tau))
    err = rmse(pred, actual)
    try:
        pct = mape(pred, actual)
    except AllExcluded:
        pct = None
    return IssuerTrial(status=TrialStatus.ok, rmse_bps=err, mape_pct=pct, **base)


# -- aggregation --------------------------------------------------------------------

@dataclass(frozen=True)
class BoxStats:
    n: int
    median: float | None = None
    mean: float | None = None
    q1: float | None = None
    q3: float | None = None
    whisker_lo: float | None = None
    whisker_hi: float | None = None
    outliers: tuple[str, ...] = ()

    @property
    def iqr(self) -> float | None:
        return None if self.n == 0 else self.q3 - self.q1

    @classmethod
    def of(cls, values: Sequence[float], labels: Sequence[str] = ()) -> "BoxStats":
        v = np.asarray(values, dtype=np.float64)
        if v.size == 0:
            return cls(0)
        q1, med, q3 = np.percentile(v, [25.0, 50.0, 75.0])
        iqr = q3 - q1
        lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        inside = v[(v >= lo_fence) & (v <= hi_fence)]
        out = tuple(l for l, x in zip(labels, v) if x < lo_fence or x > hi_fence)
        return cls(
            n=int(v.size),
            median=float(med),
            mean=float(v.mean()),
            q1=float(q1),
            q3=float(q3),
            whisker_lo=float(inside.min()),
            whisker_hi=float(inside.max()),
            outliers=out,
        )

    def as_dict(self) -> dict:
        return {
            "n": self.n, "median": self.median, "mean": self.mean, "q1": self.q1, "q3": self.q3,
            "whisker_lo": self.whisker_lo, "whisker_hi": self.whisker_hi, "outliers": list(self.outliers),
        }


@dataclass(frozen=True)
class SparsityBin:
    index: int
    lo: float
    hi: float
    rmse: BoxStats
    mape: BoxStats

    @property
    def n(self) -> int:
        return self.rmse.n


def bin_index(trial: IssuerTrial, n_bins: int, mode: str) -> int:
    """Bin of a trial's sparsity with exact integer arithmetic.

    Bins are ``(i/n, (i+1)/n]``, except that the first also takes 0.
    """
    num = trial.n_similars if mode == "complement" else trial.n_queries
    den = trial.n_queries + trial.n_similars
    return max(-(-num * n_bins // den) - 1, 0)


@dataclass(frozen=True)
class EvaluationReport:
    variant: ModelVariant
    protocol: Protocol
    seed: int
    trials: tuple[IssuerTrial, ...]
    bins: tuple[SparsityBin, ...]
    summary: dict

    @property
    def ok_trials(self) -> list[IssuerTrial]:
        return [t for t in self.trials if t.ok]

    def bin_for(self, lo: float) -> SparsityBin:
        for b in self.bins:
            if math.isclose(b.lo, lo):
                return b
        raise KeyError(lo)

    def to_json(self) -> dict:
        return {
            "variant": self.variant.describe(),
            "protocol": self.protocol.as_dict(),
            "seed": self.seed,
            "summary": self.summary,
            "bins": [
                {"bin_lo": b.lo, "bin_hi": b.hi, "rmse": b.rmse.as_dict(), "mape": b.mape.as_dict()}
                for b in self.bins
            ],
            "trials": [t.as_dict() for t in self.trials],
        }

    def write(self, directory: str | Path) -> None:
        """``report.json``, ``trials.csv`` and ``bins.csv`` under ``directory``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "report.json").write_text(json.dumps(self.to_json(), indent=1, allow_nan=False) + "\n", encoding="utf-8")
        with (d / "trials.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["issuer", "sparsity", "rmse_bps", "mape_pct", "n_queries", "n_similars", "status", "n_drop"])
            for t in self.trials:
                w.writerow([t.issuer_id, _num(t.sparsity), _num(t.rmse_bps), _num(t.mape_pct),
                            t.n_queries, t.n_similars, t.status.value, t.n_drop])
        with (d / "bins.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_lo", "bin_hi", "median", "q1", "q3", "whisker_lo", "whisker_hi", "n", "mean", "n_outliers"])
            for b in self.bins:
                s = b.rmse
                w.writerow([_num(b.lo), _num(b.hi), _num(s.median), _num(s.q1), _num(s.q3),
                            _num(s.whisker_lo), _num(s.whisker_hi), s.n, _num(s.mean), len(s.outliers)])


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def summarize(trials: Sequence[IssuerTrial]) -> dict:
    ok = [t for t in trials if t.ok]
    r = [t.rmse_bps for t in ok]
    m = [t.mape_pct for t in ok if t.mape_pct is not None]
    counts: dict[str, int] = {}
    for t in trials:
        counts[t.status.value] = counts.get(t.status.value, 0) + 1
    return {
        "n_trials": len(trials),
        "n_ok": len(ok),
        "status_counts": dict(sorted(counts.items())),
        "median_rmse_bps": float(np.median(r)) if r else None,
        "mean_rmse_bps": float(np.mean(r)) if r else None,
        "median_mape_pct": float(np.median(m)) if m else None,
        "mean_mape_pct": float(np.mean(m)) if m else None,
    }


def make_bins(trials: Sequence[IssuerTrial], n_bins: int, mode: str) -> tuple[SparsityBin, ...]:
    members: list[list[IssuerTrial]] = [[] for _ in range(n_bins)]
    for t in trials:
        if t.ok:
            members[bin_index(t, n_bins, mode)].append(t)
    out = []
    for i, ms in enumerate(members):
        labels = [t.key for t in ms]
        mp = [(t.mape_pct, t.key) for t in ms if t.mape_pct is not None]
        out.append(
            SparsityBin(
                index=i,
                lo=i / n_bins,
                hi=(i + 1) / n_bins,
                rmse=BoxStats.of([t.rmse_bps for t in ms], labels),
                mape=BoxStats.of([v for v, _ in mp], [l for _, l in mp]),
            )
        )
    return tuple(out)


def _plan(catalog: Catalog, protocol: Protocol, seed: int) -> list[tuple[str, int, int]]:
    eligible = [i for i in catalog.issuers if catalog.issuer_size(i) >= protocol.min_bonds]
    if not eligible:
        raise NoEligibleIssuers(f"no issuer has at least {protocol.min_bonds} bonds")
    return [
        (issuer, n_drop, trial_seed(seed, issuer, n_drop))
        for issuer in eligible
        for n_drop in protocol.drops_for(catalog.issuer_size(issuer))
    ]


def _run_planned(catalog, variant, protocol, job) -> IssuerTrial:
    issuer, n_drop, tseed = job
    try:
        return run_trial(
            catalog, issuer, n_drop, variant, protocol.filters, protocol.k, tseed,
            sparsity_mode=protocol.sparsity_mode, rmse_mode=protocol.rmse_mode,
            fit_rcond=protocol.fit_rcond,
        )
    except DropTooLarge as exc:
        return IssuerTrial(issuer, n_drop, tseed, TrialStatus.drop_too_large, detail=str(exc))


def run_evaluation(
    catalog: Catalog,
    variant: ModelVariant,
    protocol: Protocol = Protocol(),
    seed: int = 0,
    *,
    workers: int = 1,
) -> EvaluationReport:
    """Every eligible issuer times every drop count, binned by sparsity.

    Trials may run on a thread pool; results are reassembled in plan order
    so the report does not depend on ``workers``.
    """
    jobs = _plan(catalog, protocol, seed)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(lambda j: _run_planned(catalog, variant, protocol, j), jobs))
    else:
        trials = [_run_planned(catalog, variant, protocol, j) for j in jobs]
    return EvaluationReport(
        variant=variant,
        protocol=protocol,
        seed=int(seed),
        trials=tuple(trials),
        bins=make_bins(trials, protocol.n_bins, protocol.sparsity_mode),
        summary=summarize(trials),
    )


# -- benchmark ----------------------------------------------------------------------

COMPARISON_COLUMNS = (
    "variant", "median_rmse_bps", "mean_rmse_bps", "median_mape_pct", "mean_mape_pct", "n_ok", "n_trials",
)


@dataclass(frozen=True)
class BenchmarkResult:
    reports: tuple[EvaluationReport, ...]

    def comparison(self) -> list[dict]:
        rows = []
        for r in self.reports:
            s = r.summary
            rows.append({c: (r.variant.name if c == "variant" else s[c]) for c in COMPARISON_COLUMNS})
        return rows

    def write(self, directory: str | Path) -> list[Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        written = []
        for i, r in enumerate(self.reports):
            sub = d / f"{i:02d}_{_slug(r.variant.name)}"
            r.write(sub)
            written.append(sub)
        rows = self.comparison()
        with (d / "comparison.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COMPARISON_COLUMNS)
            for row in rows:
                w.writerow([row[c] if c in ("variant", "n_ok", "n_trials") else _num(row[c]) for c in COMPARISON_COLUMNS])
        (d / "comparison.json").write_text(json.dumps(rows, indent=1) + "\n", encoding="utf-8")
        return written


def _slug(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in name)


def benchmark(
    catalog: Catalog,
    variants: Sequence[ModelVariant],
    protocol: Protocol = Protocol(),
    seed: int = 0,
    *,
    workers: int = 1,
) -> BenchmarkResult:
    """Evaluate several variants under one protocol and one seed.

    Drop sets depend only on (seed, issuer, drop count), so every variant
    sees the same sparsified issuers.
    """
    if len(variants) < 2:
        raise InvalidConfig("a benchmark needs at least two variants")
    return BenchmarkResult(tuple(run_evaluation(catalog, v, protocol, seed, workers=workers) for v in variants))


def with_filters(protocol: Protocol, filters: FilterConfig) -> Protocol:
    return replace(protocol, filters=filters)
