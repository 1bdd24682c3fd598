"""Peer-bond retrieval: embedding similarity, one-hot, rule-based, numerical and two-step search."""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import kernels
from .catalog import FEATURES, Bond, Catalog, FeatureName, normalize_category
from .embedding import VectorStore, cosine_similarity
from .errors import (
    EmptyCandidateSet,
    InvalidRules,
    InvalidShortlist,
    InvalidWeights,
    MissingEmbedding,
    MissingFeatureScore,
)


class FeatureWeights:
    """Nonnegative per-feature weights, normalised to sum to one."""

    __slots__ = ("raw", "_norm")

    def __init__(self, weights: Mapping[FeatureName | str, float] | None = None):
        if weights is None:
            raw = {f: 1.0 for f in FEATURES}
        else:
            raw = {f: 0.0 for f in FEATURES}
            for k, v in weights.items():
                f = k if isinstance(k, FeatureName) else FeatureName.parse(k)
                v = float(v)
                if not math.isfinite(v) or v < 0:
                    raise InvalidWeights(f"weight for {f.value} must be a nonnegative number, got {v!r}")
                raw[f] = v
        total = sum(raw.values())
        if not total > 0:
            raise InvalidWeights("at least one feature weight must be positive")
        self.raw = raw
        self._norm = np.array([raw[f] / total for f in FEATURES])
        self._norm.setflags(write=False)

    @classmethod
    def uniform(cls) -> "FeatureWeights":
        return cls()

    @classmethod
    def only(cls, feature: FeatureName) -> "FeatureWeights":
        return cls({feature: 1.0})

    @property
    def normalized(self) -> np.ndarray:
        return self._norm

    def __getitem__(self, feature: FeatureName) -> float:
        return float(self._norm[FEATURES.index(feature)])

    def active(self) -> tuple[FeatureName, ...]:
        return tuple(f for f, w in zip(FEATURES, self._norm) if w > 0)

    def __eq__(self, other):
        return isinstance(other, FeatureWeights) and np.array_equal(self._norm, other._norm)

    def __hash__(self):
        return hash(tuple(self._norm))

    def __repr__(self):
        return "FeatureWeights(" + ", ".join(f"{f.value}={w:.3g}" for f, w in zip(FEATURES, self._norm)) + ")"


UNIFORM = FeatureWeights()


@dataclass(frozen=True)
class Neighbor:
    bond_id: str
    score: float
    per_feature: Mapping[FeatureName, float] = field(default_factory=dict)


@dataclass(frozen=True)
class SimilarityResult:
    query_id: str
    ranked: tuple[Neighbor, ...]

    @property
    def ids(self) -> list[str]:
        return [n.bond_id for n in self.ranked]

    @property
    def scores(self) -> list[float]:
        return [n.score for n in self.ranked]

    def __len__(self):
        return len(self.ranked)

    def head(self, k: int) -> "SimilarityResult":
        return SimilarityResult(self.query_id, self.ranked[:k])

    def to_json(self) -> dict:
        return {
            "query_id": self.query_id,
            "neighbors": [
                {
                    "bond_id": n.bond_id,
                    "score": n.score,
                    "per_feature": {f.value: s for f, s in n.per_feature.items()},
                }
                for n in self.ranked
            ],
        }

    def write(self, json_path: str | Path | None = None, csv_path: str | Path | None = None) -> None:
        if json_path is not None:
            Path(json_path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")
        if csv_path is not None:
            with Path(csv_path).open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["query_id", "rank", "bond_id", "score"])
                for r, n in enumerate(self.ranked, start=1):
                    w.writerow([self.query_id, r, n.bond_id, repr(n.score)])


# -- per-pair scoring ---------------------------------------------------------

def feature_similarity(query: Bond, candidate: Bond, feature: FeatureName, store: VectorStore) -> float:
    """Cosine similarity of the two bonds' categories for one feature."""
    a = query.features[feature]
    b = candidate.features[feature]
    va = store.get(feature, a)
    vb = store.get(feature, b)
    if a == b:
        return 1.0
    return cosine_similarity(va, vb)


def aggregate_similarity(per_feature: Mapping[FeatureName, float], weights: FeatureWeights = UNIFORM) -> float:
    """Weighted mean over features, clamped to the range of its inputs."""
    acc = 0.0
    lo, hi = math.inf, -math.inf
    for f, w in zip(FEATURES, weights.normalized):
        if w == 0.0:
            continue
        if f not in per_feature:
            raise MissingFeatureScore(f"no score for weighted feature {f.value}")
        s = float(per_feature[f])
        acc = acc + float(w) * s
        lo = min(lo, s)
        hi = max(hi, s)
    return min(max(acc, lo), hi)


def one_hot_similarity(query: Bond, candidate: Bond, weights: FeatureWeights = UNIFORM) -> float:
    """Weighted share of features whose categories match exactly."""
    per = {f: 1.0 if query.features[f] == candidate.features[f] else 0.0 for f in FEATURES}
    return aggregate_similarity(per, weights)


# -- vectorised ranking over catalog rows ---------------------------------------

def _candidate_rows(query: Bond, catalog: Catalog, exclude_issuer: bool = False) -> np.ndarray:
    keep = np.ones(len(catalog), dtype=bool)
    if query.bond_id in catalog:
        keep[catalog.position(query.bond_id)] = False
    if exclude_issuer:
        for bid in catalog.issuer_index.get(query.issuer_id, ()):
            keep[catalog.position(bid)] = False
    return np.flatnonzero(keep).astype(np.int64)


def _embedding_rows(query: Bond, catalog: Catalog, store: VectorStore) -> np.ndarray:
    """(F, V) similarities of the query's categories to every vocabulary category."""
    vocab = catalog.vocabulary
    tables = store.vocabulary_tables(vocab)
    width = tables.shape[1]
    rows = np.full((len(FEATURES), width), np.nan)
    for j, f in enumerate(FEATURES):
        cat = query.features[f]
        code = vocab.index[j].get(cat)
        if code is not None:
            rows[j] = tables[j, code]
            continue
        # query category outside the catalog vocabulary
        try:
            qv = store.get(f, cat)
        except MissingEmbedding:
            continue
        for v, other in enumerate(vocab.categories[j]):
            if (f, other) in store:
                rows[j, v] = cosine_similarity(qv, store.get(f, other))
    return rows


def _one_hot_rows(query: Bond, catalog: Catalog) -> np.ndarray:
    vocab = catalog.vocabulary
    width = max((len(c) for c in vocab.categories), default=0)
    rows = np.zeros((len(FEATURES), width))
    for j, f in enumerate(FEATURES):
        code = vocab.index[j].get(query.features[f])
        if code is not None:
            rows[j, code] = 1.0
    return rows


def _raise_missing(query: Bond, catalog: Catalog, qrows, rows, weights: FeatureWeights, store: VectorStore):
    codes = catalog.codes
    for j, f in enumerate(FEATURES):
        if weights.normalized[j] == 0:
            continue
        cat = query.features[f]
        if (f, cat) not in store:
            raise MissingEmbedding(f, cat)
        vals = qrows[j, codes[rows, j]]
        bad = np.flatnonzero(np.isnan(vals))
        if bad.size:
            raise MissingEmbedding(f, catalog.bonds[rows[bad[0]]].features[f])
    raise MissingEmbedding(None, "?")


def _categorical_rank(query, catalog, rows, weights, store, one_hot=False, backend=None):
    """(ordered rows, scores aligned with them, qrows)."""
    be = backend or kernels.active()
    qrows = _one_hot_rows(query, catalog) if one_hot else _embedding_rows(query, catalog, store)
    codes = np.ascontiguousarray(catalog.codes[rows])
    scores = be.score_candidates(qrows, codes, np.asarray(weights.normalized))
    if np.isnan(scores).any():
        _raise_missing(query, catalog, qrows, rows, weights, store)
    order = np.lexsort((rows, -scores))
    return rows[order], scores[order], qrows


def _neighbors(catalog, ordered, scores, qrows, weights, k) -> tuple[Neighbor, ...]:
    out = []
    active = [(j, f) for j, f in enumerate(FEATURES) if weights.normalized[j] > 0]
    for r, s in zip(ordered[:k], scores[:k]):
        code = catalog.codes[r]
        per = {f: float(qrows[j, code[j]]) for j, f in active}
        out.append(Neighbor(catalog.bonds[r].bond_id, float(s), per))
    return tuple(out)


def top_k(
    query: Bond,
    catalog: Catalog,
    k: int,
    weights: FeatureWeights = UNIFORM,
    store: VectorStore | None = None,
    *,
    exclude_issuer: bool = False,
    backend: kernels.Backend | None = None,
) -> SimilarityResult:
    """The ``k`` most similar bonds by aggregated per-feature embedding cosine.

    Every bond except the query itself is a candidate; ties break on
    ascending ``bond_id``.
    """
    if k < 1:
        raise ValueError("k must be positive")
    if store is None:
        raise ValueError("embedding search needs a vector store")
    rows = _candidate_rows(query, catalog, exclude_issuer)
    if rows.size == 0:
        raise EmptyCandidateSet(f"no candidates for {query.bond_id}")
    ordered, scores, qrows = _categorical_rank(query, catalog, rows, weights, store, backend=backend)
    return SimilarityResult(query.bond_id, _neighbors(catalog, ordered, scores, qrows, weights, k))


def one_hot_top_k(
    query: Bond,
    catalog: Catalog,
    k: int,
    weights: FeatureWeights = UNIFORM,
    *,
    exclude_issuer: bool = False,
    backend: kernels.Backend | None = None,
) -> SimilarityResult:
    """``top_k`` with exact-match indicators in place of embedding cosines."""
    if k < 1:
        raise ValueError("k must be positive")
    rows = _candidate_rows(query, catalog, exclude_issuer)
    if rows.size == 0:
        raise EmptyCandidateSet(f"no candidates for {query.bond_id}")
    ordered, scores, qrows = _categorical_rank(query, catalog, rows, weights, None, one_hot=True, backend=backend)
    return SimilarityResult(query.bond_id, _neighbors(catalog, ordered, scores, qrows, weights, k))


def exhaustive_oracle(
    query: Bond,
    catalog: Catalog,
    weights: FeatureWeights = UNIFORM,
    store: VectorStore | None = None,
    k: int | None = None,
    *,
    exclude_issuer: bool = False,
) -> SimilarityResult:
    """Reference ranking: score every candidate pair by pair, then sort."""
    scored = []
    for b in catalog:
        if b.bond_id == query.bond_id or (exclude_issuer and b.issuer_id == query.issuer_id):
            continue
        per = {f: feature_similarity(query, b, f, store) for f in weights.active()}
        scored.append((aggregate_similarity(per, weights), b.bond_id, per))
    if not scored:
        raise EmptyCandidateSet(f"no candidates for {query.bond_id}")
    scored.sort(key=lambda t: (-t[0], t[1]))
    if k is not None:
        scored = scored[:k]
    return SimilarityResult(query.bond_id, tuple(Neighbor(i, s, p) for s, i, p in scored))


# -- rule-based search ----------------------------------------------------------

RULE_ATTRIBUTES = ("currency", "rating")


def _attr(bond: Bond, name) -> str:
    if isinstance(name, FeatureName):
        return bond.features[name]
    if name in RULE_ATTRIBUTES:
        return getattr(bond, name)
    return bond.features[FeatureName.parse(name)]


def _normalize_rule(rule):
    if isinstance(rule, tuple):
        attr, value = rule
    else:
        attr, value = rule, None
    if not isinstance(attr, FeatureName) and attr not in RULE_ATTRIBUTES:
        try:
            attr = FeatureName.parse(attr)
        except ValueError:
            raise InvalidRules(f"unknown rule attribute {attr!r}") from None
    if value is not None and isinstance(attr, FeatureName):
        value = normalize_category(value)
    return attr, value


def generic_search(query: Bond, catalog: Catalog, rules: Sequence) -> list[str]:
    """Bonds (other than the query) passing every exact-match rule, in ``bond_id`` order.

    A rule is an attribute name (a feature, ``"currency"`` or ``"rating"``)
    that must equal the query's value, or an ``(attribute, value)`` pair.
    """
    if not rules:
        raise InvalidRules("rule list is empty")
    preds = []
    for rule in rules:
        attr, value = _normalize_rule(rule)
        target = _attr(query, attr) if value is None else value
        preds.append((attr, target))
    return [
        b.bond_id
        for b in catalog
        if b.bond_id != query.bond_id and all(_attr(b, a) == t for a, t in preds)
    ]


# -- numerical search -------------------------------------------------------------

@dataclass(frozen=True)
class NumericalProfile:
    """Numerical fields compared by the numerical baseline.

    Built-in fields are ``maturity_years`` and ``rating`` (ordinal notch);
    ``extractors`` may add named callables ``Bond -> float``.
    """

    fields: tuple[str, ...] = ("maturity_years", "rating")
    extractors: Mapping[str, Callable[[Bond], float]] = field(default_factory=dict)

    def matrix(self, bonds: Sequence[Bond], catalog: Catalog) -> np.ndarray:
        cols = []
        for name in self.fields:
            if name in self.extractors:
                fn = self.extractors[name]
            elif name == "maturity_years":
                fn = lambda b: b.maturity_years  # noqa: E731
            elif name == "rating":
                fn = lambda b: float(catalog.rating_scale.rank(b.rating))  # noqa: E731
            else:
                raise ValueError(f"unknown numerical field {name!r}")
            cols.append([float(fn(b)) for b in bonds])
        return np.array(cols, dtype=np.float64).T.reshape(len(bonds), len(self.fields))


DEFAULT_PROFILE = NumericalProfile()


def _numerical_rank(query, catalog, rows, profile):
    bonds = [catalog.bonds[r] for r in rows]
    X = profile.matrix(bonds, catalog)
    q = profile.matrix([query], catalog)[0]
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    live = sd > 0
    # zero-variance columns contribute nothing
    Z = np.zeros_like(X)
    zq = np.zeros_like(q)
    Z[:, live] = (X[:, live] - mu[live]) / sd[live]
    zq[live] = (q[live] - mu[live]) / sd[live]
    dist = np.sqrt(((Z - zq) ** 2).sum(axis=1))
    scores = 1.0 / (1.0 + dist)
    order = np.lexsort((rows, -scores))
    return rows[order], scores[order]


def numerical_search(
    query: Bond,
    catalog: Catalog,
    k: int,
    profile: NumericalProfile = DEFAULT_PROFILE,
    *,
    exclude_issuer: bool = False,
) -> SimilarityResult:
    """Rank by ``1 / (1 + euclidean distance)`` over z-scored numerical profiles."""
    if k < 1:
        raise ValueError("k must be positive")
    rows = _candidate_rows(query, catalog, exclude_issuer)
    if rows.size == 0:
        raise EmptyCandidateSet(f"no candidates for {query.bond_id}")
    ordered, scores = _numerical_rank(query, catalog, rows, profile)
    return SimilarityResult(
        query.bond_id,
        tuple(Neighbor(catalog.bonds[r].bond_id, float(s)) for r, s in zip(ordered[:k], scores[:k])),
    )


# -- two-step search ----------------------------------------------------------------

class TwoStepOrder(str, enum.Enum):
    categorical_then_numerical = "categorical_then_numerical"
    numerical_then_categorical = "numerical_then_categorical"


def two_step_search(
    query: Bond,
    catalog: Catalog,
    k: int,
    order: TwoStepOrder | str,
    shortlist_size: int | None = None,
    weights: FeatureWeights = UNIFORM,
    store: VectorStore | None = None,
    profile: NumericalProfile = DEFAULT_PROFILE,
    *,
    exclude_issuer: bool = False,
    backend: kernels.Backend | None = None,
) -> SimilarityResult:
    """Shortlist ``shortlist_size`` bonds by one modality, re-rank them by the other.

    ``shortlist_size`` defaults to ``5 * k``. Reported scores come from the
    second stage.
    """
    order = TwoStepOrder(order)
    m = 5 * k if shortlist_size is None else int(shortlist_size)
    if k < 1:
        raise ValueError("k must be positive")
    if m < k:
        raise InvalidShortlist(f"shortlist size {m} is smaller than k={k}")
    if store is None:
        raise ValueError("two-step search needs a vector store")
    rows = _candidate_rows(query, catalog, exclude_issuer)
    if rows.size == 0:
        raise EmptyCandidateSet(f"no candidates for {query.bond_id}")
    if order is TwoStepOrder.categorical_then_numerical:
        first, _, _ = _categorical_rank(query, catalog, rows, weights, store, backend=backend)
        short = np.sort(first[:m])
        ordered, scores = _numerical_rank(query, catalog, short, profile)
        ranked = tuple(
            Neighbor(catalog.bonds[r].bond_id, float(s)) for r, s in zip(ordered[:k], scores[:k])
        )
    else:
        first, _ = _numerical_rank(query, catalog, rows, profile)
        short = np.sort(first[:m])
        ordered, scores, qrows = _categorical_rank(query, catalog, short, weights, store, backend=backend)
        ranked = _neighbors(catalog, ordered, scores, qrows, weights, k)
    return SimilarityResult(query.bond_id, ranked)
