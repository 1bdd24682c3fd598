"""Dense category vectors: storage, cosine similarity, synthetic generation and 2-D projection."""

from __future__ import annotations

import csv
import math
import weakref
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .catalog import FEATURES, FeatureName, normalize_category
from .errors import (
    DimensionMismatch,
    DuplicateKey,
    InvalidHierarchy,
    MissingEmbedding,
    MissingReference,
    ParseError,
    TooFewCategories,
    ZeroNorm,
)

DEFAULT_DIMENSION = 768


def _as_vector(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D vector, got shape {a.shape}")
    return a


def cosine_similarity(a, b) -> float:
    """<a, b> / (|a| |b|), clamped to [-1, 1]."""
    a = _as_vector(a)
    b = _as_vector(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimensions differ: {a.shape[0]} vs {b.shape[0]}")
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        raise ZeroNorm("cosine similarity is undefined for a zero vector")
    c = float(np.dot(a, b)) / (na * nb)
    return min(1.0, max(-1.0, c))


class VectorStore:
    """Immutable map (feature, category) -> vector with a single dimension.

    Category strings are trimmed and upper-cased on insert and lookup.
    """

    def __init__(self, entries: Mapping[tuple[FeatureName, str], Iterable[float]] | Iterable, dimension: int | None = None):
        items = entries.items() if isinstance(entries, Mapping) else entries
        self._vectors: dict[tuple[FeatureName, str], np.ndarray] = {}
        dim = dimension
        for (feature, category), vec in items:
            feature = FeatureName.parse(feature) if not isinstance(feature, FeatureName) else feature
            key = (feature, normalize_category(category))
            if key in self._vectors:
                raise DuplicateKey(f"duplicate embedding for {feature.value}={key[1]!r}")
            v = np.array(vec, dtype=np.float64)
            if v.ndim != 1 or v.size == 0:
                raise DimensionMismatch(f"{feature.value}={key[1]!r}: vector must be 1-D and non-empty")
            if dim is None:
                dim = v.size
            elif v.size != dim:
                raise DimensionMismatch(
                    f"{feature.value}={key[1]!r} has dimension {v.size}, expected {dim}"
                )
            if not np.all(np.isfinite(v)):
                raise ParseError(f"{feature.value}={key[1]!r}: non-finite entries")
            if not np.any(v):
                raise ZeroNorm(f"{feature.value}={key[1]!r} is a zero vector")
            v.setflags(write=False)
            self._vectors[key] = v
        self.dimension = int(dim) if dim is not None else DEFAULT_DIMENSION
        self._tables: dict[FeatureName, tuple[dict[str, int], np.ndarray]] = {}
        self._vocab_cache: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, key) -> bool:
        feature, category = key
        return (feature, normalize_category(category)) in self._vectors

    def __eq__(self, other):
        if not isinstance(other, VectorStore):
            return NotImplemented
        return self._vectors.keys() == other._vectors.keys() and all(
            np.array_equal(v, other._vectors[k]) for k, v in self._vectors.items()
        )

    __hash__ = object.__hash__

    def keys(self):
        return self._vectors.keys()

    def categories(self, feature: FeatureName) -> list[str]:
        return sorted(c for f, c in self._vectors if f == feature)

    def get(self, feature: FeatureName, category: str) -> np.ndarray:
        try:
            return self._vectors[(feature, normalize_category(category))]
        except KeyError:
            raise MissingEmbedding(feature, normalize_category(category)) from None

    def similarity_table(self, feature: FeatureName) -> tuple[dict[str, int], np.ndarray]:
        """All-pairs cosine matrix over the feature's categories (cached)."""
        hit = self._tables.get(feature)
        if hit is not None:
            return hit
        cats = self.categories(feature)
        index = {c: i for i, c in enumerate(cats)}
        if cats:
            m = np.stack([self._vectors[(feature, c)] for c in cats])
            m = m / np.linalg.norm(m, axis=1, keepdims=True)
            table = np.clip(m @ m.T, -1.0, 1.0)
            np.fill_diagonal(table, 1.0)
        else:
            table = np.zeros((0, 0))
        table.setflags(write=False)
        self._tables[feature] = (index, table)
        return index, table

    def vocabulary_tables(self, vocab) -> np.ndarray:
        """Stack of per-feature similarity tables indexed by a catalog vocabulary.

        Shape ``(6, V, V)`` with ``V`` the largest per-feature vocabulary;
        pairs involving a category missing from the store are NaN.
        """
        hit = self._vocab_cache.get(vocab)
        if hit is not None:
            return hit
        size = max((len(c) for c in vocab.categories), default=0)
        out = np.full((len(FEATURES), size, size), np.nan)
        for j, f in enumerate(FEATURES):
            index, table = self.similarity_table(f)
            pos = np.array([index.get(c, -1) for c in vocab.categories[j]], dtype=np.int64)
            ok = np.flatnonzero(pos >= 0)
            if ok.size:
                out[j][np.ix_(ok, ok)] = table[np.ix_(pos[ok], pos[ok])]
            # identical strings are similarity 1 by definition, present or not
            n = len(vocab.categories[j])
            out[j, np.arange(n), np.arange(n)] = np.where(pos >= 0, 1.0, np.nan)
        out.setflags(write=False)
        self._vocab_cache[vocab] = out
        return out


def load_vector_store(path: str | Path) -> VectorStore:
    """Read ``feature<TAB>category<TAB>v1,v2,...`` lines."""
    entries = []
    seen = set()
    dim = None
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
            try:
                feature = FeatureName.parse(parts[0])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            try:
                vec = [float(x) for x in parts[2].split(",")]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: vector is not comma-separated decimals") from None
            key = (feature, normalize_category(parts[1]))
            if key in seen:
                raise DuplicateKey(f"{path}:{lineno}: duplicate key {feature.value}={key[1]!r}")
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise DimensionMismatch(f"{path}:{lineno}: dimension {len(vec)} != {dim}")
            seen.add(key)
            entries.append((key, vec))
    return VectorStore(entries, dimension=dim)


def write_vector_store(store: VectorStore, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for f in FEATURES:
            for c in store.categories(f):
                vec = ",".join(repr(float(x)) for x in store.get(f, c))
                fh.write(f"{f.value}\t{c}\t{vec}\n")


# -- synthetic embeddings -----------------------------------------------------

def _topological(tree: Mapping[str, str | None]) -> list[str]:
    """Order categories so parents precede children; reject cycles and dangling parents."""
    order: list[str] = []
    state: dict[str, int] = {}
    for start in sorted(tree):
        path = []
        node = start
        while node is not None and state.get(node) != 2:
            if state.get(node) == 1:
                raise InvalidHierarchy(f"cycle through category {node!r}")
            state[node] = 1
            path.append(node)
            parent = tree[node]
            if parent is not None and parent not in tree:
                raise InvalidHierarchy(f"parent {parent!r} of {node!r} is not in the hierarchy")
            node = parent
        for n in reversed(path):
            state[n] = 2
            order.append(n)
    return order


def synthetic_embeddings(
    hierarchy: Mapping[FeatureName, Mapping[str, str | None]],
    dimension: int,
    seed: int,
    epsilon: float = 0.3,
    leaves_only: bool = False,
) -> VectorStore:
    """Tree-structured random vectors.

    ``hierarchy`` maps each feature to ``{category: parent or None}``. Roots
    are independent unit Gaussians; a child is
    ``normalize(parent + epsilon * g)`` with ``g ~ N(0, I/d)``, so ``epsilon``
    is the perturbation size relative to the unit parent independent of the
    dimension. With ``leaves_only`` internal nodes are used for generation but
    not stored.
    """
    if dimension < 2:
        raise InvalidHierarchy("dimension must be >= 2")
    if not hierarchy or all(not t for t in hierarchy.values()):
        raise InvalidHierarchy("hierarchy is empty")
    if epsilon < 0:
        raise InvalidHierarchy("epsilon must be nonnegative")
    entries = []
    for feature in FEATURES:
        tree = hierarchy.get(feature)
        if not tree:
            continue
        tree = {normalize_category(k): (None if v is None else normalize_category(v)) for k, v in tree.items()}
        # one stream per feature so adding a feature does not reshuffle the others
        rng = np.random.default_rng([seed, FEATURES.index(feature)])
        vectors: dict[str, np.ndarray] = {}
        for node in _topological(tree):
            parent = tree[node]
            g = rng.standard_normal(dimension)
            if parent is None:
                v = g
            else:
                v = vectors[parent] + epsilon * g / math.sqrt(dimension)
            vectors[node] = v / np.linalg.norm(v)
        parents = set(p for p in tree.values() if p is not None)
        for node in sorted(vectors):
            if leaves_only and node in parents:
                continue
            entries.append(((feature, node), vectors[node]))
    return VectorStore(entries, dimension=dimension)


# -- projection ---------------------------------------------------------------

@dataclass(frozen=True)
class ProjectedPoint:
    category: str
    x: float
    y: float
    reference_similarity: float


@dataclass(frozen=True)
class Projection2D:
    feature: FeatureName
    reference: str
    method: str
    points: tuple[ProjectedPoint, ...]

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["category", "x", "y", "reference_similarity"])
            for p in self.points:
                w.writerow([p.category, repr(p.x), repr(p.y), repr(p.reference_similarity)])


def project_2d(
    store: VectorStore, feature: FeatureName, reference: str, method: str = "pca"
) -> Projection2D:
    """2-D layout of one feature's categories, coloured by full-dimension similarity to ``reference``."""
    cats = store.categories(feature)
    if len(cats) < 2:
        raise TooFewCategories(f"{feature.value} has {len(cats)} categories; need at least 2")
    ref = normalize_category(reference)
    if (feature, ref) not in store:
        raise MissingReference(f"reference {ref!r} not found for {feature.value}")
    X = np.stack([store.get(feature, c) for c in cats])
    if method == "first_dims":
        coords = X[:, :2]
    elif method == "pca":
        centered = X - X.mean(axis=0)
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        comps = vt[:2]
        # fix SVD sign ambiguity: largest-magnitude loading positive
        for i in range(comps.shape[0]):
            j = np.argmax(np.abs(comps[i]))
            if comps[i, j] < 0:
                comps[i] = -comps[i]
        coords = centered @ comps.T
        if coords.shape[1] < 2:
            coords = np.hstack([coords, np.zeros((coords.shape[0], 2 - coords.shape[1]))])
    else:
        raise ValueError(f"unknown projection method {method!r}")
    ref_vec = store.get(feature, ref)
    pts = tuple(
        ProjectedPoint(
            c,
            float(coords[i, 0]),
            float(coords[i, 1]),
            1.0 if c == ref else cosine_similarity(X[i], ref_vec),
        )
        for i, c in enumerate(cats)
    )
    return Projection2D(feature, ref, method, pts)
