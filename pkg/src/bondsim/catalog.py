"""Bond records, the immutable catalog, file ingestion and issuer sparsification."""

from __future__ import annotations

import csv
import datetime as dt
import enum
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    CatalogError,
    DropTooLarge,
    DuplicateBondId,
    MalformedRow,
    ParseError,
    UnknownBond,
    UnknownIssuer,
    UnknownRating,
)
from .filters import DEFAULT_RATING_SCALE, RatingScale

UNKNOWN = "UNKNOWN"


class FeatureName(str, enum.Enum):
    """The six categorical bond attributes, in canonical order."""

    IssuerIndustry = "IssuerIndustry"
    MarketIssueType = "MarketIssueType"
    IndustryGroup = "IndustryGroup"
    IndustrySubgroup = "IndustrySubgroup"
    CountryOfDomicile = "CountryOfDomicile"
    IssuerIdentity = "IssuerIdentity"

    @property
    def column(self) -> str:
        return _COLUMNS[self]

    @classmethod
    def parse(cls, name: str) -> "FeatureName":
        """Accept the enum value (``IssuerIndustry``) or the file column (``issuer_industry``)."""
        key = name.strip()
        for f in cls:
            if key == f.value or key == f.column or key.lower() == f.value.lower():
                return f
        raise ValueError(f"unknown feature name {name!r}")


FEATURES: tuple[FeatureName, ...] = tuple(FeatureName)

_COLUMNS = {
    FeatureName.IssuerIndustry: "issuer_industry",
    FeatureName.MarketIssueType: "market_issue_type",
    FeatureName.IndustryGroup: "industry_group",
    FeatureName.IndustrySubgroup: "industry_subgroup",
    FeatureName.CountryOfDomicile: "country_of_domicile",
    FeatureName.IssuerIdentity: "issuer_identity",
}

CSV_COLUMNS: tuple[str, ...] = (
    "bond_id",
    "issuer_id",
    *(_COLUMNS[f] for f in FEATURES),
    "currency",
    "rating",
    "maturity_years",
    "spread_bps",
    "observation_date",
)


def normalize_category(value: object) -> str:
    """Trim and upper-case a category; blanks become the UNKNOWN sentinel."""
    if value is None:
        return UNKNOWN
    s = str(value).strip().upper()
    return s if s else UNKNOWN


@dataclass(frozen=True, eq=True)
class Bond:
    bond_id: str
    issuer_id: str
    features: Mapping[FeatureName, str]
    currency: str
    rating: str
    maturity_years: float
    spread_bps: float
    observation_date: dt.date = field(default=dt.date(2024, 12, 13))

    def __post_init__(self):
        if not self.bond_id:
            raise ValueError("bond_id must be non-empty")
        if not self.issuer_id:
            raise ValueError("issuer_id must be non-empty")
        m = float(self.maturity_years)
        if not math.isfinite(m) or m <= 0:
            raise ValueError(f"maturity_years must be > 0, got {self.maturity_years!r}")
        s = float(self.spread_bps)
        if not math.isfinite(s):
            raise ValueError(f"spread_bps must be finite, got {self.spread_bps!r}")
        feats = {}
        for f in FEATURES:
            feats[f] = normalize_category(self.features.get(f))
        extra = set(self.features) - set(FEATURES)
        if extra:
            raise ValueError(f"unexpected features {sorted(map(str, extra))}")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "maturity_years", m)
        object.__setattr__(self, "spread_bps", s)
        object.__setattr__(self, "currency", str(self.currency).strip().upper())
        object.__setattr__(self, "rating", str(self.rating).strip())

    def __hash__(self):
        return hash(self.bond_id)

    def feature(self, name: FeatureName) -> str:
        return self.features[name]

    def to_record(self) -> dict:
        rec = {"bond_id": self.bond_id, "issuer_id": self.issuer_id}
        for f in FEATURES:
            rec[f.column] = self.features[f]
        rec.update(
            currency=self.currency,
            rating=self.rating,
            maturity_years=self.maturity_years,
            spread_bps=self.spread_bps,
            observation_date=self.observation_date.isoformat(),
        )
        return rec


class _Vocabulary:
    """Per-feature category codes shared by a catalog and all of its subsets."""

    __slots__ = ("categories", "index", "__weakref__")

    def __init__(self, bonds: Sequence[Bond]):
        self.categories: tuple[tuple[str, ...], ...] = tuple(
            tuple(sorted({b.features[f] for b in bonds})) for f in FEATURES
        )
        self.index: tuple[dict[str, int], ...] = tuple(
            {c: i for i, c in enumerate(cats)} for cats in self.categories
        )


class Catalog:
    """Immutable collection of bonds keyed by ``bond_id`` and grouped by issuer.

    Bonds are held in ascending ``bond_id`` order regardless of input order.
    """

    __slots__ = (
        "_bonds",
        "_by_id",
        "_issuer_index",
        "_vocab",
        "_codes",
        "_maturity",
        "_spread",
        "_rating_scale",
        "_rows",
        "__weakref__",
    )

    def __init__(
        self,
        bonds: Iterable[Bond],
        rating_scale: RatingScale | None = None,
        *,
        _vocab: _Vocabulary | None = None,
        _codes: np.ndarray | None = None,
    ):
        items = list(bonds)
        by_id: dict[str, Bond] = {}
        for b in items:
            if b.bond_id in by_id:
                raise DuplicateBondId(b.bond_id)
            by_id[b.bond_id] = b
        ordered = sorted(items, key=lambda b: b.bond_id)
        scale = rating_scale or DEFAULT_RATING_SCALE
        for b in ordered:
            if b.rating not in scale:
                raise UnknownRating(b.rating)
        dates = {b.observation_date for b in ordered}
        if len(dates) > 1:
            raise CatalogError(
                f"catalog mixes observation dates {sorted(d.isoformat() for d in dates)}"
            )
        issuers: dict[str, list[str]] = {}
        for b in ordered:
            issuers.setdefault(b.issuer_id, []).append(b.bond_id)

        self._bonds = tuple(ordered)
        self._rows = {b.bond_id: i for i, b in enumerate(ordered)}
        self._by_id = by_id
        self._issuer_index = MappingProxyType({k: tuple(v) for k, v in sorted(issuers.items())})
        self._rating_scale = scale
        self._vocab = _vocab if _vocab is not None else _Vocabulary(ordered)
        if _codes is None:
            codes = np.empty((len(ordered), len(FEATURES)), dtype=np.int64)
            for i, b in enumerate(ordered):
                for j, f in enumerate(FEATURES):
                    codes[i, j] = self._vocab.index[j][b.features[f]]
            _codes = codes
        _codes.setflags(write=False)
        self._codes = _codes
        self._maturity = np.array([b.maturity_years for b in ordered], dtype=np.float64)
        self._spread = np.array([b.spread_bps for b in ordered], dtype=np.float64)
        self._maturity.setflags(write=False)
        self._spread.setflags(write=False)

    # -- container protocol -------------------------------------------------
    def __len__(self) -> int:
        return len(self._bonds)

    def __iter__(self):
        return iter(self._bonds)

    def __contains__(self, bond_id: object) -> bool:
        return bond_id in self._by_id

    def __repr__(self) -> str:
        return f"Catalog({len(self)} bonds, {len(self._issuer_index)} issuers)"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Catalog):
            return NotImplemented
        return self._bonds == other._bonds

    __hash__ = None

    @property
    def bonds(self) -> tuple[Bond, ...]:
        return self._bonds

    @property
    def bond_ids(self) -> tuple[str, ...]:
        return tuple(b.bond_id for b in self._bonds)

    @property
    def issuer_index(self) -> Mapping[str, tuple[str, ...]]:
        return self._issuer_index

    @property
    def issuers(self) -> tuple[str, ...]:
        return tuple(self._issuer_index)

    @property
    def rating_scale(self) -> RatingScale:
        return self._rating_scale

    @property
    def observation_date(self) -> dt.date | None:
        return self._bonds[0].observation_date if self._bonds else None

    def get(self, bond_id: str) -> Bond:
        try:
            return self._by_id[bond_id]
        except KeyError:
            raise UnknownBond(f"unknown bond {bond_id!r}") from None

    def issuer_bonds(self, issuer_id: str) -> tuple[Bond, ...]:
        try:
            ids = self._issuer_index[issuer_id]
        except KeyError:
            raise UnknownIssuer(f"unknown issuer {issuer_id!r}") from None
        return tuple(self._by_id[i] for i in ids)

    def issuer_size(self, issuer_id: str) -> int:
        return len(self._issuer_index.get(issuer_id, ()))

    def density(self) -> dict[int, int]:
        """Histogram: bonds-per-issuer -> number of issuers."""
        hist: dict[int, int] = {}
        for ids in self._issuer_index.values():
            hist[len(ids)] = hist.get(len(ids), 0) + 1
        return dict(sorted(hist.items()))

    # -- array views used by the search kernels -----------------------------
    @property
    def vocabulary(self) -> _Vocabulary:
        return self._vocab

    @property
    def codes(self) -> np.ndarray:
        return self._codes

    @property
    def maturities(self) -> np.ndarray:
        return self._maturity

    @property
    def spreads(self) -> np.ndarray:
        return self._spread

    def position(self, bond_id: str) -> int:
        """Row of ``bond_id`` in the sorted arrays."""
        try:
            return self._rows[bond_id]
        except KeyError:
            raise UnknownBond(f"unknown bond {bond_id!r}") from None

    def without(self, bond_ids: Iterable[str]) -> "Catalog":
        """New catalog with ``bond_ids`` removed; shares category codes with this one."""
        drop = set(bond_ids)
        missing = drop - set(self._by_id)
        if missing:
            raise UnknownBond(f"unknown bonds {sorted(missing)}")
        mask = np.array([b.bond_id not in drop for b in self._bonds], dtype=bool)
        kept = [b for b, m in zip(self._bonds, mask) if m]
        return Catalog(
            kept, self._rating_scale, _vocab=self._vocab, _codes=self._codes[mask].copy()
        )


@dataclass(frozen=True)
class SparsifyOutcome:
    sparse_catalog: Catalog
    retained: tuple[str, ...]
    dropped: tuple[str, ...]


def sparsify_issuer(catalog: Catalog, issuer_id: str, n_drop: int, seed: int) -> SparsifyOutcome:
    """Drop ``n_drop`` of an issuer's bonds uniformly at random without replacement."""
    ids = catalog.issuer_index.get(issuer_id)
    if ids is None:
        raise UnknownIssuer(f"unknown issuer {issuer_id!r}")
    n_drop = int(n_drop)
    if n_drop < 0:
        raise ValueError("n_drop must be nonnegative")
    if n_drop >= len(ids):
        raise DropTooLarge(
            f"issuer {issuer_id!r} has {len(ids)} bonds; cannot drop {n_drop} and keep a query bond"
        )
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(ids), size=n_drop, replace=False) if n_drop else []
    dropped = tuple(sorted(ids[i] for i in picks))
    dropped_set = set(dropped)
    retained = tuple(i for i in ids if i not in dropped_set)
    sparse = catalog.without(dropped) if dropped else catalog
    return SparsifyOutcome(sparse, retained, dropped)


# -- ingestion --------------------------------------------------------------

def _bond_from_record(rec: Mapping[str, object], row: int, scale: RatingScale) -> Bond:
    bad: list[str] = []
    detail: list[str] = []

    def text(key: str) -> str:
        v = rec.get(key)
        return "" if v is None else str(v).strip()

    bond_id = text("bond_id")
    if not bond_id:
        bad.append("bond_id")
    issuer_id = text("issuer_id")
    if not issuer_id:
        bad.append("issuer_id")
    currency = text("currency").upper()
    if len(currency) != 3 or not currency.isalpha():
        bad.append("currency")
        detail.append(f"currency={currency!r} is not an ISO-4217 code")

    def number(key: str) -> float:
        raw = rec.get(key)
        try:
            val = float(raw)  # type: ignore[arg-type]
        except (TypeError, ValueError):
            bad.append(key)
            detail.append(f"{key}={raw!r} is not a number")
            return math.nan
        if not math.isfinite(val):
            bad.append(key)
            detail.append(f"{key}={raw!r} is not finite")
        return val

    maturity = number("maturity_years")
    if math.isfinite(maturity) and maturity <= 0:
        bad.append("maturity_years")
        detail.append(f"maturity_years={maturity!r} must be > 0")
    spread = number("spread_bps")
    try:
        obs = dt.date.fromisoformat(text("observation_date"))
    except ValueError:
        bad.append("observation_date")
        detail.append(f"observation_date={text('observation_date')!r} is not ISO-8601")
        obs = None
    if bad:
        raise MalformedRow(row, bad, "; ".join(detail))
    rating = text("rating")
    if rating not in scale:
        raise UnknownRating(rating, row)
    feats = {f: rec.get(f.column) for f in FEATURES}
    return Bond(
        bond_id=bond_id,
        issuer_id=issuer_id,
        features=feats,
        currency=currency,
        rating=rating,
        maturity_years=maturity,
        spread_bps=spread,
        observation_date=obs,  # type: ignore[arg-type]
    )


def _read_records(path: Path, fmt: str) -> list[tuple[int, dict]]:
    text = path.read_text(encoding="utf-8")
    if fmt == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: not valid JSON ({exc})") from None
        if not isinstance(data, list) or not all(isinstance(r, dict) for r in data):
            raise ParseError(f"{path}: expected a JSON array of objects")
        return [(i + 1, r) for i, r in enumerate(data)]
    if fmt == "csv":
        reader = csv.DictReader(io.StringIO(text))
        header = reader.fieldnames or []
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise ParseError(f"{path}: CSV header lacks columns {missing}")
        # line 1 is the header
        return [(reader.line_num, dict(r)) for r in reader]
    raise ParseError(f"unsupported catalog format {fmt!r}")


def load_catalog(
    path: str | Path, format: str | None = None, rating_scale: RatingScale | None = None
) -> Catalog:
    """Read and validate a catalog file.

    Every row is checked; the first failure is raised and carries the full
    list of problems in ``.diagnostics``.
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    scale = rating_scale or DEFAULT_RATING_SCALE
    records = _read_records(path, fmt)
    bonds: list[Bond] = []
    errors: list[CatalogError] = []
    seen: dict[str, int] = {}
    for row, rec in records:
        try:
            b = _bond_from_record(rec, row, scale)
        except CatalogError as exc:
            errors.append(exc)
            continue
        if b.bond_id in seen:
            errors.append(DuplicateBondId(b.bond_id, row))
            continue
        seen[b.bond_id] = row
        bonds.append(b)
    if errors:
        first = errors[0]
        first.diagnostics = [str(e) for e in errors]  # type: ignore[attr-defined]
        raise first
    return Catalog(bonds, scale)


def write_catalog(catalog: Catalog | Iterable[Bond], path: str | Path, format: str = "csv") -> None:
    recs = [b.to_record() for b in catalog]
    path = Path(path)
    if format == "json":
        path.write_text(json.dumps(recs, indent=1) + "\n", encoding="utf-8")
        return
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in recs:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
