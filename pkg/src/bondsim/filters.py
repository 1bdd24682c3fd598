"""Post-filters applied to a ranked candidate list: currency, maturity window, rating.

Every filter is a pure membership predicate, so the stages commute and the
cascade keeps the input ranking order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Iterable, Sequence, TypeVar

from .errors import InvalidConfig, UnknownRating

if TYPE_CHECKING:
    from .catalog import Bond

T = TypeVar("T")

SP_SCALE = (
    "AAA", "AA+", "AA", "AA-", "A+", "A", "A-",
    "BBB+", "BBB", "BBB-", "BB+", "BB", "BB-",
    "B+", "B", "B-", "CCC+", "CCC", "CCC-", "CC", "C", "D",
)


class RatingScale:
    """Ordinal rating scale, best rating first."""

    __slots__ = ("ratings", "_rank")

    def __init__(self, ratings: Iterable[str]):
        ratings = tuple(r.strip() for r in ratings)
        if not ratings:
            raise InvalidConfig("rating scale is empty")
        if len(set(ratings)) != len(ratings):
            dupes = sorted({r for r in ratings if ratings.count(r) > 1})
            raise InvalidConfig(f"rating scale has duplicates: {dupes}")
        self.ratings = ratings
        self._rank = {r: i for i, r in enumerate(ratings)}

    @classmethod
    def from_file(cls, path: str | Path) -> "RatingScale":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(ln.strip() for ln in lines if ln.strip() and not ln.lstrip().startswith("#"))

    def rank(self, rating: str) -> int:
        try:
            return self._rank[rating]
        except KeyError:
            raise UnknownRating(rating) from None

    def __contains__(self, rating: object) -> bool:
        return rating in self._rank

    def __len__(self) -> int:
        return len(self.ratings)

    def __iter__(self):
        return iter(self.ratings)

    def __eq__(self, other):
        return isinstance(other, RatingScale) and self.ratings == other.ratings

    def __hash__(self):
        return hash(self.ratings)

    def __repr__(self):
        return f"RatingScale({self.ratings[0]}..{self.ratings[-1]}, {len(self)} notches)"


DEFAULT_RATING_SCALE = RatingScale(SP_SCALE)


@dataclass(frozen=True)
class FilterConfig:
    """Post-filter settings.

    ``maturity_mode="relative"`` keeps candidates with
    ``query - lower <= maturity <= query + upper``; ``"absolute"`` keeps
    ``lower <= maturity <= upper``. ``None`` leaves a side unbounded and a
    ``rating_tolerance_notches`` of ``None`` disables the rating stage.
    """

    enforce_currency: bool = True
    maturity_lower_years: float | None = None
    maturity_upper_years: float | None = None
    rating_tolerance_notches: int | None = 3
    maturity_mode: str = "relative"

    def __post_init__(self):
        lo, hi = self.maturity_lower_years, self.maturity_upper_years
        for name, v in (("maturity_lower_years", lo), ("maturity_upper_years", hi)):
            if v is not None and not v >= 0:
                raise InvalidConfig(f"{name} must be a nonnegative number, got {v!r}")
        if self.maturity_mode not in ("relative", "absolute"):
            raise InvalidConfig(f"maturity_mode must be relative|absolute, got {self.maturity_mode!r}")
        if self.maturity_mode == "absolute" and lo is not None and hi is not None and lo > hi:
            raise InvalidConfig("maturity_lower_years exceeds maturity_upper_years")
        tol = self.rating_tolerance_notches
        if tol is not None and (int(tol) != tol or tol < 0):
            raise InvalidConfig(f"rating_tolerance_notches must be a nonnegative integer, got {tol!r}")

    @classmethod
    def disabled(cls) -> "FilterConfig":
        return cls(enforce_currency=False, rating_tolerance_notches=None)


DEFAULT_FILTERS = FilterConfig()


def _bond(item) -> "Bond":
    # ranked lists may hold bonds directly or (bond, score, ...) tuples
    return item[0] if isinstance(item, tuple) else item


def currency_predicate(query: "Bond") -> Callable[["Bond"], bool]:
    ccy = query.currency
    return lambda b: b.currency == ccy


def maturity_predicate(query: "Bond", config: FilterConfig) -> Callable[["Bond"], bool]:
    lo, hi = config.maturity_lower_years, config.maturity_upper_years
    if config.maturity_mode == "relative":
        lo_v = None if lo is None else query.maturity_years - lo
        hi_v = None if hi is None else query.maturity_years + hi
    else:
        lo_v, hi_v = lo, hi

    def keep(b: "Bond") -> bool:
        m = b.maturity_years
        return (lo_v is None or m >= lo_v) and (hi_v is None or m <= hi_v)

    return keep


def rating_predicate(query: "Bond", scale: RatingScale, tolerance: int) -> Callable[["Bond"], bool]:
    q = scale.rank(query.rating)
    return lambda b: abs(scale.rank(b.rating) - q) <= tolerance


def _select(candidates: Sequence[T], keep: Callable[["Bond"], bool]) -> list[T]:
    return [c for c in candidates if keep(_bond(c))]


def currency_filter(query: "Bond", candidates: Sequence[T]) -> list[T]:
    return _select(candidates, currency_predicate(query))


def maturity_filter(query: "Bond", candidates: Sequence[T], config: FilterConfig) -> list[T]:
    if config.maturity_lower_years is None and config.maturity_upper_years is None:
        return list(candidates)
    return _select(candidates, maturity_predicate(query, config))


def rating_filter(
    query: "Bond", candidates: Sequence[T], scale: RatingScale, tolerance: int
) -> list[T]:
    if tolerance < 0:
        raise InvalidConfig("rating tolerance must be nonnegative")
    return _select(candidates, rating_predicate(query, scale, tolerance))


STAGES = ("currency", "maturity", "rating")


def apply_filters(
    query: "Bond",
    candidates: Sequence[T],
    config: FilterConfig = DEFAULT_FILTERS,
    scale: RatingScale = DEFAULT_RATING_SCALE,
    order: Sequence[str] = STAGES,
) -> list[T]:
    """Run the enabled stages in ``order`` (currency, maturity, rating by default)."""
    if sorted(order) != sorted(STAGES):
        raise InvalidConfig(f"stage order must be a permutation of {STAGES}")
    out = list(candidates)
    for stage in order:
        if stage == "currency" and config.enforce_currency:
            out = currency_filter(query, out)
        elif stage == "maturity":
            out = maturity_filter(query, out, config)
        elif stage == "rating" and config.rating_tolerance_notches is not None:
            out = rating_filter(query, out, scale, int(config.rating_tolerance_notches))
    return out
