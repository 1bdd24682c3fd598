"""Exception hierarchy shared by every bondsim module."""


class BondSimError(Exception):
    """Base class for all bondsim errors."""


# catalog
class CatalogError(BondSimError):
    pass


class MalformedRow(CatalogError):
    def __init__(self, row: int, fields: list[str], detail: str = ""):
        self.row = row
        self.fields = list(fields)
        msg = f"row {row}: invalid field(s) {', '.join(self.fields)}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class DuplicateBondId(CatalogError):
    def __init__(self, bond_id: str, row: int | None = None):
        self.bond_id = bond_id
        self.row = row
        where = f" at row {row}" if row is not None else ""
        super().__init__(f"duplicate bond_id {bond_id!r}{where}")


class UnknownRating(CatalogError):
    def __init__(self, rating: str, row: int | None = None):
        self.rating = rating
        self.row = row
        where = f"row {row}: " if row is not None else ""
        super().__init__(f"{where}rating {rating!r} is not in the rating scale")


class ParseError(BondSimError):
    pass


class InvalidConfig(BondSimError):
    pass


class UnknownIssuer(CatalogError):
    pass


class UnknownBond(CatalogError):
    pass


class DropTooLarge(CatalogError):
    pass


# embedding
class EmbeddingError(BondSimError):
    pass


class DimensionMismatch(EmbeddingError):
    pass


class ZeroNorm(EmbeddingError):
    pass


class DuplicateKey(EmbeddingError):
    pass


class MissingEmbedding(EmbeddingError, KeyError):
    def __init__(self, feature, category: str):
        self.feature = feature
        self.category = category
        name = getattr(feature, "value", feature)
        super().__init__(f"no embedding for {name}={category!r}")

    def __str__(self) -> str:
        return self.args[0]


class InvalidHierarchy(EmbeddingError):
    pass


class TooFewCategories(EmbeddingError):
    pass


class MissingReference(EmbeddingError):
    pass


# search
class SearchError(BondSimError):
    pass


class EmptyCandidateSet(SearchError):
    pass


class MissingFeatureScore(SearchError):
    pass


class InvalidRules(SearchError):
    pass


class InvalidShortlist(SearchError):
    pass


class InvalidWeights(SearchError):
    pass


# curve
class CurveError(BondSimError):
    pass


class NonPositiveMaturity(CurveError):
    pass


class TooFewPoints(CurveError):
    pass


class DegenerateDesign(CurveError):
    pass


class LengthMismatch(CurveError):
    pass


class EmptyInput(CurveError):
    pass


class AllExcluded(CurveError):
    pass


# evaluation
class EvaluationError(BondSimError):
    pass


class ZeroTotal(EvaluationError):
    pass


class NoCandidatesAfterFilters(EvaluationError):
    pass


class NoEligibleIssuers(EvaluationError):
    pass
