"""Seeded synthetic bond universe.

Issuers sit in a taxonomy (super-sector > sector > group > subgroup) and a
geography (region > country). The same trees generate the category
embeddings, and every issuer's latent Nelson-Siegel parameters are the
sector's base curve plus fixed random linear readouts of the issuer's
category embeddings, plus a small idiosyncratic term. Categorical
similarity therefore predicts curve similarity by construction, graded by
how close the embeddings are. Ratings follow the latent level, so the rating
post-filter carries real information as well.
"""

from __future__ import annotations

import datetime as dt
import string
from dataclasses import dataclass, field

import numpy as np

from .catalog import FEATURES, Bond, Catalog, FeatureName
from .curve import NSParams, ns_spread
from .embedding import VectorStore, synthetic_embeddings
from .errors import InvalidConfig
from .filters import DEFAULT_RATING_SCALE

# region -> (country, home currency, sampling weight)
GEOGRAPHY: dict[str, tuple[tuple[str, str, float], ...]] = {
    "AMERICAS": (("US", "USD", 0.40), ("CA", "CAD", 0.06), ("MX", "MXN", 0.03), ("BR", "BRL", 0.03)),
    "EUROPE": (
        ("DE", "EUR", 0.06), ("FR", "EUR", 0.06), ("IT", "EUR", 0.03), ("ES", "EUR", 0.03),
        ("NL", "EUR", 0.03), ("GB", "GBP", 0.07), ("CH", "CHF", 0.03),
    ),
    "ASIA PACIFIC": (("JP", "JPY", 0.06), ("KR", "KRW", 0.04), ("AU", "AUD", 0.05), ("SG", "SGD", 0.02)),
}

MARKET_TYPES: dict[str, tuple[str, ...]] = {
    "INTERNATIONAL MARKET": ("GLOBAL", "EURO-DOLLAR", "EURO MTN"),
    "DOMESTIC MARKET": ("DOMESTIC", "DOMESTIC MTN", "PRIVATE PLACEMENT"),
}

# spread basis by currency of denomination, bps
CURRENCY_BASIS = {
    "USD": 0.0, "CAD": 10.0, "MXN": 45.0, "BRL": 70.0, "EUR": -20.0, "GBP": 5.0, "CHF": -30.0,
    "JPY": -40.0, "KRW": 25.0, "AUD": 15.0, "SGD": -10.0,
}

# readout sizes in bps for (level, slope, curvature) per unit embedding
# projection; market issue type is bond-level and carries no spread effect
DEFAULT_READOUT = {
    FeatureName.IssuerIndustry: (25.0, 10.0, 5.0),
    FeatureName.IndustryGroup: (25.0, 10.0, 5.0),
    FeatureName.IndustrySubgroup: (25.0, 10.0, 5.0),
    FeatureName.CountryOfDomicile: (25.0, 10.0, 5.0),
    FeatureName.IssuerIdentity: (25.0, 10.0, 5.0),
    FeatureName.MarketIssueType: (0.0, 0.0, 0.0),
}


@dataclass(frozen=True)
class SyntheticConfig:
    n_issuers: int = 250
    bonds_per_issuer: int = 10
    n_supersectors: int = 3
    sectors_per_supersector: int = 3
    groups_per_sector: int = 2
    subgroups_per_group: int = 3
    n_regions: int = 3
    embedding_dim: int = 16
    epsilon: float = 0.3
    noise_bps: float = 5.0
    idiosyncratic_bps: tuple[float, float, float] = (3.0, 1.5, 1.0)
    maturity_range: tuple[float, float] = (0.5, 30.0)
    foreign_usd_share: float = 0.1
    observation_date: dt.date = dt.date(2024, 12, 13)
    readout: dict = field(default_factory=lambda: dict(DEFAULT_READOUT))
    currency_basis: dict = field(default_factory=lambda: dict(CURRENCY_BASIS))

    def __post_init__(self):
        counts = (
            "n_issuers", "bonds_per_issuer", "n_supersectors", "sectors_per_supersector",
            "groups_per_sector", "subgroups_per_group", "n_regions", "embedding_dim",
        )
        for name in counts:
            v = getattr(self, name)
            if int(v) != v or v <= 0:
                raise InvalidConfig(f"{name} must be a positive integer, got {v!r}")
        if self.n_regions > len(GEOGRAPHY):
            raise InvalidConfig(f"n_regions must be <= {len(GEOGRAPHY)}")
        if self.embedding_dim < 2:
            raise InvalidConfig("embedding_dim must be >= 2")
        if not self.noise_bps >= 0:
            raise InvalidConfig(f"noise_bps must be >= 0, got {self.noise_bps!r}")
        if not self.epsilon >= 0:
            raise InvalidConfig("epsilon must be >= 0")
        lo, hi = self.maturity_range
        if not 0 < lo < hi:
            raise InvalidConfig("maturity_range must satisfy 0 < lo < hi")
        if not 0 <= self.foreign_usd_share <= 1:
            raise InvalidConfig("foreign_usd_share must lie in [0, 1]")
        if any(v < 0 for v in self.idiosyncratic_bps):
            raise InvalidConfig("idiosyncratic_bps must be nonnegative")


@dataclass(frozen=True)
class IssuerProfile:
    issuer_id: str
    name: str
    supersector: str
    sector: str
    group: str
    subgroup: str
    region: str
    country: str
    currency: str
    rating: str
    latent: NSParams


@dataclass(frozen=True)
class SyntheticUniverse:
    config: SyntheticConfig
    seed: int
    catalog: Catalog
    store: VectorStore
    hierarchy: dict
    issuers: dict[str, IssuerProfile]
    noise: dict[str, float]

    def latent_spread(self, bond: Bond) -> float:
        """Noise-free spread of ``bond``: its issuer's latent curve plus the currency basis."""
        basis = self.config.currency_basis.get(bond.currency, 0.0)
        return float(ns_spread(self.issuers[bond.issuer_id].latent, bond.maturity_years)) + basis


def _taxonomy(cfg: SyntheticConfig):
    """Parent maps for the industry tree and the list of (super, sector, group, subgroup) leaves."""
    parent: dict[str, str | None] = {}
    leaves = []
    for a in range(1, cfg.n_supersectors + 1):
        ss = f"SUPERSECTOR {a}"
        parent[ss] = None
        for b in range(1, cfg.sectors_per_supersector + 1):
            sec = f"SECTOR {a}.{b}"
            parent[sec] = ss
            for c in range(1, cfg.groups_per_sector + 1):
                grp = f"GROUP {a}.{b}.{c}"
                parent[grp] = sec
                for d in range(1, cfg.subgroups_per_group + 1):
                    sub = f"SUBGROUP {a}.{b}.{c}.{d}"
                    parent[sub] = grp
                    leaves.append((ss, sec, grp, sub))
    return parent, leaves


def _truncate(parent: dict[str, str | None], prefixes: tuple[str, ...]) -> dict[str, str | None]:
    return {k: v for k, v in parent.items() if k.startswith(prefixes)}


_ISIN_ALPHABET = string.digits + string.ascii_uppercase


def isin_check_digit(body: str) -> str:
    """Luhn check digit over the ISIN letter-to-number expansion."""
    digits = "".join(str(int(ch, 36)) for ch in body)
    total = 0
    for i, ch in enumerate(reversed(digits)):
        d = int(ch)
        if i % 2 == 0:
            d *= 2
            if d > 9:
                d -= 9
        total += d
    return str((10 - total % 10) % 10)


def _make_isin(rng: np.random.Generator, country: str) -> str:
    body = country + "".join(_ISIN_ALPHABET[i] for i in rng.integers(0, 36, size=9))
    return body + isin_check_digit(body)


def generate_synthetic_universe(config: SyntheticConfig | None = None, seed: int = 7) -> SyntheticUniverse:
    cfg = config or SyntheticConfig()
    if seed < 0:
        raise InvalidConfig("seed must be nonnegative")
    ss_tax, ss_emb, ss_latent, ss_bonds = np.random.SeedSequence(seed).spawn(4)
    rng_tax = np.random.default_rng(ss_tax)
    rng_lat = np.random.default_rng(ss_latent)
    rng_bond = np.random.default_rng(ss_bonds)

    industry_parent, leaves = _taxonomy(cfg)
    regions = list(GEOGRAPHY)[: cfg.n_regions]
    countries = [(r, c, ccy, w) for r in regions for (c, ccy, w) in GEOGRAPHY[r]]
    cweights = np.array([w for *_, w in countries])
    cweights /= cweights.sum()

    # issuer placement
    issuers_raw = []
    for i in range(cfg.n_issuers):
        leaf = leaves[int(rng_tax.integers(len(leaves)))]
        region, country, ccy, _ = countries[int(rng_tax.choice(len(countries), p=cweights))]
        issuers_raw.append((f"I{i + 1:03d}", f"ISSUER {i + 1:03d}", leaf, region, country, ccy))

    identity_parent = dict(industry_parent)
    for _, name, leaf, *_ in issuers_raw:
        identity_parent[name] = leaf[3]
    geo_parent: dict[str, str | None] = {r: None for r in regions}
    for r, c, _, _ in countries:
        geo_parent[c] = r
    market_parent: dict[str, str | None] = {}
    for root, kids in MARKET_TYPES.items():
        market_parent[root] = None
        for k in kids:
            market_parent[k] = root
    hierarchy = {
        FeatureName.IssuerIndustry: _truncate(industry_parent, ("SUPERSECTOR", "SECTOR")),
        FeatureName.IndustryGroup: _truncate(industry_parent, ("SUPERSECTOR", "SECTOR", "GROUP")),
        FeatureName.IndustrySubgroup: _truncate(industry_parent, ("SUPERSECTOR", "SECTOR", "GROUP", "SUBGROUP")),
        FeatureName.IssuerIdentity: identity_parent,
        FeatureName.CountryOfDomicile: geo_parent,
        FeatureName.MarketIssueType: market_parent,
    }
    emb_seed = int(ss_emb.generate_state(1, dtype=np.uint32)[0])
    store = synthetic_embeddings(hierarchy, cfg.embedding_dim, emb_seed, epsilon=cfg.epsilon, leaves_only=True)

    # latent curves: sector base + embedding readouts + idiosyncratic term
    sectors = sorted({leaf[1] for leaf in leaves})
    base = {
        s: (
            rng_lat.uniform(90.0, 200.0),
            rng_lat.uniform(-90.0, -20.0),
            rng_lat.uniform(-40.0, 40.0),
            rng_lat.uniform(1.0, 4.0),
        )
        for s in sectors
    }
    readout = {f: rng_lat.standard_normal((3, cfg.embedding_dim)) for f in FEATURES}
    scales = {f: np.asarray(cfg.readout.get(f, (0.0, 0.0, 0.0)), dtype=np.float64) for f in FEATURES}
    idio_scale = np.asarray(cfg.idiosyncratic_bps, dtype=np.float64)
    scale = DEFAULT_RATING_SCALE

    profiles: dict[str, IssuerProfile] = {}
    for issuer_id, name, (ss, sec, grp, sub), region, country, ccy in issuers_raw:
        cats = {
            FeatureName.IssuerIndustry: sec,
            FeatureName.IndustryGroup: grp,
            FeatureName.IndustrySubgroup: sub,
            FeatureName.CountryOfDomicile: country,
            FeatureName.IssuerIdentity: name,
        }
        b0, b1, b2, lam = base[sec]
        beta = np.array([b0, b1, b2])
        for f, cat in cats.items():
            beta = beta + scales[f] * (readout[f] @ store.get(f, cat))
        beta = beta + idio_scale * rng_lat.standard_normal(3)
        lam = lam * float(np.exp(0.1 * rng_lat.standard_normal()))
        level = max(float(beta[0]), 15.0)
        slope = max(float(beta[1]), 5.0 - level)
        notch = int(np.clip(round((level - 15.0) / 22.0 + 0.5 * rng_lat.standard_normal()), 0, 16))
        profiles[issuer_id] = IssuerProfile(
            issuer_id, name, ss, sec, grp, sub, region, country, ccy,
            scale.ratings[notch], NSParams(level, slope, float(beta[2]), lam),
        )

    lo, hi = cfg.maturity_range
    market_leaves = [m for kids in MARKET_TYPES.values() for m in kids]
    bonds = []
    noise = {}
    used_ids = set()
    for issuer_id, name, (ss, sec, grp, sub), region, country, ccy in issuers_raw:
        prof = profiles[issuer_id]
        for _ in range(cfg.bonds_per_issuer):
            bid = _make_isin(rng_bond, country)
            while bid in used_ids:
                bid = _make_isin(rng_bond, country)
            used_ids.add(bid)
            tau = round(float(np.exp(rng_bond.uniform(np.log(lo), np.log(hi)))), 4)
            market = market_leaves[int(rng_bond.integers(len(market_leaves)))]
            bond_ccy = ccy
            if ccy != "USD" and rng_bond.random() < cfg.foreign_usd_share:
                bond_ccy = "USD"
            eps = float(cfg.noise_bps * rng_bond.standard_normal())
            noise[bid] = eps
            bonds.append(
                Bond(
                    bond_id=bid,
                    issuer_id=issuer_id,
                    features={
                        FeatureName.IssuerIndustry: sec,
                        FeatureName.MarketIssueType: market,
                        FeatureName.IndustryGroup: grp,
                        FeatureName.IndustrySubgroup: sub,
                        FeatureName.CountryOfDomicile: country,
                        FeatureName.IssuerIdentity: name,
                    },
                    currency=bond_ccy,
                    rating=prof.rating,
                    maturity_years=tau,
                    spread_bps=float(ns_spread(prof.latent, tau)) + cfg.currency_basis.get(bond_ccy, 0.0) + eps,
                    observation_date=cfg.observation_date,
                )
            )
    catalog = Catalog(bonds)
    # keep only categories that occur in the catalog (drops empty subgroups
    # that would otherwise show up as identity leaves)
    used = {(f, b.features[f]) for b in catalog for f in FEATURES}
    store = VectorStore([(key, store.get(*key)) for key in store.keys() if key in used], cfg.embedding_dim)
    return SyntheticUniverse(cfg, seed, catalog, store, hierarchy, profiles, noise)


def hierarchy_from_catalog(catalog: Catalog) -> dict:
    """Category trees implied by a catalog, for synthetic embeddings of real data.

    Industry features nest issuer industry > group > subgroup > issuer
    identity (each bond's own values give the parent links); country and
    market type become independent roots. Internal nodes live in the parent
    feature's namespace with a ``feature:`` prefix so names never collide.
    """
    chain = (
        FeatureName.IssuerIndustry,
        FeatureName.IndustryGroup,
        FeatureName.IndustrySubgroup,
        FeatureName.IssuerIdentity,
    )
    trees: dict = {f: {} for f in FEATURES}
    for bond in catalog:
        for depth, f in enumerate(chain):
            tree = trees[f]
            parent = None
            for g in chain[:depth]:
                node = f"{g.value}:{bond.features[g]}"
                tree.setdefault(node, parent)
                parent = node
            # first bond (in id order) wins if the catalog is inconsistent
            tree.setdefault(bond.features[f], parent)
        for f in (FeatureName.CountryOfDomicile, FeatureName.MarketIssueType):
            trees[f].setdefault(bond.features[f], None)
    return trees


def generate_synthetic_catalog(config: SyntheticConfig | None = None, seed: int = 7) -> Catalog:
    """Deterministic synthetic catalog; see :func:`generate_synthetic_universe`."""
    return generate_synthetic_universe(config, seed).catalog


BUNDLED_SEED = 20241213
BUNDLED_CONFIG = SyntheticConfig()


def bundled_universe() -> SyntheticUniverse:
    """The 250-issuer x 10-bond fixture used by the benchmark and acceptance runs."""
    return _bundled()


_cache: dict = {}


def _bundled() -> SyntheticUniverse:
    if "u" not in _cache:
        _cache["u"] = generate_synthetic_universe(BUNDLED_CONFIG, BUNDLED_SEED)
    return _cache["u"]
