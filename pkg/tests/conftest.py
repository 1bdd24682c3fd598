import datetime as dt

import numpy as np
import pytest

from bondsim.catalog import FEATURES, Bond, Catalog, FeatureName
from bondsim.embedding import VectorStore
from bondsim.filters import SP_SCALE

CURRENCIES = ("USD", "EUR", "GBP")


def make_bond(bond_id, issuer="I1", currency="USD", rating="A", maturity=5.0, spread=100.0, **features):
    feats = {f: features.get(f.name, f"{f.name}-X") for f in FEATURES}
    return Bond(bond_id, issuer, feats, currency, rating, maturity, spread)


def random_catalog(rng, n_bonds=50, n_issuers=10, n_cats=4):
    """Small random catalog plus a random store covering every category."""
    bonds = []
    for i in range(n_bonds):
        feats = {f: f"C{int(rng.integers(n_cats))}" for f in FEATURES}
        bonds.append(
            Bond(
                f"B{i:03d}",
                f"I{int(rng.integers(n_issuers))}",
                feats,
                CURRENCIES[int(rng.integers(len(CURRENCIES)))],
                SP_SCALE[int(rng.integers(0, 12))],
                float(rng.uniform(0.5, 30.0)),
                float(rng.normal(150, 40)),
            )
        )
    entries = {}
    for f in FEATURES:
        for c in range(n_cats):
            entries[(f, f"C{c}")] = rng.standard_normal(8)
    return Catalog(bonds), VectorStore(entries)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_catalog(rng):
    return random_catalog(rng)


@pytest.fixture(scope="session")
def universe():
    from bondsim.synthetic import bundled_universe

    return bundled_universe()


__all__ = ["make_bond", "random_catalog", "FeatureName", "dt"]


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
