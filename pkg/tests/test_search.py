import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bondsim import kernels
from bondsim.catalog import FEATURES, Catalog, FeatureName
from bondsim.embedding import VectorStore, cosine_similarity, synthetic_embeddings
from bondsim.errors import (
    EmptyCandidateSet,
    InvalidRules,
    InvalidShortlist,
    InvalidWeights,
    MissingEmbedding,
    MissingFeatureScore,
)
from bondsim.search import (
    FeatureWeights,
    NumericalProfile,
    TwoStepOrder,
    aggregate_similarity,
    exhaustive_oracle,
    feature_similarity,
    generic_search,
    numerical_search,
    one_hot_similarity,
    one_hot_top_k,
    top_k,
    two_step_search,
)

from conftest import make_bond, random_catalog

IND = FeatureName.IssuerIndustry
CTRY = FeatureName.CountryOfDomicile


def test_weights_normalize_and_validate():
    w = FeatureWeights({IND: 2.0, CTRY: 2.0})
    assert w.normalized.sum() == pytest.approx(1.0)
    assert w.active() == (IND, CTRY)
    with pytest.raises(InvalidWeights):
        FeatureWeights({IND: 0.0})
    with pytest.raises(InvalidWeights):
        FeatureWeights({IND: -1.0, CTRY: 2.0})


def test_aggregate_examples():
    uni = FeatureWeights()
    assert aggregate_similarity({f: 1.0 for f in FEATURES}, uni) == pytest.approx(1.0)
    two = FeatureWeights({IND: 1.0, CTRY: 1.0})
    assert aggregate_similarity({IND: 0.0, CTRY: 1.0}, two) == 0.5
    only = FeatureWeights.only(CTRY)
    assert aggregate_similarity({CTRY: 0.37}, only) == 0.37
    with pytest.raises(MissingFeatureScore):
        aggregate_similarity({IND: 1.0}, two)


@given(st.lists(st.floats(-1, 1), min_size=6, max_size=6), st.lists(st.floats(0.01, 5), min_size=6, max_size=6))
def test_aggregate_within_input_range(scores, ws):
    w = FeatureWeights(dict(zip(FEATURES, ws)))
    agg = aggregate_similarity(dict(zip(FEATURES, scores)), w)
    assert min(scores) <= agg <= max(scores)


def _store_for(*bonds, d=8, seed=0):
    rng = np.random.default_rng(seed)
    entries = {}
    for b in bonds:
        for f in FEATURES:
            entries.setdefault((f, b.features[f]), rng.standard_normal(d))
    return VectorStore(entries)


def test_feature_similarity_examples():
    q = make_bond("Q", IssuerIdentity="ACME")
    c = make_bond("C", IssuerIdentity="ACME")
    store = _store_for(q, c)
    assert feature_similarity(q, c, FeatureName.IssuerIdentity, store) == 1.0
    d = make_bond("D", IssuerIdentity="NEW")
    with pytest.raises(MissingEmbedding, match="IssuerIdentity"):
        feature_similarity(q, d, FeatureName.IssuerIdentity, store)


def test_feature_similarity_disjoint_roots_is_independent_cosine():
    tree = {IND: {"FIN": None, "TECH": None}}
    store = synthetic_embeddings(tree, 16, seed=5, epsilon=0.0)
    q = make_bond("Q", IssuerIndustry="FIN")
    c = make_bond("C", IssuerIndustry="TECH")
    a, b = store.get(IND, "FIN"), store.get(IND, "TECH")
    expected = float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
    assert feature_similarity(q, c, IND, store) == pytest.approx(expected, abs=1e-12)
    assert feature_similarity(c, q, IND, store) == feature_similarity(q, c, IND, store)


def test_one_hot_examples():
    q = make_bond("Q", **{f.name: "A" for f in FEATURES})
    same = make_bond("S", **{f.name: "A" for f in FEATURES})
    none = make_bond("N", **{f.name: "B" for f in FEATURES})
    half = make_bond("H", **{f.name: ("A" if i < 3 else "B") for i, f in enumerate(FEATURES)})
    w = FeatureWeights({IND: 5.0, CTRY: 1.0})
    assert one_hot_similarity(q, same, w) == 1.0
    assert one_hot_similarity(q, none) == 0.0
    assert one_hot_similarity(q, half) == pytest.approx(0.5)
    assert one_hot_similarity(half, q) == one_hot_similarity(q, half)


def test_top_k_clone_first_and_saturation(small_catalog):
    cat, store = small_catalog
    q = cat.bonds[0]
    clone = make_bond("ZZZ", "CLONE", **{f.name: q.features[f] for f in FEATURES})
    cat2 = Catalog(list(cat) + [clone])
    res = top_k(q, cat2, 3, store=store)
    assert res.ranked[0].bond_id == "ZZZ"
    assert res.ranked[0].score == pytest.approx(1.0, abs=1e-12)
    full = top_k(q, cat2, 10_000, store=store)
    assert len(full) == len(cat2) - 1
    assert q.bond_id not in full.ids


def test_top_k_prefix_property_and_order_invariance(small_catalog):
    cat, store = small_catalog
    q = cat.bonds[7]
    long = top_k(q, cat, 20, store=store)
    for k in (1, 5, 12):
        assert top_k(q, cat, k, store=store).ids == long.ids[:k]
    shuffled = Catalog(list(reversed(cat.bonds)))
    assert top_k(q, shuffled, 20, store=store).ids == long.ids


def test_top_k_ties_break_on_bond_id():
    bonds = [make_bond("Q", "I0", IssuerIndustry="A")]
    bonds += [make_bond(b, "I1", IssuerIndustry="B") for b in ("D", "B", "C")]
    cat = Catalog(bonds)
    store = _store_for(*bonds)
    res = top_k(cat.get("Q"), cat, 3, store=store)
    assert res.ids == ["B", "C", "D"]
    assert len(set(res.scores)) == 1


def test_top_k_exclude_issuer(small_catalog):
    cat, store = small_catalog
    q = cat.bonds[0]
    res = top_k(q, cat, 50, store=store, exclude_issuer=True)
    assert all(cat.get(b).issuer_id != q.issuer_id for b in res.ids)


def test_top_k_errors(small_catalog):
    cat, store = small_catalog
    single = Catalog([cat.bonds[0]])
    with pytest.raises(EmptyCandidateSet):
        top_k(cat.bonds[0], single, 3, store=store)
    with pytest.raises(ValueError):
        top_k(cat.bonds[0], cat, 0, store=store)


def test_top_k_missing_embedding_names_feature(small_catalog):
    cat, store = small_catalog
    entries = {k: store.get(*k) for k in store.keys() if k != (CTRY, "C1")}
    partial = VectorStore(entries)
    q = next(b for b in cat if b.features[CTRY] != "C1")
    with pytest.raises(MissingEmbedding, match="CountryOfDomicile"):
        top_k(q, cat, 5, store=partial)


def test_one_hot_top_k_matches_pairwise(small_catalog):
    cat, _ = small_catalog
    q = cat.bonds[3]
    res = one_hot_top_k(q, cat, 100)
    expected = sorted(
        ((one_hot_similarity(q, b), b.bond_id) for b in cat if b.bond_id != q.bond_id),
        key=lambda t: (-t[0], t[1]),
    )
    assert res.ids == [b for _, b in expected]
    np.testing.assert_allclose(res.scores, [s for s, _ in expected], atol=1e-12)


def test_numpy_and_numba_rankings_agree(small_catalog):
    if kernels.NUMBA is None:
        pytest.skip("numba unavailable")
    cat, store = small_catalog
    for q in cat.bonds[:10]:
        a = top_k(q, cat, 49, store=store, backend=kernels.NUMPY)
        b = top_k(q, cat, 49, store=store, backend=kernels.NUMBA)
        assert a.ids == b.ids
        np.testing.assert_allclose(a.scores, b.scores, atol=1e-12)


def test_generic_search_examples():
    q = make_bond("Q", IssuerIndustry="TECH")
    match = [make_bond(f"M{i}", "X", IssuerIndustry="TECH") for i in range(4)]
    other = [make_bond(f"O{i}", "X", IssuerIndustry="FIN") for i in range(3)]
    cat = Catalog([q, *match, *other])
    assert generic_search(q, cat, ["IssuerIndustry"]) == ["M0", "M1", "M2", "M3"]
    assert generic_search(q, cat, [("IssuerIndustry", "utilities")]) == []
    with pytest.raises(InvalidRules):
        generic_search(q, cat, [])
    with pytest.raises(InvalidRules):
        generic_search(q, cat, ["colour"])


def test_generic_search_is_the_exact_conjunction(small_catalog):
    cat, _ = small_catalog
    q = cat.bonds[0]
    got = generic_search(q, cat, ["currency", IND])
    want = [b.bond_id for b in cat if b.bond_id != q.bond_id
            and b.currency == q.currency and b.features[IND] == q.features[IND]]
    assert got == want


def test_numerical_search_examples():
    q = make_bond("Q", "I0", maturity=5.0, rating="A")
    twin = make_bond("T", "I1", maturity=5.0, rating="A")
    far = make_bond("F", "I1", maturity=15.0, rating="A")
    cat = Catalog([q, twin, far])
    res = numerical_search(q, cat, 2, NumericalProfile(("maturity_years",)))
    assert res.ids == ["T", "F"]
    assert res.scores[0] == 1.0
    # pool maturities 5, 15 -> z = -1, +1; query z = -1
    assert res.scores[1] == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_numerical_distances_one_and_two():
    # pool z-scores (t+1, t+2, -2t-3) have mean 0 and unit variance when
    # 6t^2 + 18t + 11 = 0; a query at z = t is then 1 and 2 away from the first two
    t = (-18 + math.sqrt(324 - 264)) / 12
    z = [t + 1, t + 2, -2 * t - 3]
    q = make_bond("Q", "I0", maturity=10 + 3 * t)
    cands = [make_bond(n, "I1", maturity=10 + 3 * v) for n, v in zip("ABC", z)]
    cat = Catalog([q, *cands])
    res = numerical_search(q, cat, 3, NumericalProfile(("maturity_years",)))
    assert res.ids == ["C", "A", "B"]
    assert res.scores[1] == pytest.approx(0.5, abs=1e-12)
    assert res.scores[2] == pytest.approx(1 / 3, abs=1e-12)


def test_numerical_constant_column_contributes_zero():
    q = make_bond("Q", "I0", maturity=5.0, rating="AA")
    cands = [make_bond(f"C{i}", "I1", maturity=5.0, rating=r) for i, r in enumerate(("AAA", "A", "BBB"))]
    cat = Catalog([q, *cands])
    with_mat = numerical_search(q, cat, 3)
    rating_only = numerical_search(q, cat, 3, NumericalProfile(("rating",)))
    assert with_mat.ids == rating_only.ids
    np.testing.assert_allclose(with_mat.scores, rating_only.scores, atol=1e-15)


def test_two_step_degenerate_shortlists(small_catalog):
    cat, store = small_catalog
    q = cat.bonds[5]
    n = len(cat) - 1
    full = two_step_search(q, cat, 5, TwoStepOrder.categorical_then_numerical, n, store=store)
    assert full.ids == numerical_search(q, cat, 5).ids
    k_only = two_step_search(q, cat, 5, TwoStepOrder.categorical_then_numerical, 5, store=store)
    assert set(k_only.ids) == set(top_k(q, cat, 5, store=store).ids)
    with pytest.raises(InvalidShortlist):
        two_step_search(q, cat, 5, "categorical_then_numerical", 4, store=store)


def test_two_step_matches_two_pass_brute_force(small_catalog):
    cat, store = small_catalog
    q = cat.bonds[11]
    k, m = 5, 10
    # order A: embedding shortlist, numerical re-rank
    short = exhaustive_oracle(q, cat, store=store, k=m).ids
    sub = Catalog([q] + [cat.get(b) for b in short])
    want_a = numerical_search(q, sub, k).ids
    got_a = two_step_search(q, cat, k, TwoStepOrder.categorical_then_numerical, m, store=store).ids
    assert got_a == want_a
    # order B: numerical shortlist, embedding re-rank
    short = numerical_search(q, cat, m).ids
    sub = Catalog([q] + [cat.get(b) for b in short])
    want_b = exhaustive_oracle(q, sub, store=store, k=k).ids
    got_b = two_step_search(q, cat, k, TwoStepOrder.numerical_then_categorical, m, store=store).ids
    assert got_b == want_b


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_identical_categories_score_one_everywhere(seed):
    rng = np.random.default_rng(seed)
    cat, store = random_catalog(rng, n_bonds=12, n_issuers=3)
    q = cat.bonds[0]
    for b in cat.bonds[1:]:
        if b.features == q.features:
            per = {f: feature_similarity(q, b, f, store) for f in FEATURES}
            assert aggregate_similarity(per) == pytest.approx(1.0)
            assert one_hot_similarity(q, b) == 1.0
    # symmetry of per-feature cosine
    b = cat.bonds[1]
    for f in FEATURES:
        assert feature_similarity(q, b, f, store) == feature_similarity(b, q, f, store)
    assert cosine_similarity(store.get(IND, "C0"), store.get(IND, "C1")) == pytest.approx(
        cosine_similarity(store.get(IND, "C1"), store.get(IND, "C0")), abs=1e-15
    )
