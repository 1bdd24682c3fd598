import csv
import json

import numpy as np
import pytest

from bondsim.catalog import (
    CSV_COLUMNS,
    FEATURES,
    Catalog,
    FeatureName,
    load_catalog,
    sparsify_issuer,
    write_catalog,
)
from bondsim.errors import DropTooLarge, DuplicateBondId, MalformedRow, ParseError, UnknownIssuer, UnknownRating
from bondsim.synthetic import SyntheticConfig, generate_synthetic_catalog

from conftest import make_bond


def _row(bond_id, issuer="I1", maturity="5", rating="A", **over):
    rec = {c: "" for c in CSV_COLUMNS}
    rec.update(
        bond_id=bond_id, issuer_id=issuer, issuer_industry="Tech", market_issue_type="Global",
        industry_group="Software", industry_subgroup="Apps", country_of_domicile="US",
        issuer_identity=issuer, currency="usd", rating=rating, maturity_years=maturity,
        spread_bps="120.5", observation_date="2024-12-13",
    )
    rec.update(over)
    return rec


def _write_csv(path, rows):
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    return path


def test_feature_name_has_six_members_in_fixed_order():
    assert len(FEATURES) == 6
    assert [f.value for f in FEATURES] == [
        "IssuerIndustry", "MarketIssueType", "IndustryGroup",
        "IndustrySubgroup", "CountryOfDomicile", "IssuerIdentity",
    ]
    assert FeatureName.parse("issuer_industry") is FeatureName.IssuerIndustry


def test_load_three_row_csv(tmp_path):
    p = _write_csv(tmp_path / "c.csv", [_row("B1"), _row("B2"), _row("B3", issuer="I2")])
    cat = load_catalog(p)
    assert len(cat) == 3
    assert cat.issuer_index["I1"] == ("B1", "B2")
    assert cat.get("B1").currency == "USD"
    assert cat.get("B1").features[FeatureName.IssuerIndustry] == "TECH"


def test_empty_category_becomes_unknown(tmp_path):
    p = _write_csv(tmp_path / "c.csv", [_row("B1", industry_subgroup="")])
    assert load_catalog(p).get("B1").features[FeatureName.IndustrySubgroup] == "UNKNOWN"


def test_duplicate_bond_id_names_the_id(tmp_path):
    p = _write_csv(tmp_path / "c.csv", [_row("B1"), _row("B1")])
    with pytest.raises(DuplicateBondId, match="B1"):
        load_catalog(p)


def test_negative_maturity_reports_row(tmp_path):
    p = _write_csv(tmp_path / "c.csv", [_row("B1"), _row("B2", maturity="-1")])
    with pytest.raises(MalformedRow) as ei:
        load_catalog(p)
    assert ei.value.row == 3
    assert "maturity_years" in str(ei.value)


def test_all_bad_rows_are_collected(tmp_path):
    p = _write_csv(tmp_path / "c.csv", [_row("B1", maturity="x"), _row("B2", rating="ZZZ")])
    with pytest.raises(MalformedRow) as ei:
        load_catalog(p)
    assert len(ei.value.diagnostics) == 2


def test_unknown_rating(tmp_path):
    p = _write_csv(tmp_path / "c.csv", [_row("B1", rating="Aaa")])
    with pytest.raises(UnknownRating):
        load_catalog(p)


def test_json_round_trip(tmp_path):
    rows = [_row("B1"), _row("B2", issuer="I9", maturity="12.5")]
    p = tmp_path / "c.json"
    p.write_text(json.dumps(rows))
    cat = load_catalog(p)
    out = tmp_path / "back.json"
    write_catalog(cat, out, format="json")
    assert load_catalog(out) == cat


def test_json_format_on_csv_content_is_parse_error(tmp_path):
    p = _write_csv(tmp_path / "c.csv", [_row("B1")])
    with pytest.raises(ParseError):
        load_catalog(p, format="json")


def test_catalog_is_sorted_and_consistent():
    bonds = [make_bond("C", "I2"), make_bond("A", "I1"), make_bond("B", "I2")]
    cat = Catalog(bonds)
    assert cat.bond_ids == ("A", "B", "C")
    assert sum(len(v) for v in cat.issuer_index.values()) == len(cat)
    assert cat.density() == {1: 1, 2: 1}


def test_sparsify_shape_and_determinism():
    bonds = [make_bond(f"B{i:02d}", "AMGN", maturity=1 + i) for i in range(12)] + [make_bond("Z", "OTHER")]
    cat = Catalog(bonds)
    a = sparsify_issuer(cat, "AMGN", 10, seed=3)
    b = sparsify_issuer(cat, "AMGN", 10, seed=3)
    assert len(a.retained) == 2 and len(a.dropped) == 10
    assert a.dropped == b.dropped
    assert set(a.retained) | set(a.dropped) == set(cat.issuer_index["AMGN"])
    assert not set(a.retained) & set(a.dropped)
    assert len(a.sparse_catalog) == 3
    assert a.sparse_catalog.get("Z") is cat.get("Z")
    for bid in a.retained:
        assert a.sparse_catalog.get(bid) == cat.get(bid)


def test_sparsify_zero_drop_is_identity():
    cat = Catalog([make_bond("A"), make_bond("B")])
    out = sparsify_issuer(cat, "I1", 0, seed=1)
    assert out.dropped == () and out.retained == ("A", "B")
    assert out.sparse_catalog == cat


def test_sparsify_errors():
    cat = Catalog([make_bond("A"), make_bond("B")])
    with pytest.raises(UnknownIssuer):
        sparsify_issuer(cat, "nope", 0, 1)
    with pytest.raises(DropTooLarge):
        sparsify_issuer(cat, "I1", 2, 1)


def test_synthetic_catalog_counts_and_determinism(tmp_path):
    cfg = SyntheticConfig(n_issuers=20, bonds_per_issuer=4)
    a = generate_synthetic_catalog(cfg, seed=7)
    b = generate_synthetic_catalog(cfg, seed=7)
    assert len(a) == 80 and len(a.issuers) == 20
    write_catalog(a, tmp_path / "a.csv")
    write_catalog(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_synthetic_minimal_catalog():
    cat = generate_synthetic_catalog(SyntheticConfig(n_issuers=1, bonds_per_issuer=1), seed=7)
    assert len(cat) == 1


def test_synthetic_full_size():
    cat = generate_synthetic_catalog(SyntheticConfig(), seed=7)
    assert len(cat) == 2500 and len(cat.issuers) == 250


def test_csv_write_then_load_is_lossless(tmp_path):
    cat = generate_synthetic_catalog(SyntheticConfig(n_issuers=5, bonds_per_issuer=3), seed=2)
    write_catalog(cat, tmp_path / "c.csv")
    back = load_catalog(tmp_path / "c.csv")
    assert back == cat
    assert np.array_equal(back.spreads, cat.spreads)
