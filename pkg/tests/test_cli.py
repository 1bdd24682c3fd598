import csv
import json
from dataclasses import replace
from pathlib import Path

import pytest
import yaml

from bondsim import cli
from bondsim.catalog import write_catalog
from bondsim.config import RunConfig, load_run_config
from bondsim.errors import InvalidConfig
from bondsim.evaluation import VariantKind
from bondsim.synthetic import SyntheticConfig, generate_synthetic_universe

BUNDLED = Path(cli.__file__).parent / "data" / "benchmark.yaml"


def _config(tmp_path, **over):
    data = {
        "seed": 3,
        "output_dir": "out",
        "catalog": {"synthetic": {"seed": 5, "n_issuers": 20, "bonds_per_issuer": 9}},
        "evaluation": {"drop_fractions": [0.4, 0.7]},
    }
    data.update(over)
    p = tmp_path / "run.yaml"
    p.write_text(yaml.safe_dump(data))
    return p


# -- config -------------------------------------------------------------------------

def test_default_config():
    cfg = load_run_config(None)
    assert [v.kind for v in cfg.variants] == [VariantKind.XEmbedding, VariantKind.OneHot]
    assert cfg.protocol().k == 5


def test_bundled_config_loads():
    cfg = load_run_config(BUNDLED)
    assert cfg.seed == 20241213
    assert cfg.protocol().drop_fractions == (0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85)
    assert cfg.protocol().fit_rcond == 0.01


@pytest.mark.parametrize("data, match", [
    ({"bogus": 1}, "unknown key"),
    ({"filters": {"currency": True}}, "unknown key"),
    ({"k": 0}, "k must be"),
    ({"weights": {"Colour": 1}}, "unknown feature"),
    ({"weights": {"IssuerIndustry": 0}}, "weights"),
    ({"variants": ["Magic"]}, "not one of"),
    ({"variants": []}, "nonempty"),
    ({"evaluation": {"sparsity_mode": "other"}}, "sparsity_mode"),
    ({"evaluation": {"drop_fractions": 0.5}}, "must be a list"),
    ({"evaluation": {"fit_rcond": "1e-2"}}, "fit_rcond"),
    ({"catalog": {"synthetic": {"n_issuers": -3}}}, "n_issuers"),
    ({"filters": {"maturity_lower_years": "x"}}, "filters"),
])
def test_config_errors(data, match):
    with pytest.raises(InvalidConfig, match=match):
        RunConfig.from_mapping(data)


def test_config_paths_are_relative_to_file(tmp_path):
    cfg = load_run_config(_config(tmp_path, catalog={"path": "c.csv"}))
    assert cfg.catalog_path == tmp_path / "c.csv"
    assert cfg.output_dir == tmp_path / "out"


# -- commands -----------------------------------------------------------------------

def test_generate_then_ingest(tmp_path, capsys):
    cfgp = _config(tmp_path)
    assert cli.main(["--config", str(cfgp), "generate"]) == 0
    out = tmp_path / "out"
    assert (out / "catalog.csv").exists() and (out / "embeddings.tsv").exists()
    capsys.readouterr()
    assert cli.main(["ingest", str(out / "catalog.csv")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n_issuers"] == 20 and summary["n_bonds"] == 180


def test_ingest_bundled_size(tmp_path, capsys):
    u = generate_synthetic_universe(SyntheticConfig(), seed=7)
    write_catalog(u.catalog, tmp_path / "c.csv")
    assert cli.main(["ingest", str(tmp_path / "c.csv")]) == 0
    assert json.loads(capsys.readouterr().out)["n_issuers"] == 250


def test_ingest_errors(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    u = generate_synthetic_universe(SyntheticConfig(n_issuers=2, bonds_per_issuer=2), seed=1)
    write_catalog(u.catalog, bad)
    lines = bad.read_text().splitlines()
    lines[2] = lines[2].replace(lines[2].split(",")[10], "-1")
    bad.write_text("\n".join(lines) + "\n")
    assert cli.main(["ingest", str(bad)]) == 1
    assert "row 3" in capsys.readouterr().err
    good = tmp_path / "good.csv"
    write_catalog(u.catalog, good)
    assert cli.main(["ingest", str(good), "--format", "json"]) == 1
    assert "ParseError" in capsys.readouterr().err


def test_search_clone_scores_one(tmp_path, capsys):
    u = generate_synthetic_universe(SyntheticConfig(n_issuers=5, bonds_per_issuer=3), seed=2)
    q = u.catalog.bonds[0]
    clone = replace(q, bond_id="ZZCLONE", issuer_id="CLONE")
    bonds = list(u.catalog) + [clone]
    write_catalog(bonds, tmp_path / "c.csv")
    cfgp = _config(tmp_path, catalog={"path": "c.csv"}, embeddings={"synthetic": {"dimension": 8}})
    assert cli.main(["--config", str(cfgp), "search", "--query", q.bond_id, "--k", "2"]) == 0
    rows = list(csv.DictReader((tmp_path / "out" / f"search_{q.bond_id}_XEmbedding.csv").open()))
    assert rows[0]["bond_id"] == "ZZCLONE"
    assert float(rows[0]["score"]) == pytest.approx(1.0, abs=1e-12)
    assert cli.main(["--config", str(cfgp), "search", "--query", q.bond_id, "--k", "500"]) == 0
    doc = json.loads((tmp_path / "out" / f"search_{q.bond_id}_XEmbedding.json").read_text())
    assert len(doc["neighbors"]) == len(bonds) - 1
    assert cli.main(["--config", str(cfgp), "search", "--query", "NOPE"]) == 1
    assert "UnknownBond" in capsys.readouterr().err


def test_augment_and_fit(tmp_path):
    cfgp = _config(tmp_path)
    assert cli.main(["--config", str(cfgp), "augment", "--issuer", "I003", "--n-drop", "4"]) == 0
    meta = json.loads((tmp_path / "out" / "augment_I003.json").read_text())
    assert len(meta["retained"]) == 5 and len(meta["dropped"]) == 4
    assert cli.main(["--config", str(cfgp), "fit", "--issuer", "I003", "--augment", "--n-drop", "4"]) == 0
    lines = (tmp_path / "out" / "curve_I003.csv").read_text().splitlines()
    assert lines[0] == "tau_years,spread_bps" and len(lines) == 121
    assert cli.main(["--config", str(cfgp), "fit", "--issuer", "NOPE"]) == 1


def test_evaluate_and_benchmark(tmp_path):
    cfgp = _config(tmp_path)
    assert cli.main(["--config", str(cfgp), "evaluate", "--variant", "OneHot"]) == 0
    assert (tmp_path / "out" / "evaluation" / "OneHot" / "trials.csv").exists()
    assert cli.main(["--config", str(cfgp), "--workers", "2", "benchmark"]) == 0
    bench = tmp_path / "out" / "benchmark"
    assert {p.name for p in bench.iterdir()} == {
        "00_XEmbedding", "01_OneHot", "comparison.csv", "comparison.json",
    }
    rows = json.loads((bench / "comparison.json").read_text())
    assert [r["variant"] for r in rows] == ["XEmbedding", "OneHot"]


def test_benchmark_with_oversized_drops_warns(tmp_path, caplog):
    cfgp = _config(tmp_path, evaluation={"drop_counts": [3, 30]})
    assert cli.main(["--config", str(cfgp), "benchmark"]) == 0
    assert "drop_too_large" in caplog.text


def test_missing_store_fails_before_trials(tmp_path, capsys):
    u = generate_synthetic_universe(SyntheticConfig(n_issuers=3, bonds_per_issuer=8), seed=2)
    write_catalog(u.catalog, tmp_path / "c.csv")
    cfgp = _config(tmp_path, catalog={"path": "c.csv"})
    # a catalog file without an embeddings section has no store
    assert cli.Workspace(load_run_config(cfgp)).store is None
    assert cli.main(["--config", str(cfgp), "benchmark"]) == 2
    assert "needs a vector store" in capsys.readouterr().err
    assert not (tmp_path / "out" / "benchmark").exists()
    cfgp = _config(tmp_path, catalog={"path": "c.csv"}, embeddings={"path": "missing.tsv"})
    assert cli.main(["--config", str(cfgp), "benchmark"]) == 1
    assert not (tmp_path / "out" / "benchmark").exists()


def test_project(tmp_path, capsys):
    cfgp = _config(tmp_path)
    assert cli.main(["--config", str(cfgp), "project", "--feature", "IssuerIdentity", "--reference", "ISSUER 001"]) == 0
    out = json.loads(capsys.readouterr().out)
    lines = Path(out["csv"]).read_text().splitlines()
    assert len(lines) == 1 + 20
    assert cli.main(["--config", str(cfgp), "project", "--feature", "IssuerIdentity", "--reference", "NOBODY"]) == 1


def test_project_first_dims_passthrough(tmp_path):
    (tmp_path / "v.tsv").write_text("IssuerIndustry\tA\t0.6,0.8\nIssuerIndustry\tB\t-1,0\n")
    cfgp = _config(tmp_path, embeddings={"path": "v.tsv"})
    assert cli.main(["--config", str(cfgp), "project", "--feature", "IssuerIndustry",
                     "--reference", "A", "--method", "first_dims"]) == 0
    rows = list(csv.DictReader((tmp_path / "out" / "projection_IssuerIndustry_A_first_dims.csv").open()))
    assert [(r["category"], float(r["x"]), float(r["y"])) for r in rows] == [("A", 0.6, 0.8), ("B", -1.0, 0.0)]


def test_config_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("seed: [1\n")
    assert cli.main(["--config", str(p), "generate"]) == 2
    assert cli.main(["--config", str(tmp_path / "absent.yaml"), "generate"]) == 2
    assert cli.main(["--workers", "0", "generate"]) == 2


def test_global_flags_after_subcommand(tmp_path):
    cfgp = _config(tmp_path)
    assert cli.main(["generate", "--config", str(cfgp), "--out", str(tmp_path / "elsewhere")]) == 0
    assert (tmp_path / "elsewhere" / "catalog.csv").exists()
    assert not (tmp_path / "out").exists()
