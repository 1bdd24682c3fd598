"""Command-line entry point: ``bondsim <command> [options]``.

Exit codes: 0 on success, 1 for validation or runtime errors, 2 for
configuration errors. All files go under the output directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .catalog import Catalog, FeatureName, load_catalog, sparsify_issuer, write_catalog
from .config import RunConfig, VariantSpec, load_run_config, parse_variant, parse_weights
from .curve import fit_ns, tenor_grid, write_curve_csv
from .embedding import VectorStore, load_vector_store, project_2d, synthetic_embeddings, write_vector_store
from .errors import BondSimError, InvalidConfig, UnknownBond, UnknownIssuer
from .evaluation import ModelVariant, augment_peers, benchmark, run_evaluation, trial_seed
from .filters import RatingScale
from .search import NumericalProfile
from .synthetic import generate_synthetic_universe, hierarchy_from_catalog

log = logging.getLogger("bondsim")


class Workspace:
    """Catalog, vector store and settings resolved from a run config."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._catalog: Catalog | None = None
        self._store: VectorStore | None = None
        self._loaded_store = False

    @property
    def catalog(self) -> Catalog:
        if self._catalog is None:
            cfg = self.cfg
            if cfg.catalog_path is not None:
                scale = RatingScale.from_file(cfg.rating_scale_path) if cfg.rating_scale_path else None
                self._catalog = load_catalog(cfg.catalog_path, cfg.catalog_format, scale)
            else:
                u = generate_synthetic_universe(cfg.synthetic, cfg.synthetic_seed)
                self._catalog = u.catalog
                if cfg.embeddings_path is None:
                    self._store, self._loaded_store = u.store, True
        return self._catalog

    @property
    def store(self) -> VectorStore | None:
        catalog = self.catalog
        if not self._loaded_store:
            cfg = self.cfg
            if cfg.embeddings_path is not None:
                self._store = load_vector_store(cfg.embeddings_path)
            elif cfg.synthetic_embeddings is not None:
                s = cfg.synthetic_embeddings
                self._store = synthetic_embeddings(
                    hierarchy_from_catalog(catalog), s.dimension, s.seed, s.epsilon, leaves_only=True
                )
            self._loaded_store = True
        return self._store

    def variant(self, spec: VariantSpec) -> ModelVariant:
        store = self.store if spec.kind.needs_store else None
        if spec.kind.needs_store and store is None:
            raise InvalidConfig(f"variant {spec.kind.value} needs a vector store (embeddings.path or embeddings.synthetic)")
        kw = {}
        if spec.weights is not None:
            kw["weights"] = parse_weights("variant weights", spec.weights)
        else:
            kw["weights"] = self.cfg.weights
        if spec.rules is not None:
            kw["rules"] = spec.rules
        if spec.profile is not None:
            kw["profile"] = NumericalProfile(spec.profile)
        return ModelVariant(spec.kind, store=store, shortlist_size=spec.shortlist_size, label=spec.label, **kw)

    def out(self, *parts: str) -> Path:
        p = self.cfg.output_dir.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p


def _variant_spec(ws: Workspace, name: str | None) -> VariantSpec:
    if name is None:
        return ws.cfg.variants[0]
    for spec in ws.cfg.variants:
        if (spec.label or spec.kind.value) == name:
            return spec
    return parse_variant(0, name)


def _issuer_of(catalog: Catalog, issuer_id: str) -> None:
    if issuer_id not in catalog.issuer_index:
        raise UnknownIssuer(f"unknown issuer {issuer_id!r}")


# -- commands -----------------------------------------------------------------------

def cmd_ingest(args, ws: Workspace) -> int:
    path = Path(args.path) if args.path else ws.cfg.catalog_path
    if path is None:
        raise InvalidConfig("ingest needs a catalog path (argument or catalog.path)")
    scale = RatingScale.from_file(args.rating_scale) if args.rating_scale else None
    if scale is None and ws.cfg.rating_scale_path:
        scale = RatingScale.from_file(ws.cfg.rating_scale_path)
    catalog = load_catalog(path, args.format or ws.cfg.catalog_format, scale)
    summary = {
        "path": str(path),
        "n_bonds": len(catalog),
        "n_issuers": len(catalog.issuers),
        "density": {str(k): v for k, v in sorted(catalog.density().items())},
        "observation_date": None if catalog.observation_date is None else catalog.observation_date.isoformat(),
    }
    print(json.dumps(summary, indent=2))
    return 0


def cmd_generate(args, ws: Workspace) -> int:
    u = generate_synthetic_universe(ws.cfg.synthetic, ws.cfg.synthetic_seed)
    write_catalog(u.catalog, ws.out("catalog.csv"))
    write_vector_store(u.store, ws.out("embeddings.tsv"))
    print(json.dumps({"catalog": str(ws.out("catalog.csv")), "embeddings": str(ws.out("embeddings.tsv")),
                      "n_bonds": len(u.catalog), "n_issuers": len(u.catalog.issuers)}, indent=2))
    return 0


def cmd_search(args, ws: Workspace) -> int:
    catalog = ws.catalog
    if args.query not in catalog:
        raise UnknownBond(f"unknown bond {args.query!r}")
    query = catalog.get(args.query)
    variant = ws.variant(_variant_spec(ws, args.variant))
    res = variant.rank(query, catalog, args.k or ws.cfg.k, exclude_issuer=args.exclude_issuer)
    stem = f"search_{_slug(args.query)}_{_slug(variant.name)}"
    res.write(ws.out(stem + ".json"), ws.out(stem + ".csv"))
    print(json.dumps({"query_id": query.bond_id, "variant": variant.name, "n": len(res),
                      "json": str(ws.out(stem + ".json")), "csv": str(ws.out(stem + ".csv"))}, indent=2))
    return 0


def _augmented(ws: Workspace, args):
    catalog = ws.catalog
    _issuer_of(catalog, args.issuer)
    variant = ws.variant(_variant_spec(ws, args.variant))
    outcome = sparsify_issuer(catalog, args.issuer, args.n_drop, trial_seed(ws.cfg.seed, args.issuer, args.n_drop))
    queries = [outcome.sparse_catalog.get(b) for b in outcome.retained]
    peers = augment_peers(outcome.sparse_catalog, queries, variant, ws.cfg.filters, args.k or ws.cfg.k)
    return outcome, queries, peers, variant


def cmd_augment(args, ws: Workspace) -> int:
    outcome, queries, peers, variant = _augmented(ws, args)
    stem = f"augment_{_slug(args.issuer)}"
    write_catalog(queries + peers, ws.out(stem + ".csv"))
    meta = {
        "issuer_id": args.issuer,
        "variant": variant.name,
        "retained": list(outcome.retained),
        "dropped": list(outcome.dropped),
        "peers": [p.bond_id for p in peers],
    }
    ws.out(stem + ".json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    print(json.dumps({**meta, "csv": str(ws.out(stem + ".csv"))}, indent=2))
    return 0


def cmd_fit(args, ws: Workspace) -> int:
    catalog = ws.catalog
    _issuer_of(catalog, args.issuer)
    if args.augment:
        _, queries, peers, _ = _augmented(ws, args)
        bonds = queries + peers
    else:
        bonds = list(catalog.issuer_bonds(args.issuer))
    fit = fit_ns([(b.maturity_years, b.spread_bps) for b in bonds], rcond=ws.cfg.protocol().fit_rcond)
    grid = tenor_grid(args.grid_start, args.grid_stop, args.grid_points)
    stem = f"curve_{_slug(args.issuer)}"
    write_curve_csv(fit.params, ws.out(stem + ".csv"), grid)
    info = {"issuer_id": args.issuer, "bond_ids": [b.bond_id for b in bonds], **fit.as_dict()}
    ws.out(stem + ".json").write_text(json.dumps(info, indent=2) + "\n", encoding="utf-8")
    print(json.dumps({**fit.as_dict(), "csv": str(ws.out(stem + ".csv"))}, indent=2))
    return 0


def _warn_failures(report) -> None:
    failed = report.summary["n_trials"] - report.summary["n_ok"]
    if failed:
        log.warning("%s: %d of %d trials failed %s", report.variant.name, failed,
                    report.summary["n_trials"], report.summary["status_counts"])


def cmd_evaluate(args, ws: Workspace) -> int:
    variant = ws.variant(_variant_spec(ws, args.variant))
    protocol = ws.cfg.protocol()
    report = run_evaluation(ws.catalog, variant, protocol, ws.cfg.seed, workers=ws.cfg.workers)
    _warn_failures(report)
    target = ws.cfg.output_dir / "evaluation" / _slug(variant.name)
    report.write(target)
    print(json.dumps({"variant": variant.name, "output": str(target), **report.summary}, indent=2))
    return 0


def cmd_benchmark(args, ws: Workspace) -> int:
    if len(ws.cfg.variants) < 2:
        raise InvalidConfig("benchmark needs at least two variants in the config")
    variants = [ws.variant(s) for s in ws.cfg.variants]  # fail fast before any trial
    result = benchmark(ws.catalog, variants, ws.cfg.protocol(), ws.cfg.seed, workers=ws.cfg.workers)
    for r in result.reports:
        _warn_failures(r)
    target = ws.cfg.output_dir / "benchmark"
    result.write(target)
    print(json.dumps({"output": str(target), "comparison": result.comparison()}, indent=2))
    return 0


def cmd_project(args, ws: Workspace) -> int:
    store = ws.store
    if store is None:
        raise InvalidConfig("project needs a vector store (embeddings.path or embeddings.synthetic)")
    feature = FeatureName.parse(args.feature)
    proj = project_2d(store, feature, args.reference, args.method)
    path = ws.out(f"projection_{feature.value}_{_slug(proj.reference)}_{args.method}.csv")
    proj.write_csv(path)
    print(json.dumps({"feature": feature.value, "reference": proj.reference, "n": len(proj.points),
                      "csv": str(path)}, indent=2))
    return 0


def _slug(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


# -- argument parsing ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    def add_common(parser, default):
        parser.add_argument("--config", default=default, help="YAML run configuration")
        parser.add_argument("--seed", type=int, default=default, help="run seed (overrides the config)")
        parser.add_argument("--out", default=default, help="output directory (overrides the config)")
        parser.add_argument("--workers", type=int, default=default, help="worker threads for evaluation")
        parser.add_argument("--verbose", "-v", action="store_true", default=default or False,
                            help="log progress to stderr")

    # global flags may appear before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    add_common(common, argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="bondsim", description="Bond similarity search and spread-curve benchmarks.")
    add_common(p, None)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", parents=[common], help="validate and summarise a catalog")
    s.add_argument("path", nargs="?", help="catalog file (defaults to catalog.path)")
    s.add_argument("--format", choices=("csv", "json"))
    s.add_argument("--rating-scale", help="plain-text rating scale, best first")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("generate", parents=[common], help="write the synthetic catalog and embeddings")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("search", parents=[common], help="rank peers of one bond")
    s.add_argument("--query", required=True, help="query bond id")
    s.add_argument("--k", type=int)
    s.add_argument("--variant", help="variant kind or configured label")
    s.add_argument("--exclude-issuer", action="store_true", help="skip bonds of the query's own issuer")
    s.set_defaults(func=cmd_search)

    for name, func, text in (("augment", cmd_augment, "sparsify an issuer and write its augmented bonds"),
                             ("fit", cmd_fit, "fit a Nelson-Siegel curve for one issuer")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--issuer", required=True)
        s.add_argument("--n-drop", type=int, default=0, help="bonds to hold out before augmenting")
        s.add_argument("--k", type=int)
        s.add_argument("--variant")
        if name == "fit":
            s.add_argument("--augment", action="store_true", help="fit the augmented set instead of the full issuer")
            s.add_argument("--grid-start", type=float, default=0.25)
            s.add_argument("--grid-stop", type=float, default=30.0)
            s.add_argument("--grid-points", type=int, default=120)
        s.set_defaults(func=func)

    s = sub.add_parser("evaluate", parents=[common], help="run the sparsity evaluation for one variant")
    s.add_argument("--variant")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("benchmark", parents=[common], help="evaluate every configured variant")
    s.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("project", parents=[common], help="2-D projection of one feature's embeddings")
    s.add_argument("--feature", required=True)
    s.add_argument("--reference", required=True)
    s.add_argument("--method", choices=("pca", "first_dims"), default="pca")
    s.set_defaults(func=cmd_project)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_run_config(args.config)
        overrides = {}
        if args.seed is not None:
            if args.seed < 0:
                raise InvalidConfig("--seed must be nonnegative")
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["output_dir"] = Path(args.out)
        if args.workers is not None:
            if args.workers < 1:
                raise InvalidConfig("--workers must be >= 1")
            overrides["workers"] = args.workers
        cfg = replace(cfg, **overrides)
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    ws = Workspace(cfg)
    try:
        return args.func(args, ws)
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BondSimError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        for line in getattr(exc, "diagnostics", [])[1:]:
            print(f"  {line}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
