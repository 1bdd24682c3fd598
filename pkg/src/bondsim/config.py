"""Run configuration: a YAML file validated against a fixed schema.

Every section is optional. Unknown keys anywhere are an error, and values
are checked before any pipeline work starts. See README.md for the full
schema with defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .catalog import FeatureName
from .errors import InvalidConfig, InvalidWeights
from .evaluation import VariantKind
from .filters import FilterConfig
from .search import FeatureWeights
from .synthetic import BUNDLED_SEED, SyntheticConfig

TOP_LEVEL = ("seed", "output_dir", "workers", "catalog", "embeddings", "weights", "filters", "k", "variants", "evaluation")
CATALOG_KEYS = ("path", "format", "rating_scale", "synthetic")
SYNTHETIC_KEYS = (
    "seed", "n_issuers", "bonds_per_issuer", "n_supersectors", "sectors_per_supersector", "groups_per_sector",
    "subgroups_per_group", "n_regions", "embedding_dim", "epsilon", "noise_bps", "foreign_usd_share",
)
EMBEDDING_KEYS = ("path", "synthetic")
SYNTHETIC_EMBEDDING_KEYS = ("dimension", "epsilon", "seed")
FILTER_KEYS = tuple(f.name for f in dataclasses.fields(FilterConfig))
EVALUATION_KEYS = ("min_bonds", "drop_fractions", "drop_counts", "n_bins", "sparsity_mode", "rmse_mode", "fit_rcond")
VARIANT_KEYS = ("kind", "label", "weights", "shortlist_size", "rules", "profile")


def _check_keys(section: str, data: Any, allowed: tuple[str, ...]) -> dict:
    if data is None:
        return {}
    if not isinstance(data, Mapping):
        raise InvalidConfig(f"{section} must be a mapping, got {type(data).__name__}")
    unknown = sorted(set(map(str, data)) - set(allowed))
    if unknown:
        raise InvalidConfig(f"unknown key(s) in {section}: {', '.join(unknown)}")
    return dict(data)


def _int(section: str, value: Any, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvalidConfig(f"{section} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise InvalidConfig(f"{section} must be >= {minimum}, got {value}")
    return value


@dataclass(frozen=True)
class VariantSpec:
    kind: VariantKind
    label: str | None = None
    weights: dict | None = None
    shortlist_size: int | None = None
    rules: tuple | None = None
    profile: tuple[str, ...] | None = None


@dataclass(frozen=True)
class SyntheticEmbeddingSpec:
    dimension: int = 16
    epsilon: float = 0.3
    seed: int = BUNDLED_SEED


@dataclass(frozen=True)
class RunConfig:
    seed: int = BUNDLED_SEED
    output_dir: Path = Path("out")
    workers: int = 1
    catalog_path: Path | None = None
    catalog_format: str | None = None
    rating_scale_path: Path | None = None
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    synthetic_seed: int = BUNDLED_SEED
    embeddings_path: Path | None = None
    synthetic_embeddings: SyntheticEmbeddingSpec | None = None
    weights: FeatureWeights = field(default_factory=FeatureWeights)
    filters: FilterConfig = field(default_factory=FilterConfig)
    k: int = 5
    variants: tuple[VariantSpec, ...] = (VariantSpec(VariantKind.XEmbedding), VariantSpec(VariantKind.OneHot))
    evaluation: dict = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, data: Any, base_dir: Path | None = None) -> "RunConfig":
        top = _check_keys("config", data, TOP_LEVEL)
        base = base_dir or Path(".")
        kw: dict[str, Any] = {}

        def path(v):
            if v is None:
                return None
            if not isinstance(v, str) or not v:
                raise InvalidConfig(f"expected a path string, got {v!r}")
            p = Path(v)
            return p if p.is_absolute() else base / p

        if "seed" in top:
            kw["seed"] = _int("seed", top["seed"], 0)
        if "output_dir" in top:
            kw["output_dir"] = path(top["output_dir"])
        if "workers" in top:
            kw["workers"] = _int("workers", top["workers"], 1)
        if "k" in top:
            kw["k"] = _int("k", top["k"], 1)

        cat = _check_keys("catalog", top.get("catalog"), CATALOG_KEYS)
        kw["catalog_path"] = path(cat.get("path"))
        fmt = cat.get("format")
        if fmt is not None and fmt not in ("csv", "json"):
            raise InvalidConfig(f"catalog.format must be csv or json, got {fmt!r}")
        kw["catalog_format"] = fmt
        kw["rating_scale_path"] = path(cat.get("rating_scale"))
        syn = _check_keys("catalog.synthetic", cat.get("synthetic"), SYNTHETIC_KEYS)
        if "seed" in syn:
            kw["synthetic_seed"] = _int("catalog.synthetic.seed", syn.pop("seed"), 0)
        try:
            kw["synthetic"] = SyntheticConfig(**syn)
        except TypeError as exc:
            raise InvalidConfig(f"catalog.synthetic: {exc}") from None

        emb = _check_keys("embeddings", top.get("embeddings"), EMBEDDING_KEYS)
        kw["embeddings_path"] = path(emb.get("path"))
        if emb.get("synthetic") is not None:
            spec = _check_keys("embeddings.synthetic", emb["synthetic"], SYNTHETIC_EMBEDDING_KEYS)
            try:
                s = SyntheticEmbeddingSpec(**spec)
            except TypeError as exc:
                raise InvalidConfig(f"embeddings.synthetic: {exc}") from None
            _int("embeddings.synthetic.dimension", s.dimension, 2)
            _int("embeddings.synthetic.seed", s.seed, 0)
            if not isinstance(s.epsilon, (int, float)) or s.epsilon < 0:
                raise InvalidConfig("embeddings.synthetic.epsilon must be a nonnegative number")
            kw["synthetic_embeddings"] = s

        if top.get("weights") is not None:
            kw["weights"] = parse_weights("weights", top["weights"])

        flt = _check_keys("filters", top.get("filters"), FILTER_KEYS)
        try:
            kw["filters"] = FilterConfig(**flt)
        except TypeError as exc:
            raise InvalidConfig(f"filters: {exc}") from None

        if "variants" in top:
            raw = top["variants"]
            if not isinstance(raw, list) or not raw:
                raise InvalidConfig("variants must be a nonempty list")
            kw["variants"] = tuple(parse_variant(i, v) for i, v in enumerate(raw))

        ev = _check_keys("evaluation", top.get("evaluation"), EVALUATION_KEYS)
        kw["evaluation"] = ev
        cfg = cls(**kw)
        cfg.protocol()  # validate eagerly
        return cfg

    def protocol(self):
        from .evaluation import Protocol

        ev = dict(self.evaluation)
        for key in ("drop_fractions", "drop_counts"):
            if ev.get(key) is not None:
                if not isinstance(ev[key], list):
                    raise InvalidConfig(f"evaluation.{key} must be a list")
                ev[key] = tuple(ev[key])
        try:
            return Protocol(k=self.k, filters=self.filters, **ev)
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(f"evaluation: {exc}") from None


def parse_weights(section: str, data: Any) -> FeatureWeights:
    if not isinstance(data, Mapping):
        raise InvalidConfig(f"{section} must map feature names to numbers")
    out = {}
    for k, v in data.items():
        try:
            f = FeatureName.parse(str(k))
        except ValueError:
            raise InvalidConfig(f"unknown feature {k!r} in {section}") from None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise InvalidConfig(f"{section}.{k} must be a number")
        out[f] = float(v)
    try:
        return FeatureWeights(out)
    except InvalidWeights as exc:
        raise InvalidConfig(f"{section}: {exc}") from None


def parse_variant(i: int, data: Any) -> VariantSpec:
    if isinstance(data, str):
        data = {"kind": data}
    spec = _check_keys(f"variants[{i}]", data, VARIANT_KEYS)
    if "kind" not in spec:
        raise InvalidConfig(f"variants[{i}] needs a kind")
    try:
        kind = VariantKind(spec["kind"])
    except ValueError:
        names = ", ".join(k.value for k in VariantKind)
        raise InvalidConfig(f"variants[{i}].kind {spec['kind']!r} is not one of {names}") from None
    weights = None
    if spec.get("weights") is not None:
        parse_weights(f"variants[{i}].weights", spec["weights"])
        weights = dict(spec["weights"])
    m = spec.get("shortlist_size")
    if m is not None:
        _int(f"variants[{i}].shortlist_size", m, 1)
    rules = spec.get("rules")
    if rules is not None:
        if not isinstance(rules, list) or not rules:
            raise InvalidConfig(f"variants[{i}].rules must be a nonempty list")
        rules = tuple(tuple(r) if isinstance(r, list) else r for r in rules)
    profile = spec.get("profile")
    if profile is not None:
        if not isinstance(profile, list) or not profile:
            raise InvalidConfig(f"variants[{i}].profile must be a nonempty list")
        bad = [p for p in profile if p not in ("maturity_years", "rating")]
        if bad:
            raise InvalidConfig(f"variants[{i}].profile has unknown field(s) {bad}")
        profile = tuple(profile)
    label = spec.get("label")
    if label is not None and not isinstance(label, str):
        raise InvalidConfig(f"variants[{i}].label must be a string")
    return VariantSpec(kind, label, weights, m, rules, profile)


def load_run_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {p}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InvalidConfig(f"config {p} is not valid YAML: {exc}") from None
    return RunConfig.from_mapping(data or {}, p.parent)
