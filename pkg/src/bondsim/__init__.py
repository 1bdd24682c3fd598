"""Bond similarity search, peer augmentation and spread-curve benchmarks."""

from .catalog import Bond, Catalog, FeatureName, load_catalog, sparsify_issuer, write_catalog
from .curve import CurveFit, NSParams, fit_ns, mape, ns_spread, rmse
from .embedding import VectorStore, cosine_similarity, load_vector_store, project_2d, synthetic_embeddings
from .errors import BondSimError
from .evaluation import (
    EvaluationReport,
    ModelVariant,
    Protocol,
    VariantKind,
    benchmark,
    run_evaluation,
    run_trial,
    sparsity_metric,
)
from .filters import FilterConfig, RatingScale, apply_filters
from .search import FeatureWeights, SimilarityResult, exhaustive_oracle, one_hot_top_k, top_k
from .synthetic import bundled_universe, generate_synthetic_universe

__version__ = "0.1.0"

__all__ = [
    "Bond", "BondSimError", "Catalog", "CurveFit", "EvaluationReport", "FeatureName", "FeatureWeights",
    "FilterConfig", "ModelVariant", "NSParams", "Protocol", "RatingScale", "SimilarityResult", "VariantKind",
    "VectorStore", "apply_filters", "benchmark", "bundled_universe", "cosine_similarity", "exhaustive_oracle",
    "fit_ns", "generate_synthetic_universe", "load_catalog", "load_vector_store", "mape", "ns_spread",
    "one_hot_top_k", "project_2d", "rmse", "run_evaluation", "run_trial", "sparsify_issuer", "sparsity_metric",
    "synthetic_embeddings", "top_k", "write_catalog",
]
