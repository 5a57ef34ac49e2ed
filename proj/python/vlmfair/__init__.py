"""Pareto-optimal debiasing of vision-language embeddings."""

from ._core import (
    DEFAULT_EPS_DEG,
    DEFAULT_RANK_TOLERANCE,
    AttributeSubspace,
    VlmfairError,
    build_subspace,
    closed_form_alpha,
    debias,
    debias_rows,
    eo_violations,
    f1_scores,
    full_projection,
    load_embeddings,
    load_subspace,
    max_skew,
    oracle_alpha,
    pareto_point,
    recall_at_k,
    run_cli,
    save_subspace,
    self_utility_cross_bound,
    sha256_hex,
    spherical_mean,
    statistical_parity,
    subspace_from_basis,
)

__all__ = [name for name in dir() if not name.startswith("_")]
