"""Offline basis construction and online reduced solves."""

from .basis import (
    BasisBuilder,
    ReducedBasis,
    build_basis,
    gram_schmidt,
    supremizer_enrich,
)
from .greedy import (
    Estimator,
    TruthCache,
    estimate,
    exact_error,
    inf_sup_lower_bound,
    saddle_inf_sup,
    weighted_greedy,
)
from .pod import correlation_matrix, weighted_pod
from .reduced import (
    ReducedModel,
    ReducedSolution,
    load_reduced_model,
    online_solve,
    project,
    project_truth,
    reconstruct,
    save_reduced_model,
)

__all__ = [
    "BasisBuilder", "ReducedBasis", "build_basis", "gram_schmidt", "supremizer_enrich",
    "Estimator", "TruthCache", "estimate", "exact_error", "inf_sup_lower_bound",
    "saddle_inf_sup", "weighted_greedy", "correlation_matrix", "weighted_pod",
    "ReducedModel", "ReducedSolution", "load_reduced_model", "online_solve", "project",
    "project_truth", "reconstruct", "save_reduced_model",
]
