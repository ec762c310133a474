"""Consensus clustering for thresholded biomarker cohorts.

Imputation, four clustering engines, six validity indices, rank-aggregated
choice of k, cross-engine consensus and cluster characterisation.
"""
__version__ = "0.1.0"

from .consensus import adjusted_rand_index, align_labels, build_consensus
from .datamodel import (
    AttributeSpec,
    Dataset,
    ImputationPlan,
    drop_patients_by_missingness,
    filter_attributes,
    impute,
    load_dataset,
    missingness_profile,
    subset_by_tnm,
)
from .engines import Matrix, Partition, fuzzy_cmeans, harden, hierarchical, kmeans, pam, prepare_matrix
from .kernels import BACKEND
from .selection import aggregate, rank_candidates, select_k
from .synth import SyntheticSpec, generate
from .validity import index_sweep, optimal_k_per_index, scatter

__all__ = [
    "AttributeSpec", "BACKEND", "Dataset", "ImputationPlan", "Matrix", "Partition", "SyntheticSpec",
    "adjusted_rand_index", "aggregate", "align_labels", "build_consensus", "drop_patients_by_missingness",
    "filter_attributes", "fuzzy_cmeans", "generate", "harden", "hierarchical", "impute", "index_sweep",
    "kmeans", "load_dataset", "missingness_profile", "optimal_k_per_index", "pam", "prepare_matrix",
    "rank_candidates", "scatter", "select_k", "subset_by_tnm",
]
