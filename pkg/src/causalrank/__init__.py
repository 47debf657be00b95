"""Causal structure discovery between predictors and a binary outcome.

Binary labels become continuous likelihood scores, structure is learned with
DirectLiNGAM and NOTEARS-MLP, and the resulting cause/effect strengths are
compared with classifier importances and plain correlations.
"""

from .analysis import concordance, extract_cause_effect, pearson, rank_by_score, spearman
from .data import Dataset, impute_median, load_csv, load_schema, standardize
from .errors import CausalRankError
from .likelihood import augment_with_likelihood, train_likelihood_mlp
from .lingam import fit_lingam
from .mlmodels import cross_validated_importance
from .notears import fit_notears_mlp

__version__ = "0.1.0"

__all__ = [
    "CausalRankError",
    "Dataset",
    "augment_with_likelihood",
    "concordance",
    "cross_validated_importance",
    "extract_cause_effect",
    "fit_lingam",
    "fit_notears_mlp",
    "impute_median",
    "load_csv",
    "load_schema",
    "pearson",
    "rank_by_score",
    "spearman",
    "standardize",
    "train_likelihood_mlp",
]
