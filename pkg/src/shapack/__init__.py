"""Shapley attributions, variance importance and feature packing for tree ensembles and GLMs."""
from .attribution import ShapMatrix, conditional_expectation, explain, glm_shap, shapley_bruteforce, tree_shap
from .dataset import Dataset, Schema, StandardizationStats, load_csv, one_hot_encode, standardize
from .importance import (
    ImportanceReport,
    beta_importance,
    gain_importance,
    l1_importance,
    rank,
    variance_importance,
)
from .model import GlmModel, Tree, TreeEnsemble, TreeNode, parse_model, predict_margin, predict_proba, route, serialize_model
from .packing import FeatureGroup, grouped_importance, pack, shap_covariance, suggest_groups

__version__ = "0.1.0"

__all__ = [
    "Dataset", "FeatureGroup", "GlmModel", "ImportanceReport", "Schema", "ShapMatrix",
    "StandardizationStats", "Tree", "TreeEnsemble", "TreeNode",
    "beta_importance", "conditional_expectation", "explain", "gain_importance", "glm_shap",
    "grouped_importance", "l1_importance", "load_csv", "one_hot_encode", "pack", "parse_model",
    "predict_margin", "predict_proba", "rank", "route", "serialize_model", "shap_covariance",
    "shapley_bruteforce", "standardize", "suggest_groups", "tree_shap", "variance_importance",
]
