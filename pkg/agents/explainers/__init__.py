"""
Explainers agent package

A local surrogate explainer, an exact tree Shapley explainer, a brute-force
Shapley oracle and explanation averaging.
"""

from .base import (
    BaseExplainer,
    Explanation,
    ExplainerConfig,
    ExplainerKind,
    average_explanations,
    build_explainer,
)
from .surrogate import SurrogateExplainer, explain_surrogate
from .tree_shapley import TreeShapleyExplainer, brute_force_shapley, explain_tree_shapley

__all__ = [
    "BaseExplainer",
    "Explanation",
    "ExplainerConfig",
    "ExplainerKind",
    "SurrogateExplainer",
    "TreeShapleyExplainer",
    "average_explanations",
    "brute_force_shapley",
    "build_explainer",
    "explain_surrogate",
    "explain_tree_shapley",
]
