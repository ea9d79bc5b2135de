"""
Models agent package

White-box decision trees, black-box gradient-boosted ensembles, path
introspection and accuracy metrics.
"""

from .metrics import AccuracyReport, eval_accuracy, training_loss
from .training import CartParams, GbtParams, fit_cart, fit_gbt
from .trees import (
    DecisionPath,
    DecisionTree,
    Direction,
    Leaf,
    Model,
    PathStep,
    Split,
    TreeEnsemble,
    class_output,
    decision_path,
    load_model,
    model_from_dict,
    model_summary,
    model_to_dict,
    path_intervals,
    predict,
    predict_margin,
    predict_rows,
    predicted_class_output,
    save_model,
    true_features,
)

__all__ = [
    "AccuracyReport",
    "CartParams",
    "DecisionPath",
    "DecisionTree",
    "Direction",
    "GbtParams",
    "Leaf",
    "Model",
    "PathStep",
    "Split",
    "TreeEnsemble",
    "class_output",
    "decision_path",
    "eval_accuracy",
    "fit_cart",
    "fit_gbt",
    "load_model",
    "model_from_dict",
    "model_summary",
    "model_to_dict",
    "path_intervals",
    "predict",
    "predict_margin",
    "predict_rows",
    "predicted_class_output",
    "save_model",
    "training_loss",
]
