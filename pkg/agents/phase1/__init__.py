"""
Phase 1 agent package: white-box agreement metrics
"""

from .white_box import (
    EMPTY_DECISION_PATH,
    EMPTY_EXPLANATION_FEATURES,
    Phase1Record,
    Phase1Report,
    evaluate_instance,
    feature_precision,
    feature_recall,
    recall_sample_size,
    run_phase1,
    summarize_phase1,
    top_n_features,
    top_quartile_features,
)

__all__ = [
    "EMPTY_DECISION_PATH",
    "EMPTY_EXPLANATION_FEATURES",
    "Phase1Record",
    "Phase1Report",
    "evaluate_instance",
    "feature_precision",
    "feature_recall",
    "recall_sample_size",
    "run_phase1",
    "summarize_phase1",
    "top_n_features",
    "top_quartile_features",
]
