"""
Phase 2 agent package: decile and weight-bin parameter search
"""

from .selection import (
    DECILES,
    WeightProfile,
    candidate_grid,
    decile_feature_sets,
    explanation_intervals,
    interval_from_profile,
    threshold_distance,
    weight_bin_interval,
)
from .search import (
    DEFAULT_CANDIDATE_PS,
    BinSearchResult,
    DecileSearchResult,
    Phase2Validation,
    bin_size_search,
    decile_search,
    f1_from,
    search_curves,
    search_report,
    validate_phase2,
)

__all__ = [
    "DECILES",
    "DEFAULT_CANDIDATE_PS",
    "BinSearchResult",
    "DecileSearchResult",
    "Phase2Validation",
    "WeightProfile",
    "bin_size_search",
    "candidate_grid",
    "decile_feature_sets",
    "decile_search",
    "explanation_intervals",
    "f1_from",
    "interval_from_profile",
    "search_curves",
    "search_report",
    "threshold_distance",
    "validate_phase2",
    "weight_bin_interval",
]
