"""
Explanation-derived feature sets and value ranges

Decile feature sets pick the most heavily weighted features of one
explanation. Weight bins recover a relevant value range from a weight-only
explanation by scanning the feature's value grid for similar weights.
"""

import math
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from agents.explainers.base import BaseExplainer, Explanation
from agents.tabular.dataset import FeatureSchema
from shared.utils.exceptions import ExplainerError
from shared.utils.reporting import Interval

DECILES = tuple(range(1, 10))


def decile_feature_sets(explanation: Explanation) -> List[frozenset]:
    """
    Cumulative top-decile feature sets of one explanation

    set_d holds the nonzero-weight features whose |weight| reaches the
    (100 - 10d)th percentile of the nonzero |weights|, for d = 1..9; the sets
    are nested.
    """
    weights = explanation.abs_weights
    nonzero = weights[weights != 0]
    if nonzero.size == 0:
        raise ExplainerError("Decile feature sets need at least one nonzero weight")
    sets = []
    for d in DECILES:
        threshold = np.percentile(nonzero, 100 - 10 * d)
        sets.append(frozenset(int(f) for f in np.flatnonzero((weights >= threshold) & (weights != 0))))
    return sets


def candidate_grid(x_value: float, feature: FeatureSchema, grid_points: int = 100) -> np.ndarray:
    """Evenly spaced values over the observed range plus x's own value, sorted"""
    grid = np.linspace(feature.observed_min, feature.observed_max, grid_points)
    return np.unique(np.append(grid, x_value))


def interval_from_profile(candidates: Sequence[float], weights: Sequence[float], reference_weight: float,
                          x_value: float, p: float, feature: FeatureSchema) -> Interval:
    """
    Value range whose weights stay within ±p of the reference weight

    Args:
        candidates: Candidate values of the feature
        weights: Weight of the feature at each candidate
        reference_weight: Weight at x's own value
        x_value: x's value of the feature, always part of the range
        p: Relative bin size, 0 < p < 1
        feature: Schema entry of the feature

    Returns:
        (min, max) of the qualifying values; the observed range when the reference weight is 0
    """
    if not 0.0 < p < 1.0:
        raise ExplainerError(f"Bin size must be strictly between 0 and 1, got {p}")
    if reference_weight == 0:
        return feature.observed_min, feature.observed_max
    candidates = np.asarray(candidates, dtype=float)
    weights = np.asarray(weights, dtype=float)
    qualifying = candidates[np.abs(weights - reference_weight) <= p * abs(reference_weight)]
    qualifying = np.append(qualifying, x_value)
    return float(qualifying.min()), float(qualifying.max())


class WeightProfile:
    """Weights of one feature over its candidate grid, reusable for any bin size"""

    def __init__(self, explainer: BaseExplainer, x: np.ndarray, feature: int, schema: FeatureSchema,
                 grid_points: int = 100, seed: int = 0):
        self.feature = feature
        self.schema = schema
        self.x_value = float(x[feature])
        self.candidates = candidate_grid(self.x_value, schema, grid_points)
        self.weights = explainer.feature_weight_profile(x, feature, self.candidates, seed)
        self.reference_weight = float(self.weights[int(np.searchsorted(self.candidates, self.x_value))])

    def interval(self, p: float) -> Interval:
        return interval_from_profile(self.candidates, self.weights, self.reference_weight,
                                     self.x_value, p, self.schema)


def weight_bin_interval(explainer: BaseExplainer, x: Sequence[float], feature: int, p: float,
                        schema: Sequence[FeatureSchema], grid_points: int = 100, seed: int = 0) -> Interval:
    """
    Range of values of one feature that give x a similar weight for it

    Binary features return the degenerate interval at x's value.
    """
    x = np.asarray(x, dtype=float)
    if schema[feature].is_binary:
        return float(x[feature]), float(x[feature])
    return WeightProfile(explainer, x, feature, schema[feature], grid_points, seed).interval(p)


def _clamp(interval: Interval, feature: FeatureSchema) -> Interval:
    lo, hi = interval
    lo = feature.observed_min if math.isinf(lo) else lo
    hi = feature.observed_max if math.isinf(hi) else hi
    return lo, hi


def threshold_distance(expl_iv: Mapping[int, Interval], tree_iv: Mapping[int, Interval],
                       schema: Sequence[FeatureSchema]) -> Optional[float]:
    """
    Mean normalized bound distance over the features both maps share

    Infinite bounds are clamped to the observed range; features with a zero
    observed range are skipped. None when no feature is usable.
    """
    distances = []
    for f in sorted(set(expl_iv) & set(tree_iv)):
        value_range = schema[f].value_range
        if value_range == 0:
            continue
        lo_e, hi_e = _clamp(expl_iv[f], schema[f])
        lo_t, hi_t = _clamp(tree_iv[f], schema[f])
        distances.append((abs(lo_e - lo_t) + abs(hi_e - hi_t)) / (2 * value_range))
    return float(np.mean(distances)) if distances else None


def explanation_intervals(explanation: Explanation, features: Sequence[int], explainer: BaseExplainer,
                          x: np.ndarray, schema: Sequence[FeatureSchema], optimal_p: Optional[float],
                          grid_points: int = 100, seed: int = 0) -> Dict[int, Interval]:
    """
    Relevant value range of each selected feature

    Intervals carried by the explanation are used as they are; weight-only
    explanations get weight-bin intervals at bin size optimal_p.
    """
    if explanation.intervals is not None:
        return {f: explanation.intervals[f] for f in sorted(features)}
    if optimal_p is None:
        raise ExplainerError("A bin size is needed to derive intervals from a weight-only explanation")
    return {
        f: weight_bin_interval(explainer, x, f, optimal_p, schema, grid_points, seed)
        for f in sorted(features)
    }
