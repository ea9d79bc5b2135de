"""
White-box-guided parameter search

Finds the decile range whose explanation features best agree with the
tree's path features, and the weight-bin size whose recovered value ranges
lie closest to the tree's path intervals. The chosen parameters are then
validated on the white box.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from agents.explainers.base import BaseExplainer
from agents.models.trees import DecisionTree, path_intervals, true_features
from agents.phase1.white_box import Phase1Report, feature_precision, feature_recall, run_phase1
from agents.phase2.selection import DECILES, WeightProfile, decile_feature_sets, threshold_distance
from agents.tabular.dataset import Dataset
from shared.utils.exceptions import ExplainerError, SearchError
from shared.utils.execution import derive_seed, map_instances

logger = logging.getLogger("fidelity_agents.phase2")

DEFAULT_CANDIDATE_PS = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)

EMPTY_DECISION_PATH = "empty_decision_path"
EMPTY_EXPLANATION = "empty_explanation"
NO_COMPARABLE_FEATURES = "no_comparable_features"


@dataclass(frozen=True)
class DecileSearchResult:
    per_d_scores: Dict[int, float]
    optimal_d: int
    skipped: Dict[str, int] = field(default_factory=dict)
    evaluated: int = 0


@dataclass(frozen=True)
class BinSearchResult:
    per_p_distances: Dict[float, float]
    optimal_p: float
    skipped: Dict[str, int] = field(default_factory=dict)
    evaluated: int = 0


def f1_from(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0"""
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _decile_instance(item: Tuple[int, np.ndarray], tree: DecisionTree, explainer: BaseExplainer,
                     seed: int) -> Tuple[Optional[List[float]], Optional[str]]:
    instance_id, x = item
    true_f = true_features(tree, x)
    if not true_f:
        return None, EMPTY_DECISION_PATH
    explanation = explainer.explain_repeated(x, derive_seed(seed, instance_id))
    if explanation.is_zero:
        return None, EMPTY_EXPLANATION
    scores = []
    for expl_f in decile_feature_sets(explanation):
        scores.append(f1_from(feature_precision(true_f, expl_f), feature_recall(true_f, expl_f)))
    return scores, None


def decile_search(tree: DecisionTree, explainer: BaseExplainer, eval_set: Dataset, seed: int = 0,
                  jobs: Optional[int] = 1) -> DecileSearchResult:
    """
    Mean F1 of each cumulative decile feature set against the path features

    Args:
        tree: White-box tree
        explainer: Explainer bound to the tree
        eval_set: Instances to evaluate
        seed: Run seed
        jobs: Worker count

    Returns:
        Per-d mean F1 and the smallest d attaining the maximum
    """
    worker = partial(_decile_instance, tree=tree, explainer=explainer, seed=seed)
    outcomes = map_instances(worker, list(enumerate(eval_set.rows)), jobs=jobs, desc="decile search")
    scores = [s for s, _ in outcomes if s is not None]
    skipped = Counter(reason for _, reason in outcomes if reason is not None)
    if not scores:
        raise SearchError(f"Decile search skipped every instance: {dict(skipped)}")

    means = np.mean(np.asarray(scores), axis=0)
    per_d = {d: float(means[i]) for i, d in enumerate(DECILES)}
    optimal_d = DECILES[int(np.argmax(means))]
    logger.info(f"Decile search: optimal d = {optimal_d} (F1 {per_d[optimal_d]:.4f})")
    return DecileSearchResult(per_d, optimal_d, dict(skipped), len(scores))


def _bin_instance(item: Tuple[int, np.ndarray], tree: DecisionTree, explainer: BaseExplainer,
                  schema, candidate_ps: Sequence[float], grid_points: int,
                  seed: int) -> Tuple[Optional[List[Optional[float]]], Optional[str]]:
    instance_id, x = item
    tree_iv = path_intervals(tree, x)
    if not tree_iv:
        return None, EMPTY_DECISION_PATH
    features = [f for f in tree_iv if not schema[f].is_binary and schema[f].value_range > 0]
    if not features:
        return None, NO_COMPARABLE_FEATURES

    profile_seed = derive_seed(seed, instance_id)
    profiles = [WeightProfile(explainer, x, f, schema[f], grid_points, profile_seed) for f in features]
    distances = []
    for p in candidate_ps:
        expl_iv = {profile.feature: profile.interval(p) for profile in profiles}
        distances.append(threshold_distance(expl_iv, tree_iv, schema))
    return distances, None


def bin_size_search(tree: DecisionTree, explainer: BaseExplainer, eval_set: Dataset,
                    candidate_ps: Sequence[float] = DEFAULT_CANDIDATE_PS, grid_points: int = 100,
                    seed: int = 0, jobs: Optional[int] = 1) -> BinSearchResult:
    """
    Mean threshold distance between weight-bin intervals and path intervals for each p

    The weight profile of every (instance, true feature) pair is computed once
    and reused for all candidate bin sizes.

    Args:
        tree: White-box tree
        explainer: Weight-only explainer bound to the tree
        eval_set: Instances to evaluate
        candidate_ps: Relative bin sizes to try
        grid_points: Candidate values per feature
        seed: Run seed
        jobs: Worker count

    Returns:
        Per-p mean distance and the smallest p attaining the minimum
    """
    if explainer.provides_intervals:
        raise ExplainerError("Bin size search applies to weight-only explainers")
    candidate_ps = tuple(float(p) for p in candidate_ps)
    if not candidate_ps or any(not 0.0 < p < 1.0 for p in candidate_ps):
        raise ExplainerError(f"Candidate bin sizes must lie strictly between 0 and 1: {candidate_ps}")

    worker = partial(_bin_instance, tree=tree, explainer=explainer, schema=eval_set.schema,
                     candidate_ps=candidate_ps, grid_points=grid_points, seed=seed)
    outcomes = map_instances(worker, list(enumerate(eval_set.rows)), jobs=jobs, desc="bin search")
    distances = [d for d, _ in outcomes if d is not None]
    skipped = Counter(reason for _, reason in outcomes if reason is not None)
    if not distances:
        raise SearchError(f"Bin size search skipped every instance: {dict(skipped)}")

    means = np.mean(np.asarray(distances, dtype=float), axis=0)
    per_p = {p: float(means[i]) for i, p in enumerate(candidate_ps)}
    optimal_p = candidate_ps[int(np.argmin(means))]
    logger.info(f"Bin size search: optimal p = {optimal_p} (distance {per_p[optimal_p]:.4f})")
    return BinSearchResult(per_p, optimal_p, dict(skipped), len(distances))


@dataclass(frozen=True)
class Phase2Validation:
    """Phase 1 and Phase 3 metrics of the chosen parameters on the white box"""
    phase1: Phase1Report
    phase3: Any

    def to_frame(self) -> pd.DataFrame:
        merged = self.phase1.to_frame()[["instance_id", "recall", "precision"]].merge(
            self.phase3.to_frame()[["instance_id", "supporting", "contrary"]], on="instance_id", how="outer"
        )
        return merged.sort_values("instance_id").reset_index(drop=True)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean_recall": self.phase1.mean_recall,
            "mean_precision": self.phase1.mean_precision,
            "mean_supporting": self.phase3.mean_supporting,
            "mean_contrary": self.phase3.mean_contrary,
            "phase1_skipped": dict(sorted(self.phase1.skipped.items())),
            "phase3_excluded": self.phase3.to_dict()["excluded"],
        }


def _path_selector(x: np.ndarray, explanation, tree: DecisionTree):
    return path_intervals(tree, x)


def validate_phase2(tree: DecisionTree, explainer: BaseExplainer, eval_set: Dataset, optimal_d: int,
                    optimal_p: Optional[float], seed: int = 0, jobs: Optional[int] = 1,
                    margin_fraction: float = 0.05, perturbation_repeats: int = 10, grid_points: int = 100,
                    use_path_intervals: bool = False) -> Phase2Validation:
    """
    Run the perturbation procedure on the white box with the chosen parameters

    With use_path_intervals the tree's own path intervals replace the
    explanation intervals, which keeps every supporting perturbation on the
    instance's leaf.
    """
    from agents.phase3.perturbation import Phase3Params, run_phase3

    params = Phase3Params(optimal_d=optimal_d, optimal_p=optimal_p, perturbation_repeats=perturbation_repeats,
                          margin_fraction=margin_fraction, grid_points=grid_points)
    selector = partial(_path_selector, tree=tree) if use_path_intervals else None
    phase1 = run_phase1(tree, explainer, eval_set, seed=seed, jobs=jobs)
    phase3 = run_phase3(tree, explainer, eval_set, params, seed=seed, jobs=jobs, selector=selector)
    return Phase2Validation(phase1, phase3)


def search_report(deciles: DecileSearchResult, bins: Optional[BinSearchResult]) -> Dict[str, Any]:
    """JSON body of the parameter search"""
    return {
        "per_d_scores": {str(d): s for d, s in deciles.per_d_scores.items()},
        "optimal_d": deciles.optimal_d,
        "per_p_distances": {} if bins is None else {repr(p): v for p, v in bins.per_p_distances.items()},
        "optimal_p": None if bins is None else bins.optimal_p,
        "skipped": {
            "decile_search": dict(sorted(deciles.skipped.items())),
            "bin_size_search": {} if bins is None else dict(sorted(bins.skipped.items())),
        },
    }


def search_curves(deciles: DecileSearchResult, bins: Optional[BinSearchResult]) -> pd.DataFrame:
    """Long-format score curves: search, parameter, value"""
    rows = [{"search": "decile", "parameter": float(d), "value": s} for d, s in deciles.per_d_scores.items()]
    if bins is not None:
        rows.extend({"search": "bin_size", "parameter": p, "value": v} for p, v in bins.per_p_distances.items())
    return pd.DataFrame(rows, columns=["search", "parameter", "value"])
