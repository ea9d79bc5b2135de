"""
Perturbation fidelity

Perturbs the features an explanation selects inside (supporting) or just
outside (contrary) their relevant value ranges and measures the mean
relative change of the model output for the originally predicted class.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from functools import partial
from typing import Any, Callable, Dict, FrozenSet, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from agents.explainers.base import BaseExplainer, Explanation
from agents.models.trees import Model, predicted_class_output
from agents.phase2.selection import decile_feature_sets, explanation_intervals
from agents.tabular.dataset import Dataset, FeatureSchema
from shared.utils.exceptions import DataError
from shared.utils.execution import derive_seed, map_instances
from shared.utils.reporting import Interval

logger = logging.getLogger("fidelity_agents.phase3")

ZERO_OUTPUT_GUARD = 1e-9

ZERO_OUTPUT = "zero_output"
EMPTY_EXPLANATION = "empty_explanation"
EMPTY_EXPLANATION_FEATURES = "empty_explanation_features"
NO_VIOLABLE_BOUNDS = "no_violable_bounds"

SUPPORTING_STREAM = 1
CONTRARY_STREAM = 2

IntervalSelector = Callable[[np.ndarray, Explanation], Dict[int, Interval]]


class PerturbationMode(str, Enum):
    SUPPORTING = "supporting"
    CONTRARY = "contrary"


@dataclass(frozen=True, eq=False)
class PerturbationSet:
    """Perturbed copies of one instance; skipped_features could not be perturbed in this mode"""
    original: np.ndarray
    perturbed: Tuple[np.ndarray, ...]
    mode: PerturbationMode
    perturbed_features: FrozenSet[int]
    skipped_features: FrozenSet[int] = frozenset()

    def as_rows(self) -> np.ndarray:
        return np.vstack(self.perturbed) if self.perturbed else np.empty((0, self.original.shape[0]))


@dataclass(frozen=True)
class Phase3Params:
    optimal_d: int
    optimal_p: Optional[float] = None
    perturbation_repeats: int = 10
    margin_fraction: float = 0.05
    grid_points: int = 100

    def __post_init__(self):
        if self.optimal_d not in range(1, 10):
            raise DataError(f"optimal_d must be between 1 and 9, got {self.optimal_d}")
        if self.optimal_p is not None and not 0.0 < self.optimal_p < 1.0:
            raise DataError(f"optimal_p must be strictly between 0 and 1, got {self.optimal_p}")
        if self.perturbation_repeats < 1:
            raise DataError(f"perturbation_repeats must be at least 1, got {self.perturbation_repeats}")
        if self.margin_fraction < 0:
            raise DataError(f"margin_fraction must be non-negative, got {self.margin_fraction}")
        if self.grid_points < 2:
            raise DataError(f"grid_points must be at least 2, got {self.grid_points}")


@dataclass(frozen=True)
class Phase3Record:
    instance_id: int
    supporting: Optional[float]
    contrary: Optional[float]
    y_original: float
    selected_features: Tuple[int, ...] = ()
    supporting_skipped: Tuple[int, ...] = ()
    contrary_skipped: Tuple[int, ...] = ()
    supporting_excluded: Optional[str] = None
    contrary_excluded: Optional[str] = None


@dataclass(frozen=True)
class Phase3Report:
    records: Tuple[Phase3Record, ...]
    mean_supporting: Optional[float]
    mean_contrary: Optional[float]
    excluded: Dict[str, Dict[str, int]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "records": [
                {
                    "instance_id": r.instance_id,
                    "supporting": r.supporting,
                    "contrary": r.contrary,
                    "y_original": r.y_original,
                    "selected_features": list(r.selected_features),
                    "supporting_skipped": list(r.supporting_skipped),
                    "contrary_skipped": list(r.contrary_skipped),
                    "supporting_excluded": r.supporting_excluded,
                    "contrary_excluded": r.contrary_excluded,
                }
                for r in self.records
            ],
            "mean_supporting": self.mean_supporting,
            "mean_contrary": self.mean_contrary,
            "excluded": {mode: dict(sorted(counts.items())) for mode, counts in self.excluded.items()},
        }

    def to_frame(self) -> pd.DataFrame:
        columns = ["instance_id", "supporting", "contrary", "y_original", "selected_features",
                   "supporting_excluded", "contrary_excluded"]
        return pd.DataFrame([
            {
                "instance_id": r.instance_id,
                "supporting": r.supporting,
                "contrary": r.contrary,
                "y_original": r.y_original,
                "selected_features": " ".join(str(f) for f in r.selected_features),
                "supporting_excluded": r.supporting_excluded or "",
                "contrary_excluded": r.contrary_excluded or "",
            }
            for r in self.records
        ], columns=columns)


def relevant_intervals(explanation: Explanation, features: Sequence[int], optimal_p: Optional[float],
                       explainer: BaseExplainer, x: np.ndarray, schema: Sequence[FeatureSchema],
                       grid_points: int = 100, seed: int = 0) -> Dict[int, Interval]:
    """Intervals carried by the explanation, or weight-bin intervals at optimal_p"""
    return explanation_intervals(explanation, features, explainer, x, schema, optimal_p, grid_points, seed)


def _open_bounds(interval: Interval, feature: FeatureSchema) -> Optional[Tuple[float, float]]:
    """Sampling range strictly inside the interval clamped to the observed range"""
    lo = max(interval[0], feature.observed_min)
    hi = min(interval[1], feature.observed_max)
    low = float(np.nextafter(lo, math.inf))
    if not low < hi:
        return None
    return low, hi


def perturb_supporting(x: Sequence[float], intervals: Mapping[int, Interval], schema: Sequence[FeatureSchema],
                       rng: np.random.Generator) -> Tuple[np.ndarray, FrozenSet[int]]:
    """
    Redraw every interval feature uniformly inside its interval

    Binary features and intervals that are degenerate after clamping to the
    observed range keep x's value.

    Returns:
        (perturbed instance, features kept unchanged)
    """
    perturbed = np.array(x, dtype=float, copy=True)
    kept = set()
    for f, interval in sorted(intervals.items()):
        bounds = None if schema[f].is_binary else _open_bounds(interval, schema[f])
        if bounds is None:
            kept.add(f)
            continue
        perturbed[f] = rng.uniform(*bounds)
    return perturbed, frozenset(kept)


def perturb_contrary(x: Sequence[float], intervals: Mapping[int, Interval], schema: Sequence[FeatureSchema],
                     rng: np.random.Generator, margin_fraction: float = 0.05) -> Tuple[np.ndarray, FrozenSet[int]]:
    """
    Move every interval feature just outside its interval

    The margin is margin_fraction of the observed range. One finite side is
    chosen uniformly; values are drawn from (hi, hi + margin] or
    [lo - margin, lo). Binary features flip; unbounded intervals and
    zero-range features are left unchanged.

    Returns:
        (perturbed instance, features left unchanged)
    """
    perturbed = np.array(x, dtype=float, copy=True)
    skipped = set()
    for f, (lo, hi) in sorted(intervals.items()):
        if schema[f].is_binary:
            perturbed[f] = 1.0 - perturbed[f]
            continue
        margin = margin_fraction * schema[f].value_range
        sides = [side for side, bound in (("upper", hi), ("lower", lo)) if math.isfinite(bound)]
        if not sides or margin <= 0:
            skipped.add(f)
            continue
        side = sides[int(rng.integers(len(sides)))]
        offset = margin * (1.0 - rng.random())
        if side == "upper":
            perturbed[f] = max(hi + offset, float(np.nextafter(hi, math.inf)))
        else:
            perturbed[f] = min(lo - offset, float(np.nextafter(lo, -math.inf)))
    return perturbed, frozenset(skipped)


def build_perturbation_set(x: Sequence[float], intervals: Mapping[int, Interval], schema: Sequence[FeatureSchema],
                           mode: PerturbationMode, repeats: int, rng: np.random.Generator,
                           margin_fraction: float = 0.05) -> PerturbationSet:
    """repeats perturbed copies of x in one mode"""
    mode = PerturbationMode(mode)
    original = np.asarray(x, dtype=float)
    perturbed, skipped = [], frozenset()
    for _ in range(repeats):
        if mode is PerturbationMode.SUPPORTING:
            row, skipped = perturb_supporting(original, intervals, schema, rng)
        else:
            row, skipped = perturb_contrary(original, intervals, schema, rng, margin_fraction)
        perturbed.append(row)
    return PerturbationSet(
        original=original,
        perturbed=tuple(perturbed),
        mode=mode,
        perturbed_features=frozenset(intervals) - skipped,
        skipped_features=skipped,
    )


def _mean_relative_change(y: float, ys: Sequence[float]) -> float:
    if abs(y) < ZERO_OUTPUT_GUARD:
        raise DataError(f"Relative change is undefined for model output {y}")
    ys = np.asarray(ys, dtype=float)
    if ys.size == 0:
        raise DataError("No perturbed outputs")
    return float(np.sum(np.abs(y - ys) / abs(y)) / ys.size)


def contrary_fidelity(y: float, ys: Sequence[float]) -> float:
    """Mean absolute relative output change under contrary perturbation"""
    return _mean_relative_change(y, ys)


def supporting_fidelity(y: float, ys: Sequence[float]) -> float:
    """One minus the mean absolute relative output change under supporting perturbation"""
    return 1.0 - _mean_relative_change(y, ys)


def _class_outputs(model: Model, rows: np.ndarray, cls: Optional[int]) -> np.ndarray:
    outputs = model.predict_rows(rows)
    return 1.0 - outputs if cls == 0 else outputs


def select_intervals(x: np.ndarray, explanation: Explanation, explainer: BaseExplainer,
                     schema: Sequence[FeatureSchema], params: Phase3Params, seed: int) -> Dict[int, Interval]:
    """Intervals of the features in the top optimal_d deciles of the explanation"""
    features = decile_feature_sets(explanation)[params.optimal_d - 1]
    return relevant_intervals(explanation, features, params.optimal_p, explainer, x, schema,
                              params.grid_points, seed)


def _phase3_instance(item: Tuple[int, np.ndarray], model: Model, explainer: BaseExplainer,
                     schema: Sequence[FeatureSchema], params: Phase3Params, seed: int,
                     selector: Optional[IntervalSelector]) -> Phase3Record:
    instance_id, x = item
    y, cls = predicted_class_output(model, x)
    if abs(y) < ZERO_OUTPUT_GUARD:
        return Phase3Record(instance_id, None, None, y,
                            supporting_excluded=ZERO_OUTPUT, contrary_excluded=ZERO_OUTPUT)

    explanation_seed = derive_seed(seed, instance_id)
    explanation = explainer.explain_repeated(x, explanation_seed)
    if selector is not None:
        intervals = selector(x, explanation)
    elif explanation.is_zero:
        return Phase3Record(instance_id, None, None, y,
                            supporting_excluded=EMPTY_EXPLANATION, contrary_excluded=EMPTY_EXPLANATION)
    else:
        intervals = select_intervals(x, explanation, explainer, schema, params, explanation_seed)

    selected = tuple(sorted(intervals))
    if not selected:
        return Phase3Record(instance_id, None, None, y,
                            supporting_excluded=EMPTY_EXPLANATION_FEATURES,
                            contrary_excluded=EMPTY_EXPLANATION_FEATURES)

    supporting_set = build_perturbation_set(
        x, intervals, schema, PerturbationMode.SUPPORTING, params.perturbation_repeats,
        np.random.default_rng(derive_seed(seed, instance_id, SUPPORTING_STREAM)), params.margin_fraction,
    )
    supporting = supporting_fidelity(y, _class_outputs(model, supporting_set.as_rows(), cls))

    contrary_set = build_perturbation_set(
        x, intervals, schema, PerturbationMode.CONTRARY, params.perturbation_repeats,
        np.random.default_rng(derive_seed(seed, instance_id, CONTRARY_STREAM)), params.margin_fraction,
    )
    contrary, contrary_excluded = None, None
    if contrary_set.perturbed_features:
        contrary = contrary_fidelity(y, _class_outputs(model, contrary_set.as_rows(), cls))
    else:
        contrary_excluded = NO_VIOLABLE_BOUNDS
        logger.debug(f"Instance {instance_id}: no violable bounds")

    return Phase3Record(
        instance_id=instance_id,
        supporting=supporting,
        contrary=contrary,
        y_original=y,
        selected_features=selected,
        supporting_skipped=tuple(sorted(supporting_set.skipped_features)),
        contrary_skipped=tuple(sorted(contrary_set.skipped_features)),
        contrary_excluded=contrary_excluded,
    )


def summarize_phase3(records: Sequence[Phase3Record]) -> Phase3Report:
    records = tuple(sorted(records, key=lambda r: r.instance_id))
    supporting = [r.supporting for r in records if r.supporting is not None]
    contrary = [r.contrary for r in records if r.contrary is not None]
    return Phase3Report(
        records=records,
        mean_supporting=float(np.mean(supporting)) if supporting else None,
        mean_contrary=float(np.mean(contrary)) if contrary else None,
        excluded={
            "supporting": dict(Counter(r.supporting_excluded for r in records if r.supporting_excluded)),
            "contrary": dict(Counter(r.contrary_excluded for r in records if r.contrary_excluded)),
        },
    )


def run_phase3(model: Model, explainer: BaseExplainer, eval_set: Dataset, params: Phase3Params,
               seed: int = 0, jobs: Optional[int] = 1,
               selector: Optional[IntervalSelector] = None) -> Phase3Report:
    """
    Supporting and contrary fidelity of explanations on every instance

    Per instance: record Y(x) for the predicted class, average k explanations,
    select the top optimal_d deciles, take their relevant intervals, build
    perturbation_repeats supporting and contrary perturbations and compare
    outputs. selector, when given, replaces decile selection and interval
    extraction.

    Args:
        model: Tree or ensemble being explained
        explainer: Explainer bound to the model
        eval_set: Instances to evaluate
        params: Decile range, bin size and perturbation settings
        seed: Run seed; per-instance seeds derive from (seed, instance_id)
        jobs: Worker count
        selector: Optional (x, explanation) -> intervals override

    Returns:
        Phase3Report with means over included instances and exclusion counts per mode
    """
    worker = partial(_phase3_instance, model=model, explainer=explainer, schema=eval_set.schema,
                     params=params, seed=seed, selector=selector)
    records = map_instances(worker, list(enumerate(eval_set.rows)), jobs=jobs, desc="phase3")
    report = summarize_phase3(records)
    logger.info(
        f"Phase 3 over {len(records)} instances: supporting {report.mean_supporting}, "
        f"contrary {report.mean_contrary}, excluded {report.excluded}"
    )
    return report
