"""
Explanation types and the explainer base class
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from agents.models.trees import Model
from agents.tabular.dataset import Dataset
from shared.utils.exceptions import ExplainerError
from shared.utils.execution import derive_seed
from shared.utils.reporting import Interval


class ExplainerKind(str, Enum):
    SURROGATE = "surrogate"
    TREE_SHAPLEY = "tree_shapley"


@dataclass(frozen=True)
class ExplainerConfig:
    kind: ExplainerKind = ExplainerKind.TREE_SHAPLEY
    k_repeats: int = 10
    surrogate_samples: int = 1000
    kernel_width: Optional[float] = None
    ridge_lambda: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ExplainerKind(self.kind))
        if self.k_repeats < 1:
            raise ExplainerError(f"k_repeats must be at least 1, got {self.k_repeats}")
        if self.surrogate_samples < 10:
            raise ExplainerError(f"surrogate_samples must be at least 10, got {self.surrogate_samples}")
        if self.kernel_width is not None and not self.kernel_width > 0:
            raise ExplainerError(f"kernel_width must be positive, got {self.kernel_width}")
        if self.ridge_lambda < 0:
            raise ExplainerError(f"ridge_lambda must be non-negative, got {self.ridge_lambda}")

    def resolved_kernel_width(self, num_features: int) -> float:
        if self.kernel_width is not None:
            return float(self.kernel_width)
        return 0.75 * math.sqrt(num_features)


@dataclass(frozen=True)
class Explanation:
    """
    Signed per-feature weights for one prediction

    intervals, when present, maps features to the value range the explanation
    deems relevant. base_value is set by Shapley explainers, for which
    base_value + sum(weights) == explained_output.
    """
    weights: Tuple[float, ...]
    intervals: Optional[Mapping[int, Interval]] = None
    explained_output: float = 0.0
    base_value: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.intervals is not None:
            object.__setattr__(self, "intervals", {int(f): (float(lo), float(hi))
                                                   for f, (lo, hi) in sorted(self.intervals.items())})

    @property
    def num_features(self) -> int:
        return len(self.weights)

    @property
    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    @property
    def abs_weights(self) -> np.ndarray:
        return np.abs(self.weight_array)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.weight_array)


def average_explanations(explanations: Sequence[Explanation]) -> Explanation:
    """
    Per-feature mean of signed weights

    Intervals come from the first explanation that carries them; base values
    are averaged only when every explanation has one.
    """
    if not explanations:
        raise ExplainerError("Cannot average an empty sequence of explanations")
    width = explanations[0].num_features
    if any(e.num_features != width for e in explanations):
        raise ExplainerError("Cannot average explanations of different widths")

    weights = np.mean([e.weight_array for e in explanations], axis=0)
    intervals = next((e.intervals for e in explanations if e.intervals is not None), None)
    bases = [e.base_value for e in explanations]
    return Explanation(
        weights=tuple(weights),
        intervals=intervals,
        explained_output=float(np.mean([e.explained_output for e in explanations])),
        base_value=None if any(b is None for b in bases) else float(np.mean(bases)),
    )


class BaseExplainer(ABC):
    """
    Local feature-attribution explainer bound to one model

    Subclasses implement explain(); repeated explanation, averaging and the
    single-feature weight profile are shared.
    """

    kind: ExplainerKind
    provides_intervals: bool = False
    deterministic: bool = False

    def __init__(self, model: Model, config: ExplainerConfig):
        self.model = model
        self.config = config

    @property
    def num_features(self) -> int:
        return self.model.num_features

    def _check_instance(self, x: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.num_features:
            raise ExplainerError(f"Instance width does not match model width {self.num_features}")
        return x

    @abstractmethod
    def explain(self, x: Sequence[float], seed: int = 0) -> Explanation:
        """
        Explain the model output at x

        Args:
            x: Instance
            seed: Sampling seed; ignored by deterministic explainers

        Returns:
            Explanation of the model output at x
        """

    def explain_repeated(self, x: Sequence[float], seed: int = 0) -> Explanation:
        """Average of k_repeats explanations with independently derived seeds"""
        if self.deterministic:
            return self.explain(x, seed)
        return average_explanations([
            self.explain(x, derive_seed(seed, repeat)) for repeat in range(self.config.k_repeats)
        ])

    def feature_weight_profile(self, x: Sequence[float], feature: int, candidates: Sequence[float],
                               seed: int = 0) -> np.ndarray:
        """
        Weight of one feature when x[feature] is replaced by each candidate value

        Each candidate is explained once with the same seed.
        """
        x = self._check_instance(x)
        profile = np.empty(len(candidates))
        for i, value in enumerate(candidates):
            variant = x.copy()
            variant[feature] = value
            profile[i] = self.explain(variant, seed).weights[feature]
        return profile


def build_explainer(config: ExplainerConfig, model: Model, train: Optional[Dataset] = None) -> BaseExplainer:
    """Instantiate the explainer named by config.kind"""
    from agents.explainers.surrogate import SurrogateExplainer
    from agents.explainers.tree_shapley import TreeShapleyExplainer

    if config.kind is ExplainerKind.SURROGATE:
        if train is None:
            raise ExplainerError("The surrogate explainer needs the training dataset")
        return SurrogateExplainer(model, config, train)
    return TreeShapleyExplainer(model, config)
