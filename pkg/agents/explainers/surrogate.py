"""
Local surrogate explainer

Samples a neighbourhood of the instance over training quartile bins, encodes
each sample as "same bin as x" bits, and fits a locality-weighted ridge
regression of the model output on those bits. Coefficients are the weights;
x's bin per feature is the relevant interval.
"""

import logging
import math
from typing import Dict, Sequence

import numpy as np
from sklearn.linear_model import Ridge

from agents.explainers.base import BaseExplainer, Explanation, ExplainerConfig, ExplainerKind
from agents.models.trees import Model, predicted_class_output
from agents.tabular.dataset import Dataset
from shared.utils.exceptions import ModelError
from shared.utils.reporting import Interval

logger = logging.getLogger("fidelity_agents.explainers")

KEEP_PROBABILITY = 0.5


class SurrogateExplainer(BaseExplainer):
    kind = ExplainerKind.SURROGATE
    provides_intervals = True
    deterministic = False

    def __init__(self, model: Model, config: ExplainerConfig, train: Dataset):
        super().__init__(model, config)
        if train.num_features != model.num_features:
            raise ModelError(
                f"Training data width {train.num_features} does not match model width {model.num_features}"
            )
        self.train = train
        self.degenerate = np.array([f.observed_std == 0.0 for f in train.schema])
        self.binary = np.array([f.is_binary for f in train.schema])
        self.quartiles = np.array([f.quartile_bounds for f in train.schema], dtype=float)
        self.observed_min = np.array([f.observed_min for f in train.schema])
        self.observed_max = np.array([f.observed_max for f in train.schema])
        self.kernel_width = config.resolved_kernel_width(train.num_features)

    def bin_index(self, feature: int, values: np.ndarray) -> np.ndarray:
        """Quartile bin of each value: 0 for <= q1, 1 for (q1, q2], 2 for (q2, q3], 3 above q3"""
        return np.searchsorted(self.quartiles[feature], values, side="left")

    def bin_interval(self, feature: int, value: float) -> Interval:
        edges = np.concatenate([[-math.inf], self.quartiles[feature], [math.inf]])
        b = int(self.bin_index(feature, np.asarray([value]))[0])
        return float(edges[b]), float(edges[b + 1])

    def relevant_intervals(self, x: np.ndarray) -> Dict[int, Interval]:
        intervals = {}
        for f in range(self.num_features):
            if self.degenerate[f]:
                intervals[f] = (-math.inf, math.inf)
            elif self.binary[f]:
                intervals[f] = (float(x[f]), float(x[f]))
            else:
                intervals[f] = self.bin_interval(f, x[f])
        return intervals

    def sample_neighbourhood(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """
        Draw surrogate_samples instances; the first is x itself

        Per feature, with probability 0.5 the value stays in x's bin (uniform
        over the bin clamped to the observed range, binary features unchanged),
        otherwise it is a uniformly random training value.
        """
        n, m = self.config.surrogate_samples, self.num_features
        keep = rng.random((n, m)) < KEEP_PROBABILITY
        uniform = rng.random((n, m))
        picks = rng.integers(0, self.train.num_rows, size=(n, m))

        lo = np.empty(m)
        hi = np.empty(m)
        for f in range(m):
            b_lo, b_hi = self.bin_interval(f, x[f])
            lo[f] = max(b_lo, self.observed_min[f])
            hi[f] = min(b_hi, self.observed_max[f])
        in_bin = lo + (hi - lo) * uniform
        # x lies outside the observed range and its clamped bin is empty
        collapsed = hi <= lo
        in_bin[:, collapsed] = x[collapsed]
        in_bin[:, self.binary] = x[self.binary]
        in_bin[:, self.degenerate] = x[self.degenerate]

        random_values = self.train.rows[picks, np.arange(m)]
        samples = np.where(keep, in_bin, random_values)
        samples[0] = x
        return samples

    def interpretable_bits(self, x: np.ndarray, samples: np.ndarray) -> np.ndarray:
        """1 where a sample value falls in x's bin (equals x for binary features)"""
        bits = np.empty(samples.shape)
        for f in range(self.num_features):
            if self.binary[f]:
                bits[:, f] = samples[:, f] == x[f]
            else:
                bits[:, f] = self.bin_index(f, samples[:, f]) == self.bin_index(f, np.asarray([x[f]]))[0]
        return bits

    def explain(self, x: Sequence[float], seed: int = 0) -> Explanation:
        x = self._check_instance(x)
        rng = np.random.default_rng(seed)
        y, cls = predicted_class_output(self.model, x)

        samples = self.sample_neighbourhood(x, rng)
        outputs = self.model.predict_rows(samples)
        if cls == 0:
            outputs = 1.0 - outputs

        active = np.flatnonzero(~self.degenerate)
        weights = np.zeros(self.num_features)
        if active.size:
            bits = self.interpretable_bits(x, samples)[:, active]
            distance = np.sqrt(((1.0 - bits) ** 2).sum(axis=1))
            sample_weight = np.exp(-(distance ** 2) / self.kernel_width ** 2)
            ridge = Ridge(alpha=self.config.ridge_lambda, fit_intercept=True)
            ridge.fit(bits, outputs, sample_weight=sample_weight)
            weights[active] = ridge.coef_

        return Explanation(
            weights=tuple(weights),
            intervals=self.relevant_intervals(x),
            explained_output=float(y),
        )


def explain_surrogate(model: Model, x: Sequence[float], train: Dataset, config: ExplainerConfig,
                      seed: int = 0) -> Explanation:
    """One surrogate explanation of the model output at x"""
    return SurrogateExplainer(model, config, train).explain(x, seed)
