"""
Model training

CART trees are grown by an exact greedy split search over the midpoints of
consecutive distinct feature values. Gradient boosting grows the same
regression trees on the negative gradient of the loss at the current margin.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit, logit

from agents.models.metrics import training_loss
from agents.models.trees import DecisionTree, Leaf, Node, Split, TreeEnsemble
from agents.tabular.dataset import Dataset, TaskKind
from shared.utils.exceptions import ModelError

logger = logging.getLogger("fidelity_agents.models")

PROBABILITY_CLIP = 1e-6
IMPURITY_EPS = np.finfo(float).eps
# gains closer than this count as ties
GAIN_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CartParams:
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise ModelError(f"max_depth must be at least 1, got {self.max_depth}")
        if self.min_samples_split < 2:
            raise ModelError(f"min_samples_split must be at least 2, got {self.min_samples_split}")
        if self.min_samples_leaf < 1:
            raise ModelError(f"min_samples_leaf must be at least 1, got {self.min_samples_leaf}")

@dataclass(frozen=True)
class GbtParams:
    num_trees: int = 100
    learning_rate: float = 0.3
    max_depth: int = 6
    min_samples_leaf: int = 1

    def __post_init__(self):
        if self.num_trees < 0:
            raise ModelError(f"num_trees must be non-negative, got {self.num_trees}")
        if not self.learning_rate > 0:
            raise ModelError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_depth < 1:
            raise ModelError(f"max_depth must be at least 1, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise ModelError(f"min_samples_leaf must be at least 1, got {self.min_samples_leaf}")

@dataclass(frozen=True)
class SplitCandidate:
    feature_index: int
    threshold: float
    gain: float

def _squared_error(total: np.ndarray, total_sq: np.ndarray, count: np.ndarray) -> np.ndarray:
    """Sum of squared deviations from the mean, from running sums"""
    return total_sq - total * total / count

def _midpoint(lo: float, hi: float) -> float:
    threshold = lo + (hi - lo) / 2.0
    return lo if threshold >= hi or not np.isfinite(threshold) else threshold

def best_split(rows: np.ndarray, targets: np.ndarray, min_samples_leaf: int = 1) -> Optional[SplitCandidate]:
    """
    Highest-gain split of one node

    The gain is the drop in the summed squared error of the targets. For 0/1
    targets this is half the drop in count-weighted Gini impurity, so the same
    search serves classification and regression. Ties go to the lowest feature
    index, then to the lowest threshold.

    Args:
        rows: Node rows (n x features)
        targets: Node targets
        min_samples_leaf: Minimum rows on each side

    Returns:
        Best candidate, or None when no feature has a valid cut
    """
    n = len(targets)
    total, total_sq = targets.sum(), (targets * targets).sum()
    parent = float(_squared_error(total, total_sq, n))
    left_n = np.arange(1, n, dtype=float)
    right_n = n - left_n
    size_ok = (left_n >= min_samples_leaf) & (right_n >= min_samples_leaf)

    best: Optional[SplitCandidate] = None
    for f in range(rows.shape[1]):
        order = np.argsort(rows[:, f], kind="stable")
        values, ordered = rows[order, f], targets[order]
        valid = size_ok & (values[1:] > values[:-1])
        if not valid.any():
            continue
        left_sum = np.cumsum(ordered)[:-1]
        left_sq = np.cumsum(ordered * ordered)[:-1]
        children = (_squared_error(left_sum, left_sq, left_n)
                    + _squared_error(total - left_sum, total_sq - left_sq, right_n))
        gain = np.where(valid, parent - children, -np.inf)
        cut = int(np.flatnonzero(gain >= gain.max() - GAIN_TOLERANCE)[0])
        if best is None or gain[cut] > best.gain + GAIN_TOLERANCE:
            best = SplitCandidate(f, _midpoint(float(values[cut]), float(values[cut + 1])), float(gain[cut]))
    return best

def grow_tree(rows: np.ndarray, targets: np.ndarray, params: CartParams, depth: int = 0) -> Node:
    """Grow a node graph depth-first; leaves hold the mean target of their rows"""
    n = len(targets)
    leaf = Leaf(float(targets.mean()), n)
    if params.max_depth is not None and depth >= params.max_depth:
        return leaf
    if n < params.min_samples_split or n < 2 * params.min_samples_leaf:
        return leaf
    if float(targets.var()) <= IMPURITY_EPS:
        return leaf

    split = best_split(rows, targets, params.min_samples_leaf)
    if split is None:
        return leaf
    goes_left = rows[:, split.feature_index] <= split.threshold
    return Split(
        split.feature_index,
        split.threshold,
        grow_tree(rows[goes_left], targets[goes_left], params, depth + 1),
        grow_tree(rows[~goes_left], targets[~goes_left], params, depth + 1),
        n,
    )

def _require_rows(train: Dataset) -> None:
    if train.num_rows == 0:
        raise ModelError("Cannot train on an empty dataset")

def fit_cart(train: Dataset, params: CartParams = CartParams(), seed: int = 0) -> DecisionTree:
    """
    Fit a CART decision tree

    Gini impurity for classification (leaves hold the class-1 probability),
    squared error for regression. The split search has no random component,
    so the tree is the same for every seed.

    Args:
        train: Training dataset
        params: Growth limits
        seed: Run seed, logged with the fit

    Returns:
        Fitted DecisionTree
    """
    _require_rows(train)
    root = grow_tree(train.rows, np.asarray(train.targets, dtype=float), params)
    tree = DecisionTree(root, train.task, train.num_features)
    logger.info(
        f"Fitted {train.task.value} tree (seed {seed}): depth {tree.max_depth_observed}, {tree.leaf_count} leaves"
    )
    return tree

def fit_gbt(train: Dataset, params: GbtParams = GbtParams(), seed: int = 0) -> TreeEnsemble:
    """
    Fit a gradient-boosted tree ensemble

    Classification boosts the logistic loss from base_score = log-odds of
    class 1; regression boosts squared error from the target mean. Each round
    fits a regression tree to y - prediction and adds learning_rate times its
    output to the margin.

    Args:
        train: Training dataset
        params: Boosting parameters
        seed: Run seed, logged with the fit

    Returns:
        Fitted TreeEnsemble
    """
    _require_rows(train)
    y = np.asarray(train.targets, dtype=float)
    classification = train.task is TaskKind.CLASSIFICATION
    if classification:
        base_score = float(logit(np.clip(y.mean(), PROBABILITY_CLIP, 1.0 - PROBABILITY_CLIP)))
    else:
        base_score = float(y.mean())

    growth = CartParams(max_depth=params.max_depth, min_samples_leaf=params.min_samples_leaf)
    margin = np.full(train.num_rows, base_score)
    trees = []
    for round_index in range(params.num_trees):
        prediction = expit(margin) if classification else margin
        tree = DecisionTree(grow_tree(train.rows, y - prediction, growth), TaskKind.REGRESSION, train.num_features)
        trees.append(tree)
        margin = margin + params.learning_rate * tree.predict_rows(train.rows)

        if logger.isEnabledFor(logging.DEBUG):
            partial = TreeEnsemble(tuple(trees), params.learning_rate, base_score, train.task,
                                   train.num_features)
            logger.debug(f"Round {round_index + 1}: training loss {training_loss(partial, train):.6f}")

    ensemble = TreeEnsemble(tuple(trees), params.learning_rate, base_score, train.task, train.num_features)
    logger.info(f"Fitted {train.task.value} ensemble of {ensemble.num_trees} trees (seed {seed})")
    return ensemble
