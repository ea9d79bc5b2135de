"""
Path-dependent tree Shapley values

Exact Shapley attributions for trees and additive tree ensembles, using the
polynomial path recursion over feature subsets weighted by node covers.
A brute-force subset enumeration serves as an oracle for small models.
"""

import itertools
import logging
from typing import Dict, FrozenSet, List, Sequence, Tuple

import numpy as np
from scipy.special import comb

from agents.explainers.base import BaseExplainer, Explanation, ExplainerConfig, ExplainerKind
from agents.models.trees import LEAF, DecisionTree, Model, TreeArrays, TreeEnsemble
from shared.utils.exceptions import ExplainerError

logger = logging.getLogger("fidelity_agents.explainers")

BRUTE_FORCE_MAX_FEATURES = 15


class _PathElement:
    __slots__ = ("feature", "zero_fraction", "one_fraction", "weight")

    def __init__(self, feature: int, zero_fraction: float, one_fraction: float, weight: float):
        self.feature = feature
        self.zero_fraction = zero_fraction
        self.one_fraction = one_fraction
        self.weight = weight

    def copy(self) -> "_PathElement":
        return _PathElement(self.feature, self.zero_fraction, self.one_fraction, self.weight)


def _extend_path(path: List[_PathElement], zero_fraction: float, one_fraction: float, feature: int) -> None:
    unique_depth = len(path)
    path.append(_PathElement(feature, zero_fraction, one_fraction, 1.0 if unique_depth == 0 else 0.0))
    for i in range(unique_depth - 1, -1, -1):
        path[i + 1].weight += one_fraction * path[i].weight * (i + 1) / (unique_depth + 1)
        path[i].weight = zero_fraction * path[i].weight * (unique_depth - i) / (unique_depth + 1)


def _unwind_path(path: List[_PathElement], path_index: int) -> None:
    unique_depth = len(path) - 1
    one_fraction = path[path_index].one_fraction
    zero_fraction = path[path_index].zero_fraction
    next_one_portion = path[unique_depth].weight
    for i in range(unique_depth - 1, -1, -1):
        if one_fraction != 0:
            tmp = path[i].weight
            path[i].weight = next_one_portion * (unique_depth + 1) / ((i + 1) * one_fraction)
            next_one_portion = tmp - path[i].weight * zero_fraction * (unique_depth - i) / (unique_depth + 1)
        else:
            path[i].weight = path[i].weight * (unique_depth + 1) / (zero_fraction * (unique_depth - i))
    for i in range(path_index, unique_depth):
        path[i].feature = path[i + 1].feature
        path[i].zero_fraction = path[i + 1].zero_fraction
        path[i].one_fraction = path[i + 1].one_fraction
    path.pop()


def _unwound_path_sum(path: List[_PathElement], path_index: int) -> float:
    """Total permutation weight of the path with element path_index removed"""
    unique_depth = len(path) - 1
    one_fraction = path[path_index].one_fraction
    zero_fraction = path[path_index].zero_fraction
    next_one_portion = path[unique_depth].weight
    total = 0.0
    for i in range(unique_depth - 1, -1, -1):
        if one_fraction != 0:
            tmp = next_one_portion * (unique_depth + 1) / ((i + 1) * one_fraction)
            total += tmp
            next_one_portion = path[i].weight - tmp * zero_fraction * (unique_depth - i) / (unique_depth + 1)
        else:
            total += (path[i].weight / zero_fraction) / ((unique_depth - i) / (unique_depth + 1))
    return total


def _tree_shap(arrays: TreeArrays, x: np.ndarray, phi: np.ndarray, scale: float = 1.0) -> None:
    """Add scale times the Shapley values of one tree at x into phi"""

    def recurse(node: int, parent_path: List[_PathElement], zero_fraction: float,
                one_fraction: float, feature: int) -> None:
        path = [element.copy() for element in parent_path]
        _extend_path(path, zero_fraction, one_fraction, feature)

        split = arrays.feature[node]
        if split == LEAF:
            value = arrays.value[node]
            for i in range(1, len(path)):
                weight = _unwound_path_sum(path, i)
                element = path[i]
                phi[element.feature] += scale * weight * (element.one_fraction - element.zero_fraction) * value
            return

        left, right = arrays.left[node], arrays.right[node]
        hot, cold = (left, right) if x[split] <= arrays.threshold[node] else (right, left)
        cover = arrays.cover[node]

        incoming_zero, incoming_one = 1.0, 1.0
        for k in range(1, len(path)):
            if path[k].feature == split:
                incoming_zero, incoming_one = path[k].zero_fraction, path[k].one_fraction
                _unwind_path(path, k)
                break

        recurse(hot, path, incoming_zero * arrays.cover[hot] / cover, incoming_one, split)
        recurse(cold, path, incoming_zero * arrays.cover[cold] / cover, 0.0, split)

    recurse(0, [], 1.0, 1.0, -1)


def _expected_value(arrays: TreeArrays) -> float:
    leaves = arrays.feature == LEAF
    return float((arrays.cover[leaves] * arrays.value[leaves]).sum() / arrays.cover[0])


def _members(model: Model) -> Tuple[List[Tuple[DecisionTree, float]], float]:
    """(tree, scale) pairs and the additive offset of the model margin"""
    if isinstance(model, TreeEnsemble):
        return [(tree, model.learning_rate) for tree in model.trees], float(model.base_score)
    return [(model, 1.0)], 0.0


def _require_cover(model: Model) -> None:
    members, _ = _members(model)
    if not all(tree.arrays.has_cover for tree, _ in members):
        raise ExplainerError("Tree Shapley values need cover statistics on every node")


class TreeShapleyExplainer(BaseExplainer):
    """Exact path-dependent Shapley values in margin space; carries no intervals"""

    kind = ExplainerKind.TREE_SHAPLEY
    provides_intervals = False
    deterministic = True

    def __init__(self, model: Model, config: ExplainerConfig = ExplainerConfig()):
        super().__init__(model, config)
        _require_cover(model)
        self.members, self.offset = _members(model)
        self.base_value = self.offset + sum(scale * _expected_value(tree.arrays) for tree, scale in self.members)

    def explain(self, x: Sequence[float], seed: int = 0) -> Explanation:
        x = self._check_instance(x)
        phi = np.zeros(self.num_features)
        for tree, scale in self.members:
            _tree_shap(tree.arrays, x, phi, scale)
        return Explanation(
            weights=tuple(phi),
            intervals=None,
            explained_output=self.model.predict_margin(x),
            base_value=self.base_value,
        )

    def feature_weight_profile(self, x: Sequence[float], feature: int, candidates: Sequence[float],
                               seed: int = 0) -> np.ndarray:
        """
        Weight of one feature for each candidate value of x[feature]

        Within a tree the weight only depends on which side of each threshold
        on the feature the value falls, so every tree is evaluated once per
        threshold segment hit by the candidates.
        """
        x = self._check_instance(x)
        candidates = np.asarray(candidates, dtype=float)
        profile = np.zeros(candidates.shape[0])
        for tree, scale in self.members:
            a = tree.arrays
            thresholds = np.unique(a.threshold[a.feature == feature])
            if thresholds.size == 0:
                continue
            segments = np.searchsorted(thresholds, candidates, side="left")
            for segment in np.unique(segments):
                members = segments == segment
                variant = x.copy()
                variant[feature] = candidates[members][0]
                phi = np.zeros(self.num_features)
                _tree_shap(a, variant, phi, scale)
                profile[members] += phi[feature]
        return profile


def explain_tree_shapley(model: Model, x: Sequence[float]) -> Explanation:
    """Path-dependent Shapley explanation of a tree or ensemble at x"""
    return TreeShapleyExplainer(model).explain(x)


def _conditional_expectation(arrays: TreeArrays, x: np.ndarray, known: FrozenSet[int]) -> float:
    """Tree output with unknown features averaged over children by cover"""

    def visit(node: int) -> float:
        split = arrays.feature[node]
        if split == LEAF:
            return float(arrays.value[node])
        left, right = arrays.left[node], arrays.right[node]
        if split in known:
            return visit(left if x[split] <= arrays.threshold[node] else right)
        return (arrays.cover[left] * visit(left) + arrays.cover[right] * visit(right)) / arrays.cover[node]

    return visit(0)


def brute_force_shapley(model: Model, x: Sequence[float]) -> Explanation:
    """
    Shapley values by enumerating every feature subset

    Only features used by some split are enumerated; every other feature is
    a null player with value 0, which leaves the values of the rest unchanged.

    Args:
        model: Tree or ensemble with cover statistics
        x: Instance

    Returns:
        Explanation in margin space with base_value = v(empty set)
    """
    if model.num_features > BRUTE_FORCE_MAX_FEATURES:
        raise ExplainerError(
            f"Brute-force Shapley supports at most {BRUTE_FORCE_MAX_FEATURES} features, got {model.num_features}"
        )
    _require_cover(model)
    x = np.asarray(x, dtype=float)
    if x.shape != (model.num_features,):
        raise ExplainerError(f"Instance width does not match model width {model.num_features}")

    members, offset = _members(model)
    players = sorted(model.used_features())
    n = len(players)

    values: Dict[Tuple[int, ...], float] = {}
    for mask in itertools.product((0, 1), repeat=n):
        known = frozenset(p for p, bit in zip(players, mask) if bit)
        values[mask] = offset + sum(scale * _conditional_expectation(tree.arrays, x, known)
                                    for tree, scale in members)

    phi = np.zeros(model.num_features)
    for i, player in enumerate(players):
        for mask, value in values.items():
            if mask[i]:
                continue
            size = sum(mask)
            with_player = mask[:i] + (1,) + mask[i + 1:]
            phi[player] += (values[with_player] - value) / (n * comb(n - 1, size))

    empty = tuple([0] * n)
    full = tuple([1] * n)
    logger.debug(f"Brute-force Shapley over {n} features ({len(values)} subsets)")
    return Explanation(weights=tuple(phi), intervals=None,
                       explained_output=values[full], base_value=values[empty])
