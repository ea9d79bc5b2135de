"""
Decision tree and tree ensemble models

Trees are immutable node graphs with a flattened array view used for
vectorised prediction and Shapley computation. The left branch is taken when
the feature value is less than or equal to the split threshold.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from agents.tabular.dataset import TaskKind
from shared.utils.exceptions import ModelError
from shared.utils.reporting import Interval, read_json, write_json

LEAF = -1


class Direction(str, Enum):
    LE = "<="
    GT = ">"


@dataclass(frozen=True)
class Leaf:
    """Terminal node; value is the class-1 probability or the regression value"""
    value: float
    cover: Optional[int] = None


@dataclass(frozen=True)
class Split:
    feature_index: int
    threshold: float
    left: "Node"
    right: "Node"
    cover: Optional[int] = None


Node = Union[Split, Leaf]


@dataclass(frozen=True)
class PathStep:
    feature_index: int
    threshold: float
    direction: Direction


@dataclass(frozen=True)
class DecisionPath:
    steps: Tuple[PathStep, ...]
    leaf_value: float


@dataclass(frozen=True)
class TreeArrays:
    """Preorder flattening of a tree; feature is LEAF (-1) at leaves, cover is NaN when unknown"""
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    depth: np.ndarray

    @property
    def has_cover(self) -> bool:
        return not np.isnan(self.cover).any() and bool((self.cover > 0).all())


def _flatten(root: Node) -> TreeArrays:
    feature, threshold, left, right, value, cover, depth = [], [], [], [], [], [], []

    def visit(node: Node, level: int) -> int:
        index = len(feature)
        feature.append(LEAF)
        threshold.append(math.nan)
        left.append(LEAF)
        right.append(LEAF)
        value.append(math.nan)
        cover.append(math.nan if node.cover is None else float(node.cover))
        depth.append(level)
        if isinstance(node, Leaf):
            value[index] = float(node.value)
            return index
        feature[index] = int(node.feature_index)
        threshold[index] = float(node.threshold)
        left[index] = visit(node.left, level + 1)
        right[index] = visit(node.right, level + 1)
        return index

    visit(root, 0)
    return TreeArrays(
        feature=np.asarray(feature, dtype=int),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=int),
        right=np.asarray(right, dtype=int),
        value=np.asarray(value, dtype=float),
        cover=np.asarray(cover, dtype=float),
        depth=np.asarray(depth, dtype=int),
    )


def _check_width(x: Sequence[float], num_features: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != num_features:
        raise ModelError(f"Instance width {x.shape[-1] if x.ndim else 0} does not match model width {num_features}")
    return x


def _check_rows(rows: np.ndarray, num_features: int) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != num_features:
        raise ModelError(f"Row width {rows.shape[-1]} does not match model width {num_features}")
    return rows


@dataclass(frozen=True)
class DecisionTree:
    """
    A binary decision tree over num_features features

    Classification trees store class-1 probabilities at their leaves;
    regression trees (including the members of an ensemble) store real values.
    """
    root: Node
    task: TaskKind
    num_features: int
    arrays: TreeArrays = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "task", TaskKind(self.task))
        arrays = _flatten(self.root)
        split_features = arrays.feature[arrays.feature != LEAF]
        if split_features.size and (split_features.min() < 0 or split_features.max() >= self.num_features):
            raise ModelError(f"Split feature index outside [0, {self.num_features})")
        internal = np.flatnonzero(arrays.feature != LEAF)
        if arrays.has_cover and internal.size:
            children = arrays.cover[arrays.left[internal]] + arrays.cover[arrays.right[internal]]
            if not np.array_equal(children, arrays.cover[internal]):
                raise ModelError("Cover of a split node differs from the sum of its children")
        object.__setattr__(self, "arrays", arrays)

    @property
    def max_depth_observed(self) -> int:
        """Number of split nodes on the longest root-to-leaf path"""
        return int(self.arrays.depth.max())

    @property
    def split_count(self) -> int:
        return int((self.arrays.feature != LEAF).sum())

    @property
    def leaf_count(self) -> int:
        return int((self.arrays.feature == LEAF).sum())

    def leaf_indices(self, rows: np.ndarray) -> np.ndarray:
        """Flattened node index of the leaf reached by every row"""
        rows = _check_rows(rows, self.num_features)
        a = self.arrays
        node = np.zeros(rows.shape[0], dtype=int)
        active = a.feature[node] != LEAF
        while active.any():
            idx = np.flatnonzero(active)
            current = node[idx]
            go_left = rows[idx, a.feature[current]] <= a.threshold[current]
            node[idx] = np.where(go_left, a.left[current], a.right[current])
            active = a.feature[node] != LEAF
        return node

    def predict_rows(self, rows: np.ndarray) -> np.ndarray:
        return self.arrays.value[self.leaf_indices(rows)]

    def predict(self, x: Sequence[float]) -> float:
        x = _check_width(x, self.num_features)
        return float(self.predict_rows(x[None, :])[0])

    def predict_margin(self, x: Sequence[float]) -> float:
        return self.predict(x)

    def decision_path(self, x: Sequence[float]) -> DecisionPath:
        x = _check_width(x, self.num_features)
        steps = []
        node = self.root
        while isinstance(node, Split):
            if x[node.feature_index] <= node.threshold:
                steps.append(PathStep(node.feature_index, node.threshold, Direction.LE))
                node = node.left
            else:
                steps.append(PathStep(node.feature_index, node.threshold, Direction.GT))
                node = node.right
        return DecisionPath(tuple(steps), float(node.value))

    def used_features(self) -> FrozenSet[int]:
        return frozenset(int(f) for f in self.arrays.feature if f != LEAF)


@dataclass(frozen=True)
class TreeEnsemble:
    """
    Gradient-boosted ensemble of regression trees over the margin

    margin = base_score + learning_rate * sum of tree outputs; classification
    outputs pass the margin through the logistic sigmoid.
    """
    trees: Tuple[DecisionTree, ...]
    learning_rate: float
    base_score: float
    task: TaskKind
    num_features: int

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "task", TaskKind(self.task))
        for tree in self.trees:
            if tree.num_features != self.num_features:
                raise ModelError("Ensemble member width differs from ensemble width")

    @property
    def num_trees(self) -> int:
        return len(self.trees)

    def margin_rows(self, rows: np.ndarray) -> np.ndarray:
        rows = _check_rows(rows, self.num_features)
        margin = np.full(rows.shape[0], float(self.base_score))
        for tree in self.trees:
            margin += self.learning_rate * tree.predict_rows(rows)
        return margin

    def predict_rows(self, rows: np.ndarray) -> np.ndarray:
        margin = self.margin_rows(rows)
        return expit(margin) if self.task is TaskKind.CLASSIFICATION else margin

    def predict(self, x: Sequence[float]) -> float:
        x = _check_width(x, self.num_features)
        return float(self.predict_rows(x[None, :])[0])

    def predict_margin(self, x: Sequence[float]) -> float:
        x = _check_width(x, self.num_features)
        return float(self.margin_rows(x[None, :])[0])

    def used_features(self) -> FrozenSet[int]:
        used = frozenset()
        for tree in self.trees:
            used = used | tree.used_features()
        return used


Model = Union[DecisionTree, TreeEnsemble]


def predict(model: Model, x: Sequence[float]) -> float:
    """Class-1 probability (classification) or regression value for one instance"""
    return model.predict(x)


def predict_rows(model: Model, rows: np.ndarray) -> np.ndarray:
    return model.predict_rows(rows)


def predict_margin(model: Model, x: Sequence[float]) -> float:
    """Pre-sigmoid output of an ensemble; a single tree's margin is its prediction"""
    return model.predict_margin(x)


def class_output(model: Model, x: Sequence[float], cls: Optional[int]) -> float:
    """Probability of class cls, or the regression value when the task is regression"""
    value = model.predict(x)
    if model.task is TaskKind.REGRESSION or cls is None:
        return value
    return value if cls == 1 else 1.0 - value


def predicted_class_output(model: Model, x: Sequence[float]) -> Tuple[float, Optional[int]]:
    """
    Output for the originally predicted class

    Returns:
        (Y(x), predicted class); the class is None for regression
    """
    value = model.predict(x)
    if model.task is TaskKind.REGRESSION:
        return value, None
    cls = 1 if value >= 0.5 else 0
    return (value if cls == 1 else 1.0 - value), cls


def decision_path(tree: DecisionTree, x: Sequence[float]) -> DecisionPath:
    return tree.decision_path(x)


def true_features(tree: DecisionTree, x: Sequence[float]) -> FrozenSet[int]:
    """Unique features tested along the decision path of x"""
    return frozenset(step.feature_index for step in tree.decision_path(x).steps)


def path_intervals(tree: DecisionTree, x: Sequence[float]) -> Dict[int, Interval]:
    """
    Per true feature, the value range that keeps x on its decision path

    Each visited split contributes (-inf, t] when the path went left and
    (t, +inf) when it went right; intervals are intersections of those.
    """
    intervals: Dict[int, List[float]] = {}
    for step in tree.decision_path(x).steps:
        lo, hi = intervals.setdefault(step.feature_index, [-math.inf, math.inf])
        if step.direction is Direction.LE:
            intervals[step.feature_index][1] = min(hi, step.threshold)
        else:
            intervals[step.feature_index][0] = max(lo, step.threshold)
    return {f: (lo, hi) for f, (lo, hi) in sorted(intervals.items())}


def model_summary(model: Model) -> Dict[str, int]:
    """Max depth, split and leaf node counts and number of trees"""
    trees = [model] if isinstance(model, DecisionTree) else list(model.trees)
    return {
        "max_depth": max((t.max_depth_observed for t in trees), default=0),
        "split_nodes": sum(t.split_count for t in trees),
        "leaf_nodes": sum(t.leaf_count for t in trees),
        "num_trees": len(trees),
    }


def _node_to_dict(node: Node) -> Dict[str, Any]:
    if isinstance(node, Leaf):
        return {"leaf": node.value, "cover": node.cover}
    return {
        "feature": node.feature_index,
        "threshold": node.threshold,
        "cover": node.cover,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(doc: Dict[str, Any]) -> Node:
    cover = doc.get("cover")
    cover = None if cover is None else int(cover)
    if "leaf" in doc:
        return Leaf(float(doc["leaf"]), cover)
    return Split(int(doc["feature"]), float(doc["threshold"]),
                 _node_from_dict(doc["left"]), _node_from_dict(doc["right"]), cover)


def model_to_dict(model: Model) -> Dict[str, Any]:
    if isinstance(model, DecisionTree):
        return {
            "kind": "tree",
            "task": model.task.value,
            "num_features": model.num_features,
            "root": _node_to_dict(model.root),
        }
    return {
        "kind": "ensemble",
        "task": model.task.value,
        "num_features": model.num_features,
        "learning_rate": model.learning_rate,
        "base_score": model.base_score,
        "trees": [_node_to_dict(tree.root) for tree in model.trees],
    }


def model_from_dict(doc: Dict[str, Any]) -> Model:
    try:
        num_features = int(doc["num_features"])
        if doc["kind"] == "tree":
            return DecisionTree(_node_from_dict(doc["root"]), TaskKind(doc["task"]), num_features)
        if doc["kind"] == "ensemble":
            trees = tuple(
                DecisionTree(_node_from_dict(root), TaskKind.REGRESSION, num_features)
                for root in doc["trees"]
            )
            return TreeEnsemble(trees, float(doc["learning_rate"]), float(doc["base_score"]),
                                TaskKind(doc["task"]), num_features)
    except (KeyError, TypeError, ValueError) as e:
        raise ModelError(f"Malformed model document: {e}") from e
    raise ModelError(f"Unknown model kind: {doc.get('kind')}")


def save_model(model: Model, path: Path) -> Path:
    return write_json(model_to_dict(model), path)


def load_model(path: Path) -> Model:
    return model_from_dict(read_json(path))
