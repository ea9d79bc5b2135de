"""
White-box agreement

Recall and precision of explanation features against the features on a
decision tree's path for each instance.
"""

import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd

from agents.explainers.base import BaseExplainer, Explanation
from agents.models.trees import DecisionTree, true_features
from agents.tabular.dataset import Dataset
from shared.utils.execution import derive_seed, map_instances

logger = logging.getLogger("fidelity_agents.phase1")

EMPTY_DECISION_PATH = "empty_decision_path"
EMPTY_EXPLANATION_FEATURES = "empty_explanation_features"


def recall_sample_size(tree: DecisionTree) -> int:
    """
    Number of explanation features compared for recall

    The longest root-to-leaf path length, capped at two thirds of the feature
    space (rounded up) when it exceeds the number of features.
    """
    n = tree.max_depth_observed
    if n > tree.num_features:
        n = -(-2 * tree.num_features // 3)
    return n


def top_n_features(explanation: Explanation, n: int) -> FrozenSet[int]:
    """The n nonzero-weight features with the largest |weight|, lower index first on ties"""
    weights = explanation.abs_weights
    nonzero = [f for f in range(len(weights)) if weights[f] != 0]
    ranked = sorted(nonzero, key=lambda f: (-weights[f], f))
    return frozenset(ranked[:max(n, 0)])


def top_quartile_features(explanation: Explanation) -> FrozenSet[int]:
    """Features whose |weight| reaches the 75th percentile of the nonzero |weights|"""
    weights = explanation.abs_weights
    nonzero = weights[weights != 0]
    if nonzero.size == 0:
        return frozenset()
    q75 = np.percentile(nonzero, 75)
    return frozenset(int(f) for f in np.flatnonzero((weights >= q75) & (weights != 0)))


def feature_recall(true_f: Set[int], expl_f: Set[int]) -> Optional[float]:
    """|true ∩ explanation| / |true|; None when there are no true features"""
    if not true_f:
        return None
    return len(set(true_f) & set(expl_f)) / len(true_f)


def feature_precision(true_f: Set[int], expl_f: Set[int]) -> Optional[float]:
    """|true ∩ explanation| / |explanation|; None when the explanation selects nothing"""
    if not expl_f:
        return None
    return len(set(true_f) & set(expl_f)) / len(expl_f)


@dataclass(frozen=True)
class Phase1Record:
    instance_id: int
    recall: Optional[float]
    precision: Optional[float]
    n_used: int
    true_feature_count: int
    skip_reasons: Tuple[str, ...] = ()


@dataclass(frozen=True)
class Phase1Report:
    records: Tuple[Phase1Record, ...]
    mean_recall: Optional[float]
    mean_precision: Optional[float]
    skipped: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "records": [
                {**asdict(r), "skip_reasons": list(r.skip_reasons)} for r in self.records
            ],
            "mean_recall": self.mean_recall,
            "mean_precision": self.mean_precision,
            "skipped": dict(sorted(self.skipped.items())),
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([
            {
                "instance_id": r.instance_id,
                "recall": r.recall,
                "precision": r.precision,
                "n_used": r.n_used,
                "true_feature_count": r.true_feature_count,
                "skip_reasons": ";".join(r.skip_reasons),
            }
            for r in self.records
        ], columns=["instance_id", "recall", "precision", "n_used", "true_feature_count", "skip_reasons"])


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    usable = [v for v in values if v is not None]
    return float(np.mean(usable)) if usable else None


def evaluate_instance(tree: DecisionTree, explanation: Explanation, x: np.ndarray, n: int,
                      instance_id: int) -> Phase1Record:
    """Recall (top n) and precision (top quartile) of one explanation against the path of x"""
    true_f = true_features(tree, x)
    if not true_f:
        return Phase1Record(instance_id, None, None, n, 0, (EMPTY_DECISION_PATH,))

    recall = feature_recall(true_f, top_n_features(explanation, n))
    precision = feature_precision(true_f, top_quartile_features(explanation))
    reasons = () if precision is not None else (EMPTY_EXPLANATION_FEATURES,)
    return Phase1Record(instance_id, recall, precision, n, len(true_f), reasons)


def _phase1_instance(item: Tuple[int, np.ndarray], tree: DecisionTree, explainer: BaseExplainer,
                     n: int, seed: int) -> Phase1Record:
    instance_id, x = item
    explanation = explainer.explain_repeated(x, derive_seed(seed, instance_id))
    return evaluate_instance(tree, explanation, x, n, instance_id)


def summarize_phase1(records: Sequence[Phase1Record]) -> Phase1Report:
    records = tuple(sorted(records, key=lambda r: r.instance_id))
    skipped = Counter(reason for r in records for reason in r.skip_reasons)
    return Phase1Report(
        records=records,
        mean_recall=_mean([r.recall for r in records]),
        mean_precision=_mean([r.precision for r in records]),
        skipped=dict(skipped),
    )


def run_phase1(tree: DecisionTree, explainer: BaseExplainer, test: Dataset, seed: int = 0,
               jobs: Optional[int] = 1) -> Phase1Report:
    """
    Evaluate explanation agreement with the white-box tree on every test instance

    Each instance is explained k_repeats times with seeds derived from
    (seed, instance_id) and the averaged explanation is scored.

    Args:
        tree: White-box decision tree the explainer explains
        explainer: Explainer bound to the tree
        test: Instances to evaluate
        seed: Run seed
        jobs: Worker count

    Returns:
        Phase1Report with per-instance records and means over non-skipped instances
    """
    n = recall_sample_size(tree)
    worker = partial(_phase1_instance, tree=tree, explainer=explainer, n=n, seed=seed)
    records = map_instances(worker, list(enumerate(test.rows)), jobs=jobs, desc="phase1")
    report = summarize_phase1(records)
    logger.info(
        f"Phase 1 over {len(records)} instances: recall {report.mean_recall}, "
        f"precision {report.mean_precision}, skipped {report.skipped}"
    )
    return report
