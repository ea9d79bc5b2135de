#!/usr/bin/env python3
"""
Test suite for the white-box agreement agent (Phase 1)
"""

import numpy as np
import pytest

from agents.explainers.base import Explanation
from agents.explainers.tree_shapley import TreeShapleyExplainer, explain_tree_shapley
from agents.models.trees import DecisionTree, Leaf, Split, true_features
from agents.phase1.white_box import (
    EMPTY_DECISION_PATH,
    EMPTY_EXPLANATION_FEATURES,
    evaluate_instance,
    feature_precision,
    feature_recall,
    recall_sample_size,
    run_phase1,
    top_n_features,
    top_quartile_features,
)
from agents.shared.testing_framework import StubExplainer
from agents.tabular.dataset import TaskKind


def chain_tree(splits: int, num_features: int) -> DecisionTree:
    """A path of the given number of splits cycling over the features"""
    node = Leaf(0.0, 1)
    for i in range(splits):
        node = Split(i % num_features, 0.5, Leaf(1.0, 1), node, node.cover + 1)
    return DecisionTree(node, TaskKind.REGRESSION, num_features)


def weights(*values) -> Explanation:
    return Explanation(tuple(values))


class TestSampleSize:
    """Recall sample size from the longest path."""

    def test_path_length(self):
        assert recall_sample_size(chain_tree(5, 8)) == 5

    def test_two_thirds_cap(self):
        assert recall_sample_size(chain_tree(40, 30)) == 20

    def test_cap_rounds_up(self):
        assert recall_sample_size(chain_tree(7, 5)) == 4

    def test_leaf_only(self):
        assert recall_sample_size(DecisionTree(Leaf(0.5, 3), TaskKind.CLASSIFICATION, 4)) == 0


class TestFeatureSelection:
    """Top-n and top-quartile explanation features."""

    def test_top_n_by_magnitude(self):
        assert top_n_features(weights(0.9, -0.5, 0.1), 2) == {0, 1}

    def test_top_n_all_zero(self):
        assert top_n_features(weights(0.0, 0.0), 2) == frozenset()

    def test_top_n_tie_prefers_lower_index(self):
        assert top_n_features(weights(0.5, 0.1, 0.0, -0.5), 1) == {0}

    def test_top_n_fewer_nonzero_than_n(self):
        assert top_n_features(weights(0.0, 0.3, 0.0), 3) == {1}

    def test_top_quartile(self):
        assert top_quartile_features(weights(1.0, 2.0, 3.0, 4.0)) == {3}

    def test_top_quartile_single_nonzero(self):
        assert top_quartile_features(weights(0.0, -0.7, 0.0)) == {1}

    def test_top_quartile_equal_weights(self):
        assert top_quartile_features(weights(*[0.25] * 8)) == set(range(8))

    def test_top_quartile_ignores_zeros(self):
        assert top_quartile_features(weights(0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0)) == {6}

    def test_top_quartile_all_zero(self):
        assert top_quartile_features(weights(0.0, 0.0)) == frozenset()

    @pytest.mark.slow
    def test_null_features_never_selected(self, framework):
        for _ in range(50):
            tree = framework.random_tree(num_features=8, max_depth=3)
            x = framework.random_instances(1, 8)[0]
            assert top_quartile_features(explain_tree_shapley(tree, x)) <= tree.used_features()


class TestSetMetrics:
    """Recall and precision of feature sets."""

    def test_recall_examples(self):
        assert feature_recall({"glucose", "pregnancies"}, {"glucose", "pregnancies", "bmi"}) == 1.0
        assert feature_recall({"a"}, {"b"}) == 0.0
        assert feature_recall({"a", "b", "c", "d"}, {"a", "b"}) == 0.5

    def test_precision_examples(self):
        assert feature_precision({"glucose", "pregnancies"}, {"glucose", "bmi"}) == 0.5
        assert feature_precision({"a", "b"}, {"a"}) == 1.0
        assert feature_precision({"a"}, {"a", "b", "c", "d"}) == 0.25

    def test_undefined_cases(self):
        assert feature_recall(set(), {1}) is None
        assert feature_precision({1}, set()) is None

    def test_bounds_and_monotonicity(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            true_f = set(rng.choice(10, size=rng.integers(1, 6), replace=False).tolist())
            expl_f = set(rng.choice(10, size=rng.integers(1, 6), replace=False).tolist())
            larger = expl_f | {int(rng.integers(10))}
            recall = feature_recall(true_f, expl_f)
            precision = feature_precision(true_f, expl_f)
            assert 0.0 <= recall <= 1.0
            assert 0.0 <= precision <= 1.0
            assert feature_recall(true_f, larger) >= recall
            inside = expl_f & true_f
            if inside:
                assert feature_precision(true_f, inside) >= precision


class TestRunPhase1:
    """Per-instance evaluation and aggregation."""

    def test_explanation_matching_the_path(self, framework):
        tree = framework.symmetric_tree(num_features=4)
        test = framework.synthetic_dataset(rows=20, features=4, task=TaskKind.REGRESSION)
        report = run_phase1(tree, TreeShapleyExplainer(tree), test, seed=0)
        assert report.mean_recall == 1.0
        assert report.mean_precision == 1.0
        assert report.skipped == {}

    def test_hand_computed_records(self, framework):
        tree = framework.stump(num_features=3)
        explainer = StubExplainer(tree, (0.1, -0.9, 0.5))
        test = framework.synthetic_dataset(rows=20, features=3)
        report = run_phase1(tree, explainer, test, seed=0)
        # path is {0}; top-1 is {1}; top quartile of (0.1, 0.9, 0.5) is {1}
        assert all(r.recall == 0.0 and r.precision == 0.0 for r in report.records)
        assert [r.instance_id for r in report.records] == list(range(20))

    def test_tree_shapley_runs_are_identical(self, framework):
        tree = framework.random_tree(num_features=4, max_depth=4, task=TaskKind.CLASSIFICATION)
        test = framework.synthetic_dataset(rows=25, features=4)
        explainer = TreeShapleyExplainer(tree)
        first = run_phase1(tree, explainer, test, seed=3)
        second = run_phase1(tree, explainer, test, seed=3)
        assert first.to_dict() == second.to_dict()

    def test_job_count_does_not_change_results(self, framework):
        tree = framework.random_tree(num_features=4, max_depth=4, task=TaskKind.CLASSIFICATION)
        test = framework.synthetic_dataset(rows=12, features=4)
        explainer = TreeShapleyExplainer(tree)
        assert run_phase1(tree, explainer, test, jobs=1).to_dict() == run_phase1(tree, explainer, test, jobs=2).to_dict()

    def test_empty_path_is_skipped(self, framework):
        tree = DecisionTree(Leaf(0.5, 10), TaskKind.CLASSIFICATION, 2)
        record = evaluate_instance(tree, weights(0.3, 0.1), np.zeros(2), recall_sample_size(tree), 0)
        assert record.recall is None and record.precision is None
        assert record.skip_reasons == (EMPTY_DECISION_PATH,)

    def test_zero_explanation_skips_precision(self, framework):
        tree = framework.stump()
        record = evaluate_instance(tree, weights(0.0, 0.0), np.array([0.1, 0.1]), 1, 4)
        assert record.recall == 0.0
        assert record.precision is None
        assert record.skip_reasons == (EMPTY_EXPLANATION_FEATURES,)

    def test_report_frame(self, framework):
        tree = framework.symmetric_tree()
        test = framework.synthetic_dataset(rows=5, features=2, task=TaskKind.REGRESSION)
        frame = run_phase1(tree, TreeShapleyExplainer(tree), test).to_frame()
        assert framework.validate_dataframe(frame, ["instance_id", "recall", "precision", "n_used"])
        assert frame["true_feature_count"].tolist() == [len(true_features(tree, x)) for x in test.rows]
