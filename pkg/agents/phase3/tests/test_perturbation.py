#!/usr/bin/env python3
"""
Test suite for the perturbation fidelity agent (Phase 3)
"""

import math

import numpy as np
import pytest

from agents.explainers.tree_shapley import TreeShapleyExplainer
from agents.models.trees import DecisionTree, Leaf
from agents.phase3.perturbation import (
    EMPTY_EXPLANATION,
    EMPTY_EXPLANATION_FEATURES,
    NO_VIOLABLE_BOUNDS,
    ZERO_OUTPUT,
    Phase3Params,
    PerturbationMode,
    build_perturbation_set,
    contrary_fidelity,
    perturb_contrary,
    perturb_supporting,
    relevant_intervals,
    run_phase3,
    supporting_fidelity,
)
from agents.shared.testing_framework import StubExplainer
from agents.tabular.dataset import FeatureKind, FeatureSchema, TaskKind
from shared.utils.exceptions import DataError, ExplainerError

UNIT = FeatureSchema("x", FeatureKind.NUMERIC, 0.0, 1.0, 0.29, (0.25, 0.5, 0.75))
FLAG = FeatureSchema("c=a", FeatureKind.BINARY_INDICATOR, 0.0, 1.0, 0.5, (0.0, 1.0, 1.0), "c")


class TestSupportingPerturbation:
    """Draws inside the relevant intervals."""

    def test_draws_stay_inside(self):
        rng = np.random.default_rng(0)
        x = np.array([0.4, 0.1])
        intervals = {0: (0.2, 0.6), 1: (-math.inf, 0.3)}
        for _ in range(1000):
            row, kept = perturb_supporting(x, intervals, (UNIT, UNIT), rng)
            assert 0.2 < row[0] <= 0.6
            assert 0.0 < row[1] <= 0.3
            assert kept == frozenset()

    def test_unselected_features_keep_their_value(self):
        x = np.array([0.4, 0.1, 0.9])
        row, _ = perturb_supporting(x, {1: (0.0, 0.5)}, (UNIT, UNIT, UNIT), np.random.default_rng(1))
        assert row[0] == 0.4 and row[2] == 0.9

    def test_binary_and_degenerate_features_are_kept(self):
        x = np.array([1.0, 0.5])
        row, kept = perturb_supporting(x, {0: (1.0, 1.0), 1: (0.5, 0.5)}, (FLAG, UNIT), np.random.default_rng(2))
        assert row.tolist() == [1.0, 0.5]
        assert kept == {0, 1}


class TestContraryPerturbation:
    """Draws just outside the relevant intervals."""

    def test_draws_land_within_the_margin(self):
        rng = np.random.default_rng(3)
        x = np.array([0.4])
        sides = set()
        for _ in range(1000):
            row, skipped = perturb_contrary(x, {0: (0.2, 0.6)}, (UNIT,), rng, margin_fraction=0.05)
            v = row[0]
            assert (0.6 < v <= 0.65 + 1e-12) or (0.15 - 1e-12 <= v < 0.2)
            sides.add(v > 0.6)
            assert skipped == frozenset()
        assert sides == {True, False}

    def test_one_sided_interval(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            row, _ = perturb_contrary(np.array([0.1]), {0: (-math.inf, 0.3)}, (UNIT,), rng)
            assert 0.3 < row[0] <= 0.35 + 1e-12

    def test_binary_feature_flips(self):
        row, skipped = perturb_contrary(np.array([1.0]), {0: (1.0, 1.0)}, (FLAG,), np.random.default_rng(5))
        assert row[0] == 0.0
        assert skipped == frozenset()

    def test_unbounded_interval_is_skipped(self):
        row, skipped = perturb_contrary(np.array([0.4]), {0: (-math.inf, math.inf)}, (UNIT,),
                                        np.random.default_rng(6))
        assert row[0] == 0.4
        assert skipped == {0}

    def test_perturbation_set(self):
        x = np.array([0.4, 0.7])
        intervals = {0: (0.2, 0.6), 1: (-math.inf, math.inf)}
        pset = build_perturbation_set(x, intervals, (UNIT, UNIT), PerturbationMode.CONTRARY, 7,
                                      np.random.default_rng(7))
        assert pset.as_rows().shape == (7, 2)
        assert pset.perturbed_features == {0}
        assert pset.skipped_features == {1}
        assert np.all(pset.as_rows()[:, 1] == 0.7)


class TestFidelityScores:
    """Relative output change."""

    def test_supporting_arithmetic(self):
        assert supporting_fidelity(2.0, [2.0, 1.0]) == pytest.approx(0.75)

    def test_contrary_arithmetic(self):
        assert contrary_fidelity(0.5, [0.25, 1.0]) == pytest.approx(0.75)

    def test_unchanged_outputs(self):
        assert supporting_fidelity(0.8, [0.8] * 5) == 1.0
        assert contrary_fidelity(0.8, [0.8] * 5) == 0.0

    def test_supporting_is_one_minus_relative_change(self):
        rng = np.random.default_rng(8)
        y = 0.6
        ys = rng.uniform(0.0, 1.0, size=10)
        assert supporting_fidelity(y, ys) == pytest.approx(1.0 - contrary_fidelity(y, ys))

    def test_zero_output(self):
        with pytest.raises(DataError):
            supporting_fidelity(0.0, [0.1])
        with pytest.raises(DataError):
            contrary_fidelity(1e-12, [0.1])


class TestIntervals:
    """Relevant interval selection."""

    def test_stored_bins_are_returned_unchanged(self, framework):
        stored = {0: (0.25, 0.5), 1: (-math.inf, 0.75)}
        explainer = StubExplainer(framework.stump(), (0.3, 0.2), stored)
        explanation = explainer.explain([0.3, 0.6])
        assert relevant_intervals(explanation, [0, 1], None, explainer, np.array([0.3, 0.6]), (UNIT, UNIT)) == stored

    def test_weight_only_without_bin_size(self, framework):
        explainer = StubExplainer(framework.stump(), (0.3, 0.2))
        with pytest.raises(ExplainerError):
            relevant_intervals(explainer.explain([0.3, 0.6]), [0], None, explainer, np.array([0.3, 0.6]),
                               (UNIT, UNIT))

    @pytest.mark.parametrize("kwargs", [{"optimal_d": 0}, {"optimal_d": 10}, {"optimal_d": 3, "optimal_p": 1.0},
                                        {"optimal_d": 3, "perturbation_repeats": 0},
                                        {"optimal_d": 3, "margin_fraction": -0.1}])
    def test_params_validation(self, kwargs):
        with pytest.raises(DataError):
            Phase3Params(**kwargs)


class TestRunPhase3:
    """Per-instance fidelity and exclusions."""

    def test_constant_model(self, framework):
        tree = DecisionTree(Leaf(0.7, 10), TaskKind.CLASSIFICATION, 2)
        explainer = StubExplainer(tree, (0.3, 0.2), {0: (0.2, 0.6), 1: (0.1, 0.9)})
        data = framework.synthetic_dataset(rows=10, features=2)
        report = run_phase3(tree, explainer, data, Phase3Params(optimal_d=9))
        assert report.mean_supporting == 1.0
        assert report.mean_contrary == 0.0
        assert all(r.selected_features == (0,) for r in report.records)

    def test_zero_output_is_excluded_in_both_modes(self, framework):
        tree = DecisionTree(Leaf(0.0, 10), TaskKind.REGRESSION, 2)
        explainer = StubExplainer(tree, (0.3, 0.2), {0: (0.2, 0.6), 1: (0.1, 0.9)})
        data = framework.synthetic_dataset(rows=4, features=2, task=TaskKind.REGRESSION)
        report = run_phase3(tree, explainer, data, Phase3Params(optimal_d=5))
        assert report.mean_supporting is None and report.mean_contrary is None
        assert report.excluded == {"supporting": {ZERO_OUTPUT: 4}, "contrary": {ZERO_OUTPUT: 4}}

    def test_zero_explanation_is_excluded(self, framework):
        tree = framework.stump()
        data = framework.synthetic_dataset(rows=3, features=2)
        report = run_phase3(tree, StubExplainer(tree, (0.0, 0.0)), data, Phase3Params(optimal_d=5, optimal_p=0.1))
        assert report.excluded["supporting"] == {EMPTY_EXPLANATION: 3}

    def test_empty_selection_is_excluded(self, framework):
        tree = framework.stump()
        data = framework.synthetic_dataset(rows=3, features=2)
        report = run_phase3(tree, StubExplainer(tree, (0.3, 0.2)), data, Phase3Params(optimal_d=5),
                            selector=lambda x, explanation: {})
        assert report.excluded["contrary"] == {EMPTY_EXPLANATION_FEATURES: 3}

    def test_unbounded_intervals_exclude_contrary_only(self, framework):
        tree = DecisionTree(Leaf(0.6, 10), TaskKind.CLASSIFICATION, 2)
        explainer = StubExplainer(tree, (0.3, 0.0), {0: (-math.inf, math.inf), 1: (-math.inf, math.inf)})
        data = framework.synthetic_dataset(rows=5, features=2)
        report = run_phase3(tree, explainer, data, Phase3Params(optimal_d=1))
        assert report.mean_supporting == 1.0
        assert report.mean_contrary is None
        assert report.excluded == {"supporting": {}, "contrary": {NO_VIOLABLE_BOUNDS: 5}}

    def test_weight_bins_keep_a_stump_on_its_side(self, framework):
        tree = framework.stump(threshold=0.5)
        data = framework.synthetic_dataset(rows=20, features=2)
        report = run_phase3(tree, TreeShapleyExplainer(tree), data,
                            Phase3Params(optimal_d=1, optimal_p=0.1, perturbation_repeats=5), seed=2)
        assert [r.supporting for r in report.records] == [1.0] * 20

    def test_deterministic_and_job_independent(self, framework):
        ensemble = framework.random_ensemble(num_features=3, num_trees=3)
        data = framework.synthetic_dataset(rows=8, features=3)
        explainer = TreeShapleyExplainer(ensemble)
        params = Phase3Params(optimal_d=3, optimal_p=0.1, perturbation_repeats=4, grid_points=20)
        first = run_phase3(ensemble, explainer, data, params, seed=11, jobs=1)
        second = run_phase3(ensemble, explainer, data, params, seed=11, jobs=1)
        parallel = run_phase3(ensemble, explainer, data, params, seed=11, jobs=2)
        assert first.to_dict() == second.to_dict() == parallel.to_dict()

    def test_report_frame(self, framework):
        tree = DecisionTree(Leaf(0.7, 10), TaskKind.CLASSIFICATION, 2)
        explainer = StubExplainer(tree, (0.3, 0.2), {0: (0.2, 0.6), 1: (0.1, 0.9)})
        frame = run_phase3(tree, explainer, framework.synthetic_dataset(rows=4, features=2),
                           Phase3Params(optimal_d=9)).to_frame()
        assert framework.validate_dataframe(frame, ["instance_id", "supporting", "contrary", "y_original"])
        assert frame["instance_id"].tolist() == [0, 1, 2, 3]
