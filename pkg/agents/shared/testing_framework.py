#!/usr/bin/env python3
"""
Fidelity Testing Framework

Shared testing utilities for all agents: temporary run directories,
synthetic CSV files and datasets, hand-built and random trees with cover
statistics, and a fixed-output explainer stub.
"""

import json
import logging
import shutil
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from sklearn.datasets import load_breast_cancer

from agents.explainers.base import BaseExplainer, Explanation, ExplainerConfig, ExplainerKind
from agents.models.trees import DecisionTree, Leaf, Node, Split, TreeEnsemble
from agents.tabular.dataset import Dataset, FeatureKind, FeatureSchema, TaskKind, compute_schema
from shared.utils.reporting import Interval


class StubExplainer(BaseExplainer):
    """Returns the same weights and intervals for every instance"""

    kind = ExplainerKind.SURROGATE
    deterministic = True

    def __init__(self, model, weights: Sequence[float], intervals: Optional[Mapping[int, Interval]] = None):
        super().__init__(model, ExplainerConfig(kind=ExplainerKind.SURROGATE, k_repeats=1))
        self.weights = tuple(weights)
        self.intervals = None if intervals is None else dict(intervals)
        self.provides_intervals = intervals is not None

    def explain(self, x, seed: int = 0) -> Explanation:
        x = self._check_instance(x)
        return Explanation(weights=self.weights, intervals=self.intervals,
                           explained_output=self.model.predict(x))


class FidelityTestFramework:
    """
    Standardized testing framework for all agents.

    Provides temporary environments, synthetic data and model builders and
    validation helpers for consistent agent testing.
    """

    def __init__(self, agent_name: str, seed: int = 0):
        """Initialize testing framework for specific agent."""
        self.agent_name = agent_name
        self.logger = logging.getLogger(f"fidelity_agents.tests.{agent_name}")
        self.rng = np.random.default_rng(seed)
        self.temp_dir = None

    def setup_test_environment(self) -> Path:
        """Set up temporary test environment."""
        self.temp_dir = tempfile.mkdtemp(prefix=f"fidelity_test_{self.agent_name}_")
        self.logger.debug(f"Test environment created: {self.temp_dir}")
        return Path(self.temp_dir)

    def cleanup_test_environment(self):
        """Clean up temporary test environment."""
        if self.temp_dir:
            shutil.rmtree(self.temp_dir, ignore_errors=True)
            self.temp_dir = None

    def create_mock_config(self, config_data: Dict[str, Any], name: str = "test_config.json") -> Path:
        """Write a JSON config document into the test environment."""
        if not self.temp_dir:
            self.setup_test_environment()
        config_path = Path(self.temp_dir) / name
        with open(config_path, 'w', encoding='utf-8') as f:
            json.dump(config_data, f, indent=2)
        return config_path

    def write_synthetic_csv(self, path: Path, rows: int = 50, task: str = "classification",
                            with_categorical: bool = True) -> Path:
        """
        CSV with four numeric columns, an optional text column and a target

        Classification targets are "yes"/"no" labels driven by x0 and x2;
        regression targets are a noisy linear function kept away from zero.
        """
        x = self.rng.uniform(0.0, 10.0, size=(rows, 4)).round(3)
        frame = pd.DataFrame(x, columns=["x0", "x1", "x2", "x3"])
        if with_categorical:
            frame["colour"] = self.rng.choice(["red", "green", "blue"], size=rows)
        if task == "classification":
            signal = x[:, 0] + 0.5 * x[:, 2] + self.rng.normal(0.0, 1.0, size=rows)
            frame["label"] = np.where(signal > 7.5, "yes", "no")
        else:
            frame["label"] = (10.0 + 2.0 * x[:, 0] - x[:, 1] + self.rng.normal(0.0, 0.5, size=rows)).round(3)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)
        return path

    def write_breast_cancer_csv(self, path: Path) -> Path:
        """Wisconsin breast cancer data bundled with scikit-learn, diagnosis as M/B"""
        bunch = load_breast_cancer(as_frame=True)
        frame = bunch.data.copy()
        frame["diagnosis"] = np.where(bunch.target.to_numpy() == 0, "M", "B")
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)
        return path

    def write_diabetes_like_csv(self, path: Path, rows: int = 768, positives: int = 268) -> Path:
        """
        Pima-shaped CSV: eight numeric columns and a 0/1 Outcome

        The outcome marks the positives rows with the highest noisy risk
        score, so class counts match the original file.
        """
        rng = self.rng
        frame = pd.DataFrame({
            "Pregnancies": rng.poisson(3.8, size=rows),
            "Glucose": rng.normal(121.0, 30.0, size=rows).clip(44, 199).round(),
            "BloodPressure": rng.normal(69.0, 12.0, size=rows).clip(24, 122).round(),
            "SkinThickness": rng.normal(29.0, 10.0, size=rows).clip(7, 99).round(),
            "Insulin": rng.gamma(2.0, 60.0, size=rows).clip(14, 846).round(),
            "BMI": rng.normal(32.0, 7.0, size=rows).clip(18, 67).round(1),
            "DiabetesPedigreeFunction": rng.gamma(2.0, 0.24, size=rows).clip(0.078, 2.42).round(3),
            "Age": (21 + rng.gamma(2.0, 6.0, size=rows)).clip(21, 81).round(),
        })
        risk = (0.035 * frame["Glucose"] + 0.09 * frame["BMI"] + 0.03 * frame["Age"]
                + 0.1 * frame["Pregnancies"] + rng.normal(0.0, 1.0, size=rows))
        outcome = np.zeros(rows, dtype=int)
        outcome[np.argsort(-risk.to_numpy(), kind="stable")[:positives]] = 1
        frame["Outcome"] = outcome
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)
        return path

    def synthetic_dataset(self, rows: int = 50, features: int = 4,
                          task: TaskKind = TaskKind.CLASSIFICATION) -> Dataset:
        """Uniform [0, 1) features; targets depend on the first two features"""
        x = self.rng.uniform(0.0, 1.0, size=(rows, features))
        if task is TaskKind.CLASSIFICATION:
            targets = (x[:, 0] + 0.5 * x[:, min(1, features - 1)] > 0.75).astype(float)
        else:
            targets = 1.0 + 3.0 * x[:, 0] - x[:, min(1, features - 1)]
        template = [FeatureSchema(f"x{j}", FeatureKind.NUMERIC, 0.0, 0.0, 0.0, (0.0, 0.0, 0.0))
                    for j in range(features)]
        return Dataset(compute_schema(x, template), x, targets, task)

    @staticmethod
    def stump(feature: int = 0, threshold: float = 0.5, left: float = 0.2, right: float = 0.8,
              num_features: int = 2, covers=(60, 40), task: TaskKind = TaskKind.CLASSIFICATION) -> DecisionTree:
        """Single split: left leaf for x[feature] <= threshold"""
        root = Split(feature, threshold, Leaf(left, covers[0]), Leaf(right, covers[1]), covers[0] + covers[1])
        return DecisionTree(root, task, num_features)

    @staticmethod
    def symmetric_tree(num_features: int = 2) -> DecisionTree:
        """Depth-2 tree over x0 and x1 with equal covers; leaf value is x0 + x1 bits"""
        def inner(high: float) -> Split:
            return Split(1, 0.5, Leaf(high, 25), Leaf(high + 1.0, 25), 50)

        root = Split(0, 0.5, inner(0.0), inner(1.0), 100)
        return DecisionTree(root, TaskKind.REGRESSION, num_features)

    def random_tree(self, num_features: int = 5, max_depth: int = 4, cover: int = 200,
                    task: TaskKind = TaskKind.REGRESSION) -> DecisionTree:
        """Random tree over [0, 1) features with consistent integer covers"""
        def grow(depth: int, n: int) -> Node:
            if depth == 0 or n < 2 or self.rng.random() < 0.15:
                value = self.rng.uniform(0.05, 0.95) if task is TaskKind.CLASSIFICATION else self.rng.normal()
                return Leaf(float(value), n)
            left = int(self.rng.integers(1, n))
            return Split(int(self.rng.integers(num_features)), float(self.rng.uniform(0.05, 0.95)),
                         grow(depth - 1, left), grow(depth - 1, n - left), n)

        return DecisionTree(grow(max_depth, cover), task, num_features)

    def random_ensemble(self, num_features: int = 5, num_trees: int = 4, max_depth: int = 3,
                        task: TaskKind = TaskKind.CLASSIFICATION) -> TreeEnsemble:
        trees = tuple(self.random_tree(num_features, max_depth) for _ in range(num_trees))
        return TreeEnsemble(trees, learning_rate=0.3, base_score=float(self.rng.normal(0.0, 0.5)),
                            task=task, num_features=num_features)

    def random_instances(self, count: int, num_features: int) -> np.ndarray:
        return self.rng.uniform(0.0, 1.0, size=(count, num_features))

    def validate_dataframe(self, df: pd.DataFrame, expected_columns: List[str]) -> bool:
        """Validate DataFrame structure and content."""
        if df is None or df.empty:
            self.logger.error("DataFrame is None or empty")
            return False

        missing_columns = set(expected_columns) - set(df.columns)
        if missing_columns:
            self.logger.error(f"Missing required columns: {missing_columns}")
            return False
        return True


__all__ = ["FidelityTestFramework", "StubExplainer"]
