#!/usr/bin/env python3
"""
Test suite for the tabular data agent

Tests CSV ingestion, one-hot encoding, class balancing and train/test splitting.
"""

import numpy as np
import pytest

from agents.tabular.dataset import (
    Dataset,
    FeatureKind,
    FeatureSchema,
    TaskKind,
    balance_downsample,
    compute_schema,
    load_csv,
    load_dataset,
    save_dataset,
    train_test_split,
)
from shared.utils.exceptions import DataError


def numeric_dataset(rows: np.ndarray, targets: np.ndarray, task=TaskKind.CLASSIFICATION) -> Dataset:
    template = [FeatureSchema(f"x{j}", FeatureKind.NUMERIC, 0.0, 0.0, 0.0, (0.0, 0.0, 0.0))
                for j in range(rows.shape[1])]
    return Dataset(compute_schema(rows, template), rows, targets, task)


class TestLoadCsv:
    """CSV ingestion and encoding."""

    def test_numeric_and_categorical_columns(self, framework, tmp_path):
        path = framework.write_synthetic_csv(tmp_path / "data.csv", rows=40)
        data = load_csv(path, "label", TaskKind.CLASSIFICATION)

        assert data.num_rows == 40
        assert data.feature_names[:4] == ["x0", "x1", "x2", "x3"]
        indicators = [f for f in data.schema if f.is_binary]
        assert {f.name for f in indicators} <= {"colour=blue", "colour=green", "colour=red"}
        assert all(f.source_categorical == "colour" for f in indicators)
        # exactly one indicator is set per row
        indicator_columns = [j for j, f in enumerate(data.schema) if f.is_binary]
        assert np.all(data.rows[:, indicator_columns].sum(axis=1) == 1.0)

    def test_text_labels_map_last_label_to_one(self, framework, tmp_path):
        path = framework.write_synthetic_csv(tmp_path / "data.csv", rows=40)
        data = load_csv(path, "label", TaskKind.CLASSIFICATION)
        raw = (tmp_path / "data.csv").read_text().splitlines()[1:]
        expected = [1.0 if line.rsplit(",", 1)[1] == "yes" else 0.0 for line in raw]
        assert data.targets.tolist() == expected

    def test_positive_label_override(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text("a,y\n1,cat\n2,dog\n3,cat\n")
        data = load_csv(path, "y", TaskKind.CLASSIFICATION, positive_label="cat")
        assert data.targets.tolist() == [1.0, 0.0, 1.0]

    def test_unknown_positive_label(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text("a,y\n1,cat\n2,dog\n")
        with pytest.raises(DataError, match="bird"):
            load_csv(path, "y", TaskKind.CLASSIFICATION, positive_label="bird")

    def test_numeric_binary_targets_pass_through(self, tmp_path):
        path = tmp_path / "binary.csv"
        path.write_text("a,b,y\n1.5,2,0\n2.5,3,1\n0.5,1,1\n")
        data = load_csv(path, "y", TaskKind.CLASSIFICATION)
        assert data.targets.tolist() == [0.0, 1.0, 1.0]
        assert data.rows[0].tolist() == [1.5, 2.0]

    def test_more_than_two_classes(self, tmp_path):
        path = tmp_path / "multi.csv"
        path.write_text("a,y\n1,x\n2,y\n3,z\n")
        with pytest.raises(DataError, match="binary"):
            load_csv(path, "y", TaskKind.CLASSIFICATION)

    def test_missing_value_names_row_and_column(self, tmp_path):
        path = tmp_path / "missing.csv"
        path.write_text("a,b,y\n1,2,0\n3,,1\n")
        with pytest.raises(DataError, match=r"'b' at row 2"):
            load_csv(path, "y", TaskKind.CLASSIFICATION)

    def test_mixed_column_rejected(self, tmp_path):
        path = tmp_path / "mixed.csv"
        path.write_text("a,y\n1,0\nabc,1\n")
        with pytest.raises(DataError, match="row 2"):
            load_csv(path, "y", TaskKind.CLASSIFICATION)

    def test_missing_target_column(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(DataError, match="target column"):
            load_csv(path, "y", TaskKind.CLASSIFICATION)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_csv(tmp_path / "nope.csv", "y", TaskKind.CLASSIFICATION)

    def test_header_only_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("a,y\n")
        with pytest.raises(DataError):
            load_csv(path, "y", TaskKind.CLASSIFICATION)

    def test_dropped_columns_and_separator(self, tmp_path):
        path = tmp_path / "hours.csv"
        path.write_text("instant;dteday;hr;casual;cnt\n1;2011-01-01;0;3;16\n2;2011-01-01;1;8;40\n")
        data = load_csv(path, "cnt", TaskKind.REGRESSION, drop_columns=("instant", "dteday", "casual"),
                        separator=";")
        assert [f.name for f in data.schema] == ["hr"]
        assert data.targets.tolist() == [16.0, 40.0]

    @pytest.mark.parametrize("drop, message", [(("registered",), "registered"), (("y",), "cannot be dropped")])
    def test_invalid_dropped_columns(self, tmp_path, drop, message):
        path = tmp_path / "data.csv"
        path.write_text("a,b,y\n1,2,0\n2,3,1\n")
        with pytest.raises(DataError, match=message):
            load_csv(path, "y", TaskKind.CLASSIFICATION, drop_columns=drop)

    def test_regression_targets(self, framework, tmp_path):
        path = framework.write_synthetic_csv(tmp_path / "reg.csv", rows=30, task="regression",
                                             with_categorical=False)
        data = load_csv(path, "label", TaskKind.REGRESSION)
        assert data.task is TaskKind.REGRESSION
        assert data.num_features == 4
        assert np.all(np.isfinite(data.targets))

    def test_schema_statistics(self, tmp_path):
        path = tmp_path / "stats.csv"
        path.write_text("a,y\n1,0\n2,1\n3,0\n4,1\n5,0\n")
        feature = load_csv(path, "y", TaskKind.CLASSIFICATION).schema[0]
        assert feature.observed_min == 1.0
        assert feature.observed_max == 5.0
        assert feature.quartile_bounds == (2.0, 3.0, 4.0)
        assert feature.observed_std == pytest.approx(np.std([1, 2, 3, 4, 5]))


class TestDatasetInvariants:
    """Dataset and schema validation."""

    def test_quartiles_outside_range(self):
        with pytest.raises(DataError):
            FeatureSchema("f", FeatureKind.NUMERIC, 0.0, 1.0, 0.5, (0.2, 0.1, 0.9))

    def test_classification_targets_must_be_binary(self):
        rows = np.zeros((2, 1))
        with pytest.raises(DataError):
            numeric_dataset(rows, np.array([0.0, 2.0]))

    def test_arrays_are_read_only(self):
        data = numeric_dataset(np.arange(6.0).reshape(3, 2), np.array([0.0, 1.0, 0.0]))
        with pytest.raises(ValueError):
            data.rows[0, 0] = 99.0

    def test_save_and_load(self, tmp_path):
        data = numeric_dataset(np.arange(6.0).reshape(3, 2), np.array([0.0, 1.0, 0.0]))
        loaded = load_dataset(save_dataset(data, tmp_path / "d.json"))
        assert loaded.schema == data.schema
        assert np.array_equal(loaded.rows, data.rows)
        assert np.array_equal(loaded.targets, data.targets)


class TestBalanceAndSplit:
    """Class balancing and train/test splitting."""

    @pytest.fixture
    def diabetes_shaped(self):
        rng = np.random.default_rng(3)
        targets = np.zeros(768)
        targets[rng.choice(768, size=268, replace=False)] = 1.0
        return numeric_dataset(rng.normal(size=(768, 8)), targets)

    def test_balance_equalizes_classes(self, diabetes_shaped):
        balanced = balance_downsample(diabetes_shaped, seed=42)
        assert balanced.class_counts() == {0: 268, 1: 268}

    def test_balance_keeps_original_order(self, diabetes_shaped):
        balanced = balance_downsample(diabetes_shaped, seed=42)
        positions = [int(np.flatnonzero((diabetes_shaped.rows == row).all(axis=1))[0]) for row in balanced.rows[:20]]
        assert positions == sorted(positions)

    def test_balance_then_split_sizes(self, diabetes_shaped):
        train, test = train_test_split(balance_downsample(diabetes_shaped, seed=42), 0.7, seed=42)
        assert train.num_rows == 375
        assert test.num_rows == 161

    def test_balance_rejects_regression(self):
        data = numeric_dataset(np.zeros((3, 1)), np.array([1.0, 2.0, 3.0]), TaskKind.REGRESSION)
        with pytest.raises(DataError):
            balance_downsample(data, seed=0)

    def test_balance_needs_both_classes(self):
        data = numeric_dataset(np.arange(3.0)[:, None], np.array([1.0, 1.0, 1.0]))
        with pytest.raises(DataError):
            balance_downsample(data, seed=0)

    def test_split_partitions_rows(self, framework):
        data = framework.synthetic_dataset(rows=50)
        train, test = train_test_split(data, 0.7, seed=1)
        assert (train.num_rows, test.num_rows) == (35, 15)
        combined = np.vstack([train.rows, test.rows])
        assert sorted(map(tuple, combined)) == sorted(map(tuple, data.rows))

    def test_split_is_deterministic(self, framework):
        data = framework.synthetic_dataset(rows=50)
        first, _ = train_test_split(data, 0.7, seed=5)
        second, _ = train_test_split(data, 0.7, seed=5)
        assert np.array_equal(first.rows, second.rows)

    def test_split_statistics_come_from_train(self, framework):
        data = framework.synthetic_dataset(rows=50)
        train, test = train_test_split(data, 0.7, seed=1)
        assert train.schema == test.schema
        assert train.schema[0].observed_max == train.rows[:, 0].max()

    @pytest.mark.parametrize("fraction", [0.0, 1.0, 1.5])
    def test_split_fraction_bounds(self, framework, fraction):
        with pytest.raises(DataError):
            train_test_split(framework.synthetic_dataset(rows=10), fraction, seed=0)

    def test_split_leaving_empty_partition(self, framework):
        with pytest.raises(DataError):
            train_test_split(framework.synthetic_dataset(rows=3), 0.2, seed=0)
