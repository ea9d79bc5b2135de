"""
Tabular datasets

Typed, immutable datasets with per-feature training statistics. Categorical
columns are one-hot encoded at load time; missing values are rejected.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn import model_selection

from shared.utils.exceptions import DataError
from shared.utils.reporting import read_json, write_json

logger = logging.getLogger("fidelity_agents.tabular")

MISSING_TOKENS = {"", "na", "nan", "null", "none", "?"}


class TaskKind(str, Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


class FeatureKind(str, Enum):
    NUMERIC = "numeric"
    BINARY_INDICATOR = "binary_indicator"


@dataclass(frozen=True)
class FeatureSchema:
    """One feature column with statistics observed on the training rows"""
    name: str
    kind: FeatureKind
    observed_min: float
    observed_max: float
    observed_std: float
    quartile_bounds: Tuple[float, float, float]
    source_categorical: Optional[str] = None

    def __post_init__(self):
        q1, q2, q3 = self.quartile_bounds
        if not self.observed_min <= q1 <= q2 <= q3 <= self.observed_max:
            raise DataError(f"Feature {self.name}: quartile bounds outside observed range")

    @property
    def value_range(self) -> float:
        return self.observed_max - self.observed_min

    @property
    def is_binary(self) -> bool:
        return self.kind is FeatureKind.BINARY_INDICATOR

    def with_statistics(self, column: np.ndarray) -> "FeatureSchema":
        """Same feature, statistics recomputed from a column of values"""
        q1, q2, q3 = np.percentile(column, [25, 50, 75])
        return FeatureSchema(
            name=self.name,
            kind=self.kind,
            observed_min=float(np.min(column)),
            observed_max=float(np.max(column)),
            observed_std=float(np.std(column)),
            quartile_bounds=(float(q1), float(q2), float(q3)),
            source_categorical=self.source_categorical,
        )


@dataclass(frozen=True)
class Dataset:
    """
    Rows (instances x features), targets and task

    Arrays are stored as read-only copies.
    """
    schema: Tuple[FeatureSchema, ...]
    rows: np.ndarray
    targets: np.ndarray
    task: TaskKind

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float, copy=True)
        targets = np.array(self.targets, dtype=float, copy=True)
        if rows.ndim != 2:
            rows = rows.reshape(len(targets), len(self.schema))
        if rows.shape[1] != len(self.schema):
            raise DataError(f"Row width {rows.shape[1]} does not match schema length {len(self.schema)}")
        if len(targets) != rows.shape[0]:
            raise DataError(f"{len(targets)} targets for {rows.shape[0]} rows")
        task = TaskKind(self.task)
        if task is TaskKind.CLASSIFICATION and not np.isin(targets, (0.0, 1.0)).all():
            raise DataError("Classification targets must be 0 or 1")
        rows.flags.writeable = False
        targets.flags.writeable = False
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "task", task)

    @property
    def num_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def num_features(self) -> int:
        return len(self.schema)

    @property
    def feature_names(self) -> List[str]:
        return [feature.name for feature in self.schema]

    def subset(self, indices: Sequence[int]) -> "Dataset":
        """Rows at the given positions, in the given order, same schema"""
        indices = np.asarray(indices, dtype=int)
        return Dataset(self.schema, self.rows[indices], self.targets[indices], self.task)

    def with_schema(self, schema: Sequence[FeatureSchema]) -> "Dataset":
        return Dataset(tuple(schema), self.rows, self.targets, self.task)

    def class_counts(self) -> Dict[int, int]:
        values, counts = np.unique(self.targets, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}


def compute_schema(rows: np.ndarray, template: Sequence[FeatureSchema]) -> Tuple[FeatureSchema, ...]:
    """
    Recompute the statistics of every feature from a row matrix

    Args:
        rows: Non-empty row matrix
        template: Schema providing names, kinds and categorical sources

    Returns:
        New schema with min, max, std (population) and linear-interpolation quartiles
    """
    rows = np.asarray(rows, dtype=float)
    if rows.shape[0] == 0:
        raise DataError("Cannot compute feature statistics of an empty dataset")
    return tuple(feature.with_statistics(rows[:, j]) for j, feature in enumerate(template))


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING_TOKENS


def _parse_numeric(column: pd.Series) -> pd.Series:
    return pd.to_numeric(column.str.strip(), errors="coerce")


def _encode_column(name: str, column: pd.Series) -> Tuple[np.ndarray, List[FeatureSchema]]:
    """Encode one feature column as numeric passthrough or one-hot indicators"""
    missing = column.map(_is_missing)
    if missing.any():
        row = int(np.flatnonzero(missing.to_numpy())[0]) + 1
        raise DataError(f"Missing value in column '{name}' at row {row}")

    parsed = _parse_numeric(column)
    unparsed = parsed.isna().to_numpy()
    placeholder = FeatureSchema(name, FeatureKind.NUMERIC, 0.0, 0.0, 0.0, (0.0, 0.0, 0.0))

    if not unparsed.any():
        return parsed.to_numpy(dtype=float)[:, None], [placeholder]

    if unparsed.all():
        dummies = pd.get_dummies(column.str.strip(), prefix=name, prefix_sep="=", dtype=float)
        schema = [
            FeatureSchema(str(col), FeatureKind.BINARY_INDICATOR, 0.0, 0.0, 0.0, (0.0, 0.0, 0.0),
                          source_categorical=name)
            for col in dummies.columns
        ]
        logger.debug(f"One-hot encoded '{name}' into {len(schema)} indicators")
        return dummies.to_numpy(dtype=float), schema

    row = int(np.flatnonzero(unparsed)[0]) + 1
    raise DataError(
        f"Unparseable value '{column.iloc[row - 1]}' in numeric column '{name}' at row {row}"
    )


def _encode_targets(column: pd.Series, task: TaskKind, positive_label: Optional[str]) -> np.ndarray:
    missing = column.map(_is_missing)
    if missing.any():
        row = int(np.flatnonzero(missing.to_numpy())[0]) + 1
        raise DataError(f"Missing target value at row {row}")

    parsed = _parse_numeric(column)
    if task is TaskKind.REGRESSION:
        if parsed.isna().any():
            row = int(np.flatnonzero(parsed.isna().to_numpy())[0]) + 1
            raise DataError(f"Unparseable regression target '{column.iloc[row - 1]}' at row {row}")
        return parsed.to_numpy(dtype=float)

    labels = column.str.strip()
    if positive_label is None and not parsed.isna().any() and parsed.isin([0, 1]).all():
        return parsed.to_numpy(dtype=float)

    distinct = labels.unique().tolist()
    if len(distinct) > 2:
        raise DataError(f"Only binary classification is supported; found {len(distinct)} classes")
    if positive_label is None:
        if not parsed.isna().any():
            distinct.sort(key=float)
        else:
            distinct.sort()
        positive_label = distinct[-1]
    elif str(positive_label) not in distinct:
        raise DataError(f"Positive label '{positive_label}' not found among target values {distinct}")
    logger.debug(f"Target label '{positive_label}' mapped to class 1")
    return (labels == str(positive_label)).to_numpy(dtype=float)


def load_csv(path: Path, target_column: str, task: TaskKind,
             positive_label: Optional[str] = None, drop_columns: Sequence[str] = (),
             separator: str = ",") -> Dataset:
    """
    Load a CSV file into a Dataset

    Non-target columns where every cell parses as a number are passed through;
    columns where no cell parses are one-hot encoded into "column=value"
    indicators. Statistics are computed from all loaded rows.

    Args:
        path: CSV file with a header row
        target_column: Name of the target column
        task: classification or regression
        positive_label: Classification label mapped to 1 (text labels only)
        drop_columns: Columns ignored entirely, such as identifiers or leaked targets
        separator: Field delimiter

    Returns:
        Loaded dataset
    """
    path = Path(path)
    task = TaskKind(task)
    if not path.exists():
        raise DataError(f"Data file not found: {path}")

    try:
        frame = pd.read_csv(path, sep=separator, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise DataError(f"{path}: empty file") from e
    except pd.errors.ParserError as e:
        raise DataError(f"{path}: {e}") from e

    if target_column not in frame.columns:
        raise DataError(f"{path}: target column '{target_column}' not found")
    if frame.empty:
        raise DataError(f"{path}: dataset has no rows")
    missing = [c for c in drop_columns if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: columns to drop not found: {', '.join(missing)}")
    if target_column in drop_columns:
        raise DataError(f"{path}: target column '{target_column}' cannot be dropped")

    blocks, schema = [], []
    for name in frame.columns:
        if name == target_column or name in drop_columns:
            continue
        try:
            values, features = _encode_column(str(name), frame[name])
        except DataError as e:
            raise DataError(f"{path}: {e}") from e
        blocks.append(values)
        schema.extend(features)
    if not schema:
        raise DataError(f"{path}: no feature columns besides the target")

    try:
        targets = _encode_targets(frame[target_column], task, positive_label)
    except DataError as e:
        raise DataError(f"{path}: {e}") from e

    rows = np.hstack(blocks)
    dataset = Dataset(compute_schema(rows, schema), rows, targets, task)
    logger.info(f"Loaded {path.name}: {dataset.num_rows} rows, {dataset.num_features} features")
    return dataset


def balance_downsample(dataset: Dataset, seed: int) -> Dataset:
    """
    Downsample the majority class to the minority-class count

    Majority rows are chosen uniformly at random without replacement; kept
    rows stay in their original order.
    """
    if dataset.task is not TaskKind.CLASSIFICATION:
        raise DataError("Balancing requires a classification dataset")
    positives = np.flatnonzero(dataset.targets == 1.0)
    negatives = np.flatnonzero(dataset.targets == 0.0)
    if len(positives) == 0 or len(negatives) == 0:
        raise DataError("Balancing requires both classes to be present")

    minority, majority = (positives, negatives) if len(positives) <= len(negatives) else (negatives, positives)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(majority, size=len(minority), replace=False)
    keep = np.sort(np.concatenate([minority, chosen]))
    logger.info(f"Balanced {dataset.num_rows} rows to {len(keep)} ({len(minority)} per class)")

    balanced = dataset.subset(keep)
    return balanced.with_schema(compute_schema(balanced.rows, balanced.schema))


def train_test_split(dataset: Dataset, train_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """
    Shuffle and partition a dataset

    The training partition holds floor(train_fraction * rows) rows. Feature
    statistics are recomputed from the training partition and copied to both.

    Args:
        dataset: Dataset to split
        train_fraction: Fraction of rows for training, strictly between 0 and 1
        seed: Shuffle seed

    Returns:
        (train, test)
    """
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"Train fraction must be strictly between 0 and 1, got {train_fraction}")
    n_train = int(math.floor(train_fraction * dataset.num_rows))
    if n_train < 1 or n_train >= dataset.num_rows:
        raise DataError(
            f"Train fraction {train_fraction} leaves an empty partition of {dataset.num_rows} rows"
        )

    train_idx, test_idx = model_selection.train_test_split(
        np.arange(dataset.num_rows), train_size=n_train, random_state=seed, shuffle=True
    )
    train = dataset.subset(train_idx)
    schema = compute_schema(train.rows, dataset.schema)
    logger.info(f"Split {dataset.num_rows} rows into {len(train_idx)} train / {len(test_idx)} test")
    return train.with_schema(schema), dataset.subset(test_idx).with_schema(schema)


def dataset_to_dict(dataset: Dataset) -> Dict[str, Any]:
    return {
        "schema": [
            {
                "name": f.name,
                "kind": f.kind.value,
                "observed_min": f.observed_min,
                "observed_max": f.observed_max,
                "observed_std": f.observed_std,
                "quartile_bounds": list(f.quartile_bounds),
                "source_categorical": f.source_categorical,
            }
            for f in dataset.schema
        ],
        "rows": dataset.rows.tolist(),
        "targets": dataset.targets.tolist(),
        "task": dataset.task.value,
    }


def dataset_from_dict(document: Dict[str, Any]) -> Dataset:
    try:
        schema = tuple(
            FeatureSchema(
                name=entry["name"],
                kind=FeatureKind(entry["kind"]),
                observed_min=float(entry["observed_min"]),
                observed_max=float(entry["observed_max"]),
                observed_std=float(entry["observed_std"]),
                quartile_bounds=tuple(float(q) for q in entry["quartile_bounds"]),
                source_categorical=entry.get("source_categorical"),
            )
            for entry in document["schema"]
        )
        rows = np.asarray(document["rows"], dtype=float).reshape(len(document["targets"]), len(schema))
        return Dataset(schema, rows, document["targets"], TaskKind(document["task"]))
    except (KeyError, TypeError) as e:
        raise DataError(f"Malformed dataset document: {e}") from e


def save_dataset(dataset: Dataset, path: Path) -> Path:
    return write_json(dataset_to_dict(dataset), path)


def load_dataset(path: Path) -> Dataset:
    return dataset_from_dict(read_json(path))
