"""
Tabular data agent package

Dataset ingestion, one-hot encoding, class balancing and train/test splitting.
"""

from .dataset import (
    Dataset,
    FeatureKind,
    FeatureSchema,
    TaskKind,
    balance_downsample,
    compute_schema,
    dataset_from_dict,
    dataset_to_dict,
    load_csv,
    load_dataset,
    save_dataset,
    train_test_split,
)

__all__ = [
    "Dataset",
    "FeatureKind",
    "FeatureSchema",
    "TaskKind",
    "balance_downsample",
    "compute_schema",
    "dataset_from_dict",
    "dataset_to_dict",
    "load_csv",
    "load_dataset",
    "save_dataset",
    "train_test_split",
]
