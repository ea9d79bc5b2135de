"""
Accuracy and loss metrics for trained models
"""

from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional

import numpy as np
from sklearn.metrics import f1_score, log_loss, mean_absolute_error, mean_absolute_percentage_error, mean_squared_error

from agents.models.trees import Model
from agents.tabular.dataset import Dataset, TaskKind
from shared.utils.exceptions import ModelError

MAPE_ZERO_GUARD = 1e-9


@dataclass(frozen=True)
class AccuracyReport:
    f1: Optional[float] = None
    mae: Optional[float] = None
    mape: Optional[float] = None
    mape_skipped: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _check_task(model: Model, data: Dataset) -> None:
    if model.task is not data.task:
        raise ModelError(f"Model task {model.task.value} does not match dataset task {data.task.value}")
    if model.num_features != data.num_features:
        raise ModelError(f"Model width {model.num_features} does not match dataset width {data.num_features}")


def eval_accuracy(model: Model, test: Dataset) -> AccuracyReport:
    """
    F1 of class 1 at the 0.5 threshold for classification; MAE and MAPE for regression

    MAPE skips targets with magnitude below 1e-9 and reports how many were skipped.
    """
    _check_task(model, test)
    predictions = model.predict_rows(test.rows)
    if test.task is TaskKind.CLASSIFICATION:
        predicted = (predictions >= 0.5).astype(float)
        return AccuracyReport(f1=float(f1_score(test.targets, predicted, pos_label=1.0, zero_division=0)))

    usable = np.abs(test.targets) >= MAPE_ZERO_GUARD
    mape = None
    if usable.any():
        mape = float(mean_absolute_percentage_error(test.targets[usable], predictions[usable]))
    return AccuracyReport(
        mae=float(mean_absolute_error(test.targets, predictions)),
        mape=mape,
        mape_skipped=int((~usable).sum()),
    )


def training_loss(model: Model, data: Dataset) -> float:
    """Mean log-loss (classification) or mean squared error (regression)"""
    _check_task(model, data)
    predictions = model.predict_rows(data.rows)
    if data.task is TaskKind.CLASSIFICATION:
        return float(log_loss(data.targets, np.clip(predictions, 1e-15, 1.0 - 1e-15), labels=[0.0, 1.0]))
    return float(mean_squared_error(data.targets, predictions))
