"""Standardization, SMOTE, stratified splitting, random forest and metrics."""

from __future__ import annotations

import numpy as np

from .data import Dataset, stratified_split
from .forest import ForestModel, ForestParams, Tree, predict, train_random_forest
from .metrics import ConfusionCounts, Metrics, compute_metrics, metrics_report
from .scaling import Standardizer
from .smote import smote

__all__ = [
    "ConfusionCounts", "Dataset", "ForestModel", "ForestParams", "Metrics", "Standardizer", "Tree",
    "compute_metrics", "fit_balanced_forest", "metrics_report", "predict", "smote",
    "stratified_split", "train_random_forest",
]


def fit_balanced_forest(train: Dataset, params: ForestParams, smote_k: int, smote_seed: int,
                        forest_seed: int, *, workers: int = 1, extra: dict | None = None) -> ForestModel:
    """Standardize on ``train``, oversample the minority class to parity, fit the forest."""
    scaler = Standardizer.fit(train.X)
    Z = scaler.transform(train.X)
    y = train.y
    n_neg, n_pos = train.class_counts()
    minority = 1 if n_pos < n_neg else 0
    deficit = abs(n_neg - n_pos)
    if deficit:
        rows = Z[y == minority]
        k = min(smote_k, len(rows) - 1)
        synthetic = smote(rows, k, deficit, smote_seed)
        Z = np.vstack([Z, synthetic])
        y = np.concatenate([y, np.full(deficit, minority, dtype=np.int64)])
    return train_random_forest(Z, y, params, forest_seed, standardizer=scaler, workers=workers, extra=extra)
