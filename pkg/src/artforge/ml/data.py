"""Labeled feature matrices and the stratified train/test split."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    ids: list[str]

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            self.X = self.X.reshape(len(self.y), -1)
        if not (len(self.X) == len(self.y) == len(self.ids)):
            raise ValueError("X, y and ids must have equal lengths")
        if not np.isin(self.y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")

    def __len__(self) -> int:
        return len(self.y)

    @property
    def width(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], [self.ids[i] for i in idx])

    def class_counts(self) -> tuple[int, int]:
        pos = int(self.y.sum())
        return len(self.y) - pos, pos


def train_count(n: int, fraction: float) -> int:
    """Nearest-integer share for the training side, halves rounded up, clamped
    so both sides keep at least one row."""
    k = int(np.floor(n * fraction + 0.5))
    return min(max(k, 1), n - 1)


def stratified_split(d: Dataset, train_fraction: float, rng_seed: int) -> tuple[Dataset, Dataset]:
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(rng_seed)
    train_idx, test_idx = [], []
    for label in (0, 1):
        members = np.flatnonzero(d.y == label)
        if len(members) < 2:
            raise ConfigError(f"class {label} has {len(members)} row(s); need >= 2 to stratify")
        perm = rng.permutation(members)
        k = train_count(len(members), train_fraction)
        train_idx.append(perm[:k])
        test_idx.append(perm[k:])
    train = np.sort(np.concatenate(train_idx))
    test = np.sort(np.concatenate(test_idx))
    return d.subset(train), d.subset(test)
