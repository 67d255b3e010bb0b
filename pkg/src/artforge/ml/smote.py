from __future__ import annotations

import numpy as np

from ..errors import ConfigError


def nearest_neighbors(X: np.ndarray, k: int) -> np.ndarray:
    """Indexes of each row's k nearest other rows (Euclidean, ties to lower index)."""
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=-1)
    np.fill_diagonal(d2, np.inf)
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


def smote(minority, k: int, n_synthetic: int, rng_seed: int) -> np.ndarray:
    """Interpolate ``n_synthetic`` points between minority rows and their k-NN.

    Each point is ``x + lam * (nn - x)`` for a uniformly drawn minority row x,
    one of its k nearest minority neighbours nn, and lam ~ U[0, 1].
    """
    X = np.asarray(minority, dtype=np.float64)
    if X.ndim != 2 or len(X) < 2:
        raise ConfigError("SMOTE needs at least 2 minority rows")
    if not 1 <= k <= len(X) - 1:
        raise ConfigError(f"k={k} must lie in [1, {len(X) - 1}] for {len(X)} minority rows")
    if n_synthetic < 0:
        raise ConfigError("n_synthetic must be >= 0")
    nn = nearest_neighbors(X, k)
    rng = np.random.default_rng(rng_seed)
    base = rng.integers(0, len(X), size=n_synthetic)
    pick = nn[base, rng.integers(0, k, size=n_synthetic)]
    lam = rng.random(n_synthetic)[:, None]
    return X[base] + lam * (X[pick] - X[base])
