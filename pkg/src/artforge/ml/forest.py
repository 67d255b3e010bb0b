"""Random forest of Gini-split binary trees, written out as ``.forest.json``.

Every tree draws its own generator from ``SeedSequence([seed, tree_index])``,
so a forest is the same whether its trees are built serially or in worker
processes.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError
from .scaling import Standardizer

FOREST_VERSION = 1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    features_per_split: int | None = None  # None: ceil(sqrt(width))
    vote_threshold: float = 0.5
    bootstrap: bool = True

    def validate(self) -> None:
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigError("max_depth must be >= 0 or null")
        if self.min_leaf < 1:
            raise ConfigError("min_leaf must be >= 1")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ConfigError("features_per_split must be >= 1 or null")

    def split_features(self, width: int) -> int:
        m = self.features_per_split or math.ceil(math.sqrt(width))
        return min(m, width)


@dataclass
class Tree:
    """Flat preorder node arrays; ``feat == -1`` marks a leaf."""

    feat: np.ndarray
    thr: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            f = self.feat[node]
            inner = f >= 0
            if not inner.any():
                return node
            r, nd = rows[inner], node[inner]
            go_left = X[r, f[inner]] <= self.thr[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])

    def leaf_values(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            i, d = stack.pop()
            best = max(best, d)
            if self.feat[i] >= 0:
                stack += [(int(self.left[i]), d + 1), (int(self.right[i]), d + 1)]
        return best

    def to_json(self) -> dict:
        nodes = []
        for i in range(len(self.feat)):
            if self.feat[i] < 0:
                nodes.append({"leaf": float(self.value[i])})
            else:
                nodes.append({"feat": int(self.feat[i]), "thr": float(self.thr[i]),
                              "left": int(self.left[i]), "right": int(self.right[i])})
        return {"nodes": nodes}

    @classmethod
    def from_json(cls, obj: dict) -> "Tree":
        nodes = obj["nodes"]
        n = len(nodes)
        feat = np.full(n, -1, dtype=np.int64)
        thr = np.zeros(n)
        left = np.full(n, -1, dtype=np.int64)
        right = np.full(n, -1, dtype=np.int64)
        value = np.zeros(n)
        for i, nd in enumerate(nodes):
            if "leaf" in nd:
                value[i] = nd["leaf"]
            else:
                feat[i], thr[i], left[i], right[i] = nd["feat"], nd["thr"], nd["left"], nd["right"]
        return cls(feat, thr, left, right, value)


def _best_split(X, y, idx, features, min_leaf):
    """Lowest weighted-Gini split over ``features`` (ascending), or None.

    The score ``pl*nl_neg/nl + pr*nr_neg/nr`` is half the size-weighted child
    Gini, so minimising it maximises the impurity reduction.
    """
    n = len(idx)
    yn = y[idx]
    total_pos = int(yn.sum())
    nl = np.arange(1, n)
    nr = n - nl
    size_ok = (nl >= min_leaf) & (nr >= min_leaf)
    best = None
    for f in features:
        x = X[idx, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        valid = size_ok & (xs[:-1] < xs[1:])
        if not valid.any():
            continue
        pl = np.cumsum(yn[order])[:-1]
        pr = total_pos - pl
        score = pl * (nl - pl) / nl + pr * (nr - pr) / nr
        score = np.where(valid, score, np.inf)
        i = int(np.argmin(score))
        if best is None or score[i] < best[0]:
            lo, hi = xs[i], xs[i + 1]
            thr = (lo + hi) / 2.0
            if not lo <= thr < hi:
                thr = lo
            best = (float(score[i]), int(f), float(thr))
    return best


def build_tree(X: np.ndarray, y: np.ndarray, params: ForestParams, rng: np.random.Generator) -> Tree:
    """One tree on a bootstrap resample of (X, y), or on (X, y) itself."""
    n, width = X.shape
    if params.bootstrap:
        boot = rng.integers(0, n, size=n)
        Xb, yb = X[boot], y[boot]
    else:
        Xb, yb = X, y
    m = params.split_features(width)
    feat, thr, left, right, value = [], [], [], [], []

    def new_node():
        feat.append(-1)
        thr.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feat) - 1

    def grow(idx: np.ndarray, depth: int) -> int:
        me = new_node()
        pos = int(yb[idx].sum())
        value[me] = pos / len(idx)
        if pos == 0 or pos == len(idx) or len(idx) < 2 * params.min_leaf:
            return me
        if params.max_depth is not None and depth >= params.max_depth:
            return me
        perm = rng.permutation(width)
        split = _best_split(Xb, yb, idx, np.sort(perm[:m]), params.min_leaf)
        # no usable split among the draw: keep scanning the remaining features one at a time
        for f in perm[m:]:
            if split is not None:
                break
            split = _best_split(Xb, yb, idx, [f], params.min_leaf)
        if split is None:
            return me
        _, f, t = split
        go_left = Xb[idx, f] <= t
        feat[me], thr[me] = f, t
        left[me] = grow(idx[go_left], depth + 1)
        right[me] = grow(idx[~go_left], depth + 1)
        return me

    grow(np.arange(n), 0)
    return Tree(np.asarray(feat, dtype=np.int64), np.asarray(thr), np.asarray(left, dtype=np.int64),
                np.asarray(right, dtype=np.int64), np.asarray(value))


def tree_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def _build_indexed(args):
    X, y, params, seed, index = args
    return build_tree(X, y, params, tree_rng(seed, index))


@dataclass
class ForestModel:
    trees: list[Tree]
    standardizer: Standardizer
    params: ForestParams
    seed: int
    # feature-layout metadata stored alongside the hyperparameters (n_hops, hop_count)
    extra: dict = field(default_factory=dict)

    @property
    def width(self) -> int:
        return len(self.standardizer.mean)

    def scores(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        Z = self.standardizer.transform(X)
        return np.mean([t.leaf_values(Z) for t in self.trees], axis=0)

    def predict_many(self, X) -> tuple[np.ndarray, np.ndarray]:
        s = self.scores(X)
        return (s >= self.params.vote_threshold).astype(np.int64), s

    def to_json(self) -> dict:
        return {
            "version": FOREST_VERSION,
            "hyperparams": {**asdict(self.params), **self.extra},
            "standardizer": self.standardizer.to_json(),
            "trees": [t.to_json() for t in self.trees],
            "seed": int(self.seed),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ForestModel":
        if obj.get("version") != FOREST_VERSION:
            raise ConfigError(f"unsupported forest version {obj.get('version')!r}")
        hp = dict(obj["hyperparams"])
        names = set(ForestParams.__dataclass_fields__)
        params = ForestParams(**{k: v for k, v in hp.items() if k in names})
        extra = {k: v for k, v in hp.items() if k not in names}
        return cls([Tree.from_json(t) for t in obj["trees"]], Standardizer.from_json(obj["standardizer"]),
                   params, int(obj["seed"]), extra)

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_json(), fh, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ForestModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def fit_trees(X, y, params: ForestParams, seed: int, workers: int = 1) -> list[Tree]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    jobs = [(X, y, params, seed, i) for i in range(params.n_trees)]
    if workers <= 1:
        return [_build_indexed(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_build_indexed, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def train_random_forest(X, y, params: ForestParams | None = None, rng_seed: int = 0, *,
                        standardizer: Standardizer | None = None, workers: int = 1,
                        extra: dict | None = None) -> ForestModel:
    """Fit a forest on rows already in the standardizer's space.

    ``standardizer`` is stored in the model and applied by :meth:`ForestModel.scores`;
    an identity scaler is used when none is given.
    """
    params = params or ForestParams()
    params.validate()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise ConfigError("cannot train on an empty dataset")
    if len(np.unique(y)) < 2:
        raise ConfigError("training data must contain both classes")
    if standardizer is None:
        standardizer = Standardizer(np.zeros(X.shape[1]), np.ones(X.shape[1]))
    trees = fit_trees(X, y, params, rng_seed, workers)
    return ForestModel(trees, standardizer, params, rng_seed, dict(extra or {}))


def predict(m: ForestModel, row) -> tuple[int, float]:
    """(label, score) for one raw (unstandardized) feature row."""
    row = np.asarray(row, dtype=np.float64)
    if row.shape != (m.width,):
        raise ValueError(f"row width {row.shape[-1] if row.ndim else 0} does not match model width {m.width}")
    score = float(m.scores(row)[0])
    return int(score >= m.params.vote_threshold), score
