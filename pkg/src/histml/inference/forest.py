"""Bagged regression trees and impurity-decrease feature importance."""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from histml import kernels


class ConstantTargetWarning(UserWarning):
    """Target has no variance; importances fall back to uniform."""


@dataclass(frozen=True)
class ForestConfig:
    tree_count: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    seed: int = 42

    def __post_init__(self):
        if self.tree_count < 1:
            raise ValueError("tree_count must be >= 1")
        if self.min_samples_split < 2 or self.min_samples_leaf < 1:
            raise ValueError("min_samples_split >= 2 and min_samples_leaf >= 1 required")


def tree_rng(seed, index):
    """Independent counter-keyed stream for tree ``index``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


class RegressionTree:
    def __init__(self, config, n_features):
        self.config = config
        self.n_features = n_features
        self.max_features = max(1, math.ceil(n_features / 3))
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []
        self.importance = np.zeros(n_features)

    def _new_node(self, value):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.value) - 1

    def fit(self, X, y, rng):
        cfg = self.config
        stack = [(np.arange(len(y)), 0, self._new_node(float(y.mean())))]
        while stack:
            idx, depth, node = stack.pop()
            ys = y[idx]
            if (
                len(idx) < cfg.min_samples_split
                or (cfg.max_depth is not None and depth >= cfg.max_depth)
                or np.all(ys == ys[0])
            ):
                continue
            cand = np.sort(rng.choice(self.n_features, size=self.max_features, replace=False))
            f, t, gain = kernels.best_split(X[idx], ys, cand, cfg.min_samples_leaf)
            if f < 0:
                continue
            go_left = X[idx, f] <= t
            li, ri = idx[go_left], idx[~go_left]
            self.importance[f] += gain
            self.feature[node], self.threshold[node] = f, t
            self.left[node] = self._new_node(float(y[li].mean()))
            self.right[node] = self._new_node(float(y[ri].mean()))
            stack.append((ri, depth + 1, self.right[node]))
            stack.append((li, depth + 1, self.left[node]))
        return self

    def predict(self, X):
        out = np.empty(len(X))
        for r, row in enumerate(X):
            node = 0
            while self.feature[node] >= 0:
                node = self.left[node] if row[self.feature[node]] <= self.threshold[node] else self.right[node]
            out[r] = self.value[node]
        return out


class RegressionForest:
    """Bootstrap-aggregated variance-reduction trees.

    Each tree draws its bootstrap rows and per-split feature subsets
    (``ceil(d / 3)`` features) from its own stream keyed by
    ``(seed, tree index)``, so results do not depend on ``workers``.
    """

    def __init__(self, config=None, workers=1):
        self.config = config or ForestConfig()
        self.workers = workers
        self.trees = []
        self.constant_target = False

    def _fit_tree(self, X, y, index):
        rng = tree_rng(self.config.seed, index)
        rows = rng.integers(0, len(y), size=len(y))
        return RegressionTree(self.config, X.shape[1]).fit(X[rows], y[rows], rng)

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError("X must be (n, d) with len(y) == n")
        if X.shape[0] < 2 or X.shape[1] < 1:
            raise ValueError("need n >= 2 rows and d >= 1 features")
        indices = range(self.config.tree_count)
        if self.workers > 1:
            with ThreadPoolExecutor(self.workers) as pool:
                self.trees = list(pool.map(lambda i: self._fit_tree(X, y, i), indices))
        else:
            self.trees = [self._fit_tree(X, y, i) for i in indices]
        self.constant_target = bool(np.all(y == y[0]))
        return self

    @property
    def feature_importances_(self):
        d = self.trees[0].n_features
        per_tree = []
        for t in self.trees:
            total = t.importance.sum()
            if total > 0:
                per_tree.append(t.importance / total)
        if not per_tree:
            return np.full(d, 1.0 / d)
        imp = np.mean(per_tree, axis=0)
        return imp / imp.sum()

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        return np.mean([t.predict(X) for t in self.trees], axis=0)


def forest_importance(X, y, config=None, feature_names=None, workers=1):
    """Normalised mean-decrease-in-impurity importances keyed by feature name.

    A constant target gives uniform importances and a ConstantTargetWarning.
    """
    X = np.asarray(X, dtype=float)
    names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(X.shape[1])]
    if len(names) != X.shape[1]:
        raise ValueError("feature_names length does not match X")
    # fit in lexical column order so the result only depends on the names
    order = sorted(range(len(names)), key=names.__getitem__)
    forest = RegressionForest(config, workers=workers).fit(X[:, order], y)
    if forest.constant_target:
        warnings.warn("constant target: importances are undefined, returning uniform", ConstantTargetWarning)
    return {names[j]: float(v) for j, v in zip(order, forest.feature_importances_)}
