"""Desk-scale tabular classifiers: a gini random forest and a small MLP.

Both are deterministic given their seed and expose ``fit(X, y)`` and
``predict(X)`` on binary labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


def gini(counts: np.ndarray) -> np.ndarray:
    """Gini impurity of class-count rows (last axis = classes)."""
    n = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = counts / n[..., None]
    out = 1.0 - np.nansum(p * p, axis=-1)
    return np.where(n > 0, out, 0.0)


@dataclass
class Node:
    value: float  # fraction of positive labels
    feature: int = -1
    threshold: float = 0.0
    left: Optional["Node"] = None
    right: Optional["Node"] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def best_split(X: np.ndarray, y: np.ndarray, features: np.ndarray,
               min_leaf: int) -> tuple[int, float, float]:
    """(feature, threshold, weighted child impurity) of the best gini split; feature -1 if none."""
    n = len(y)
    best = (-1, 0.0, math.inf)
    for j in features.tolist():
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        pos = np.cumsum(y[order])
        left_n = np.arange(1, n)
        left_pos = pos[:-1]
        right_n = n - left_n
        right_pos = pos[-1] - left_pos
        valid = (xs[1:] > xs[:-1]) & (left_n >= min_leaf) & (right_n >= min_leaf)
        if not valid.any():
            continue
        gl = 1.0 - (left_pos / left_n) ** 2 - (1 - left_pos / left_n) ** 2
        gr = 1.0 - (right_pos / right_n) ** 2 - (1 - right_pos / right_n) ** 2
        score = np.where(valid, (left_n * gl + right_n * gr) / n, np.inf)
        k = int(np.argmin(score))
        if score[k] < best[2]:
            best = (j, 0.5 * (xs[k] + xs[k + 1]), float(score[k]))
    return best


@dataclass
class DecisionTree:
    max_depth: int = 10
    min_leaf: int = 2
    max_features: Optional[int] = None
    seed: int = 0
    root: Optional[Node] = field(default=None, repr=False)

    def fit(self, X: np.ndarray, y: np.ndarray) -> "DecisionTree":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        rng = np.random.default_rng(self.seed)
        d = X.shape[1]
        m = d if self.max_features is None else max(1, min(d, self.max_features))

        def grow(idx: np.ndarray, depth: int) -> Node:
            ys = y[idx]
            node = Node(float(ys.mean()) if len(ys) else 0.0)
            if depth >= self.max_depth or len(idx) < 2 * self.min_leaf or ys.min() == ys.max():
                return node
            feats = np.sort(rng.choice(d, size=m, replace=False)) if m < d else np.arange(d)
            j, thr, score = best_split(X[idx], ys, feats, self.min_leaf)
            parent = 1.0 - ys.mean() ** 2 - (1 - ys.mean()) ** 2
            if j < 0 or score >= parent:
                return node
            mask = X[idx, j] <= thr
            node.feature, node.threshold = j, thr
            node.left = grow(idx[mask], depth + 1)
            node.right = grow(idx[~mask], depth + 1)
            return node

        self.root = grow(np.arange(len(y)), 0)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.root is None:
            raise RuntimeError("tree is not fitted")
        X = np.asarray(X, dtype=float)
        out = np.empty(len(X))
        stack = [(self.root, np.arange(len(X)))]
        while stack:
            node, idx = stack.pop()
            if node.is_leaf or len(idx) == 0:
                out[idx] = node.value
                continue
            mask = X[idx, node.feature] <= node.threshold
            stack.append((node.left, idx[mask]))
            stack.append((node.right, idx[~mask]))
        return out


@dataclass
class RandomForest:
    """Bagged gini trees with sqrt(d) features tried per split."""

    n_trees: int = 25
    max_depth: int = 10
    min_leaf: int = 2
    seed: int = 0
    trees: list[DecisionTree] = field(default_factory=list, repr=False)

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RandomForest":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        rng = np.random.default_rng(self.seed)
        m = max(1, int(math.sqrt(X.shape[1])))
        self.trees = []
        for t in range(self.n_trees):
            idx = rng.integers(0, len(y), size=len(y))
            tree = DecisionTree(self.max_depth, self.min_leaf, m, seed=int(rng.integers(2**31)))
            self.trees.append(tree.fit(X[idx], y[idx]))
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return np.mean([t.predict_proba(X) for t in self.trees], axis=0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) > 0.5).astype(int)


@dataclass
class MLPClassifier:
    """Three hidden tanh layers, sigmoid output, full-batch gradient descent."""

    hidden: tuple[int, ...] = (32, 16, 8)
    epochs: int = 300
    lr: float = 0.1
    seed: int = 0

    def fit(self, X: np.ndarray, y: np.ndarray) -> "MLPClassifier":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.mu = X.mean(axis=0)
        sd = X.std(axis=0)
        self.sd = np.where(sd > 0, sd, 1.0)
        Z = (X - self.mu) / self.sd
        rng = np.random.default_rng(self.seed)
        sizes = [X.shape[1], *self.hidden, 1]
        self.W = [rng.normal(0, 1 / math.sqrt(a), (a, b)) for a, b in zip(sizes[:-1], sizes[1:])]
        self.b = [np.zeros(b) for b in sizes[1:]]
        n = len(y)
        for _ in range(self.epochs):
            acts = self._forward(Z)
            delta = (acts[-1][:, 0] - y)[:, None] / n
            for i in range(len(self.W) - 1, -1, -1):
                gw = acts[i].T @ delta
                gb = delta.sum(axis=0)
                if i > 0:
                    delta = (delta @ self.W[i].T) * (1 - acts[i] ** 2)
                self.W[i] -= self.lr * gw
                self.b[i] -= self.lr * gb
        return self

    def _forward(self, Z: np.ndarray) -> list[np.ndarray]:
        acts = [Z]
        h = Z
        for i, (w, b) in enumerate(zip(self.W, self.b)):
            z = h @ w + b
            h = 1 / (1 + np.exp(-np.clip(z, -30, 30))) if i == len(self.W) - 1 else np.tanh(z)
            acts.append(h)
        return acts

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        Z = (np.asarray(X, dtype=float) - self.mu) / self.sd
        return self._forward(Z)[-1][:, 0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) > 0.5).astype(int)


def make_learner(kind: str, seed: int = 0, **params):
    if kind in ("forest", "tree", "random_forest"):
        return RandomForest(seed=seed, **params)
    if kind in ("mlp", "feedforward"):
        return MLPClassifier(seed=seed, **params)
    raise ValueError(f"unknown learner kind {kind!r}")


def accuracy(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    if len(y_true) == 0:
        raise ValueError("empty evaluation set")
    return float(np.mean(np.asarray(y_true) == np.asarray(y_pred)))
