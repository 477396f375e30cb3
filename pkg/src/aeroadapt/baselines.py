"""CART decision trees and Random Forests for regression/classification,
also the engine behind forest-based feature ranking."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class TreeNode:
    """Split node (feature/threshold/children) or leaf (value)."""

    feature: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    # Leaf payload: scalar mean for regression, class-count histogram for
    # classification.
    value: Optional[np.ndarray] = None
    # Total impurity decrease achieved by this split (importance bookkeeping).
    gain: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 12
    min_samples_leaf: int = 2
    features_per_split: Optional[int] = None  # None -> ceil(sqrt(F))
    bootstrap: bool = True
    seed: int = 0

    def validate(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


@dataclass
class Forest:
    trees: list[TreeNode]
    task: str
    n_features: int
    n_classes: int
    config: ForestConfig


def _node_impurity_total(y: np.ndarray, task: str, n_classes: int) -> float:
    """SSE for regression, n * Gini for classification."""
    n = len(y)
    if task == "regression":
        return float(np.sum((y - y.mean()) ** 2)) if n else 0.0
    counts = np.bincount(y.astype(int), minlength=n_classes)
    return n * (1.0 - float(np.sum((counts / n) ** 2))) if n else 0.0


def _best_split(X: np.ndarray, y: np.ndarray, feat_indices: Sequence[int],
                min_leaf: int, task: str, n_classes: int):
    """Exhaustive scan over midpoint thresholds; returns
    (feature, threshold, gain, left_mask) or None.

    Candidates are scanned in ascending feature index then ascending
    threshold, with strict improvement, so ties resolve to the lowest pair.
    """
    n = len(y)
    parent = _node_impurity_total(y, task, n_classes)
    best = None
    best_score = np.inf
    for j in feat_indices:
        vals = X[:, j]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sy = y[order]
        # Valid boundaries: k samples on the left, value must change there.
        ks = np.arange(min_leaf, n - min_leaf + 1)
        if len(ks) == 0:
            continue
        valid = sv[ks] != sv[ks - 1]
        ks = ks[valid]
        if len(ks) == 0:
            continue
        if task == "regression":
            cs = np.concatenate([[0.0], np.cumsum(sy)])
            cs2 = np.concatenate([[0.0], np.cumsum(sy ** 2)])
            left = cs2[ks] - cs[ks] ** 2 / ks
            rn = n - ks
            right = (cs2[n] - cs2[ks]) - (cs[n] - cs[ks]) ** 2 / rn
            scores = left + right
        else:
            onehot = np.zeros((n, n_classes))
            onehot[np.arange(n), sy.astype(int)] = 1.0
            cum = np.concatenate([np.zeros((1, n_classes)), np.cumsum(onehot, axis=0)])
            lc = cum[ks]
            rc = cum[n] - lc
            ln = ks.astype(float)
            rn = (n - ks).astype(float)
            left = ln - np.sum(lc ** 2, axis=1) / ln
            right = rn - np.sum(rc ** 2, axis=1) / rn
            scores = left + right
        k_best = int(np.argmin(scores))
        if scores[k_best] < best_score:
            best_score = float(scores[k_best])
            k = int(ks[k_best])
            threshold = (sv[k - 1] + sv[k]) / 2.0
            best = (j, threshold)
    if best is None or parent - best_score <= 0:
        return None
    j, threshold = best
    return j, threshold, parent - best_score, X[:, j] <= threshold


def _leaf(y: np.ndarray, task: str, n_classes: int) -> TreeNode:
    if task == "regression":
        return TreeNode(value=np.array([y.mean()]))
    counts = np.bincount(y.astype(int), minlength=n_classes).astype(float)
    return TreeNode(value=counts)


def fit_cart(X: np.ndarray, y: np.ndarray, *, task: str = "regression",
             max_depth: int = 12, min_samples_leaf: int = 1,
             features_per_split: Optional[int] = None,
             rng: Optional[np.random.Generator] = None,
             n_classes: Optional[int] = None) -> TreeNode:
    """Greedy CART: variance reduction (regression) or Gini decrease
    (classification), midpoint split candidates, deterministic tie-breaks."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if len(y) == 0:
        raise ValueError("cannot fit a tree on zero samples")
    if task not in ("regression", "classification"):
        raise ValueError(f"unknown task {task!r}")
    if task == "classification" and n_classes is None:
        n_classes = int(y.max()) + 1
    n_classes = n_classes or 0
    F = X.shape[1]

    def grow(idx: np.ndarray, depth: int) -> TreeNode:
        ys = y[idx]
        if depth >= max_depth or len(idx) < 2 * min_samples_leaf or np.all(ys == ys[0]):
            return _leaf(ys, task, n_classes)
        if features_per_split is not None and features_per_split < F and rng is not None:
            feats = np.sort(rng.choice(F, size=features_per_split, replace=False))
        else:
            feats = np.arange(F)
        found = _best_split(X[idx], ys, feats, min_samples_leaf, task, n_classes)
        if found is None:
            return _leaf(ys, task, n_classes)
        j, threshold, gain, left_mask = found
        node = TreeNode(feature=j, threshold=threshold, gain=gain)
        node.left = grow(idx[left_mask], depth + 1)
        node.right = grow(idx[~left_mask], depth + 1)
        return node

    return grow(np.arange(len(y)), 0)


def tree_predict(node: TreeNode, x: np.ndarray, task: str = "regression") -> float:
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    if task == "regression":
        return float(node.value[0])
    # Lowest class index wins ties.
    return int(np.argmax(node.value))


def fit_random_forest(X: np.ndarray, y: np.ndarray,
                      config: Optional[ForestConfig] = None, *,
                      task: str = "regression",
                      n_classes: Optional[int] = None) -> Forest:
    """Bagged CART ensemble; per-tree seeds derive from (seed, tree index) so
    extending n_trees leaves earlier trees unchanged."""
    config = config or ForestConfig()
    config.validate()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if len(y) == 0:
        raise ValueError("cannot fit a forest on zero samples")
    F = X.shape[1]
    fps = config.features_per_split
    if fps is None:
        fps = math.ceil(math.sqrt(F))
    if task == "classification" and n_classes is None:
        n_classes = int(y.max()) + 1
    trees = []
    for i in range(config.n_trees):
        rng = np.random.default_rng((config.seed, i))
        if config.bootstrap:
            idx = rng.integers(0, len(y), size=len(y))
        else:
            idx = np.arange(len(y))
        trees.append(fit_cart(
            X[idx], y[idx], task=task, max_depth=config.max_depth,
            min_samples_leaf=config.min_samples_leaf,
            features_per_split=fps, rng=rng, n_classes=n_classes))
    return Forest(trees, task, F, n_classes or 0, config)


def forest_predict(forest: Forest, X: np.ndarray) -> np.ndarray:
    """Mean of tree outputs (regression) or majority vote with lowest-index
    tie-break (classification)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    out = np.empty(len(X))
    for i, x in enumerate(X):
        if forest.task == "regression":
            out[i] = np.mean([tree_predict(t, x, "regression") for t in forest.trees])
        else:
            votes = np.bincount(
                [tree_predict(t, x, "classification") for t in forest.trees],
                minlength=forest.n_classes)
            out[i] = int(np.argmax(votes))
    return out


def feature_importance(forest: Forest) -> np.ndarray:
    """Normalized total impurity decrease per feature (sums to 1)."""
    scores = np.zeros(forest.n_features)

    def walk(node: TreeNode):
        if node.is_leaf:
            return
        scores[node.feature] += node.gain
        walk(node.left)
        walk(node.right)

    for tree in forest.trees:
        walk(tree)
    total = scores.sum()
    if total <= 0:
        log.warning("forest has no splits; reporting uniform importances")
        return np.full(forest.n_features, 1.0 / forest.n_features)
    return scores / total
