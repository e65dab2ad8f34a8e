"""Greedy binary decision trees.

Splits minimize weighted child impurity: Gini for classification,
variance for regression. Candidate thresholds are midpoints between
consecutive sorted unique values; recursion stops at a pure node, the
depth cap, or fewer than 2 samples. Ties between equally good splits go
to the lowest feature index, then the lowest threshold.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

import numpy as np

from ..errors import DataError


@dataclass(frozen=True)
class TreeConfig:
    task: str = "classification"  # or "regression"
    max_depth: int | None = None

    def __post_init__(self):
        if self.task not in ("classification", "regression"):
            raise DataError(f"unknown tree task {self.task!r}")
        if self.max_depth is not None and self.max_depth < 0:
            raise DataError("max_depth must be nonnegative")


@dataclass
class TreeNode:
    n_samples: int
    value: float  # majority class (classification) or mean target (regression)
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    counts: list[int] | None = None  # per-class counts at leaves (classification)

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


def gini_impurity(counts) -> float:
    """1 - sum_c (n_c / n)^2 over per-class counts; 0 iff pure."""
    c = np.asarray(counts, dtype=np.float64)
    n = c.sum()
    if n < 1:
        raise DataError("gini_impurity needs at least one sample")
    p = c / n
    return float(1.0 - np.sum(p * p))


def _best_split(
    x: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    features: np.ndarray,
    task: str,
    n_classes: int,
) -> tuple[int, float] | None:
    """Scan candidate features for the split with lowest weighted impurity.

    Returns (feature, threshold) or None when no feature admits a split
    (all candidate columns constant over idx). Features are scanned in
    ascending order and improvements must be strict, which yields the
    documented tie-breaking.
    """
    n = idx.size
    best: tuple[float, int, float] | None = None
    y_node = y[idx]
    for f in features:
        vals = x[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        cut = np.nonzero(sv[:-1] < sv[1:])[0]  # split after position i
        if cut.size == 0:
            continue
        n_left = cut + 1
        n_right = n - n_left
        ys = y_node[order]
        if task == "classification":
            left_impurity = np.zeros(cut.size)
            right_impurity = np.zeros(cut.size)
            total = np.bincount(ys, minlength=n_classes)
            for c in range(n_classes):
                cum_c = np.cumsum(ys == c)[cut]
                pl = cum_c / n_left
                pr = (total[c] - cum_c) / n_right
                left_impurity += pl * pl
                right_impurity += pr * pr
            weighted = (n_left * (1.0 - left_impurity) + n_right * (1.0 - right_impurity)) / n
        else:
            s = np.cumsum(ys)[cut]
            s2 = np.cumsum(ys * ys)[cut]
            total_s = ys.sum()
            total_s2 = (ys * ys).sum()
            var_left = np.maximum(s2 / n_left - (s / n_left) ** 2, 0.0)
            var_right = np.maximum(
                (total_s2 - s2) / n_right - ((total_s - s) / n_right) ** 2, 0.0
            )
            weighted = (n_left * var_left + n_right * var_right) / n
        j = int(np.argmin(weighted))  # first minimum: lowest threshold wins
        if best is None or weighted[j] < best[0]:
            threshold = (sv[cut[j]] + sv[cut[j] + 1]) / 2.0
            best = (float(weighted[j]), int(f), threshold)
    if best is None:
        return None
    return best[1], best[2]


def _leaf(y_node: np.ndarray, task: str, n_classes: int) -> TreeNode:
    if task == "classification":
        counts = np.bincount(y_node, minlength=n_classes)
        return TreeNode(
            n_samples=y_node.size,
            value=float(np.argmax(counts)),  # ties go to the lowest class
            counts=[int(c) for c in counts],
        )
    return TreeNode(n_samples=y_node.size, value=float(y_node.mean()))


def _grow(
    x: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    depth: int,
    config: TreeConfig,
    n_classes: int,
    rng: np.random.Generator | None,
    m_features: int,
) -> TreeNode:
    y_node = y[idx]
    n = idx.size
    if config.task == "classification":
        pure = bool(np.all(y_node == y_node[0]))
    else:
        pure = bool(y_node.max() == y_node.min())
    if pure or n < 2 or (config.max_depth is not None and depth >= config.max_depth):
        return _leaf(y_node, config.task, n_classes)

    d = x.shape[1]
    if rng is not None and m_features < d:
        features = np.sort(rng.choice(d, size=m_features, replace=False))
    else:
        features = np.arange(d)
    split = _best_split(x, y, idx, features, config.task, n_classes)
    if split is None:
        return _leaf(y_node, config.task, n_classes)
    feature, threshold = split
    mask = x[idx, feature] <= threshold
    left = _grow(x, y, idx[mask], depth + 1, config, n_classes, rng, m_features)
    right = _grow(x, y, idx[~mask], depth + 1, config, n_classes, rng, m_features)
    node = _leaf(y_node, config.task, n_classes)
    node.feature = feature
    node.threshold = threshold
    node.left = left
    node.right = right
    return node


@dataclass
class DecisionTree:
    root: TreeNode
    config: TreeConfig
    n_features: int
    n_classes: int  # 0 for regression

    def predict(self, points) -> np.ndarray:
        x = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if x.shape[1] != self.n_features:
            raise DataError(
                f"expected {self.n_features} features, got {x.shape[1]}"
            )
        out = np.empty(x.shape[0], dtype=np.float64)
        _route(self.root, x, np.arange(x.shape[0]), out)
        if self.config.task == "classification":
            return out.astype(np.int64)
        return out


def _route(node: TreeNode, x: np.ndarray, idx: np.ndarray, out: np.ndarray) -> None:
    if node.is_leaf:
        out[idx] = node.value
        return
    mask = x[idx, node.feature] <= node.threshold
    left_idx = idx[mask]
    right_idx = idx[~mask]
    if left_idx.size:
        _route(node.left, x, left_idx, out)
    if right_idx.size:
        _route(node.right, x, right_idx, out)


def fit_tree(
    x,
    y,
    config: TreeConfig = TreeConfig(),
    rng: np.random.Generator | None = None,
    m_features: int | None = None,
    n_classes: int | None = None,
) -> DecisionTree:
    """Grow one tree. `rng` plus `m_features` enables per-split feature
    subsampling (used by forests); by default every feature is a candidate.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n = x.shape[0]
    if n < 1:
        raise DataError("fit_tree needs at least one row")
    if config.task == "classification":
        y = np.asarray(y, dtype=np.int64)
        if y.min() < 0:
            raise DataError("class labels must be nonnegative integers")
        if n_classes is None:
            n_classes = max(2, int(y.max()) + 1)
    else:
        y = np.asarray(y, dtype=np.float64)
        n_classes = 0
    if y.shape[0] != n:
        raise DataError("labels misaligned with rows")
    if m_features is None:
        m_features = x.shape[1]
    else:
        m_features = max(1, min(m_features, x.shape[1]))
    # max recursion = tree depth; splits always shrink both sides so the
    # depth is bounded by n, but deep chains on large n need headroom
    needed = n + 100
    if sys.getrecursionlimit() < needed:
        sys.setrecursionlimit(needed + 1000)
    root = _grow(x, y, np.arange(n), 0, config, n_classes, rng, m_features)
    return DecisionTree(root=root, config=config, n_features=x.shape[1], n_classes=n_classes)


def tree_depth(node: TreeNode) -> int:
    if node.is_leaf:
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def count_leaves(node: TreeNode) -> int:
    if node.is_leaf:
        return 1
    return count_leaves(node.left) + count_leaves(node.right)


def features_used(node: TreeNode) -> set[int]:
    """Indices of features appearing in any split of the tree."""
    if node.is_leaf:
        return set()
    return {node.feature} | features_used(node.left) | features_used(node.right)


__all__ = [
    "TreeConfig",
    "TreeNode",
    "DecisionTree",
    "gini_impurity",
    "fit_tree",
    "tree_depth",
    "count_leaves",
    "features_used",
]
