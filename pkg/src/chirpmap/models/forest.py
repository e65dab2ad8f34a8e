"""Random forests over the decision trees in tree.py.

Each tree trains on a bootstrap resample with ceil(sqrt(d)) features
re-drawn as candidates at every split. Classification predicts by
majority vote with ties going to the lowest class index; regression
predicts the mean of the tree outputs. Per-tree randomness comes from
seeds spawned deterministically off the config seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from .tree import DecisionTree, TreeConfig, fit_tree


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    seed: int = 0
    task: str = "classification"

    def __post_init__(self):
        if self.n_trees < 1:
            raise DataError("n_trees must be positive")
        if self.task not in ("classification", "regression"):
            raise DataError(f"unknown forest task {self.task!r}")


@dataclass
class RandomForestModel:
    trees: list[DecisionTree]
    config: ForestConfig
    n_features: int
    n_classes: int  # 0 for regression

    kind = "random_forest"

    def predict(self, points) -> np.ndarray:
        x = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self.config.task == "regression":
            acc = np.zeros(x.shape[0], dtype=np.float64)
            for tree in self.trees:
                acc += tree.predict(x)
            return acc / len(self.trees)
        votes = np.zeros((x.shape[0], self.n_classes), dtype=np.int64)
        rows = np.arange(x.shape[0])
        for tree in self.trees:
            votes[rows, tree.predict(x)] += 1
        return np.argmax(votes, axis=1)  # first max: ties go to class 0


def fit_random_forest(x, y, config: ForestConfig = ForestConfig()) -> RandomForestModel:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n, d = x.shape
    if n < 1:
        raise DataError("fit_random_forest needs at least one row")
    if config.task == "classification":
        y = np.asarray(y, dtype=np.int64)
        if n > 1 and np.unique(y).size < 2:
            raise DataError("forest training needs both classes present")
        n_classes = max(2, int(y.max()) + 1)
    else:
        y = np.asarray(y, dtype=np.float64)
        n_classes = 0
    if y.shape[0] != n:
        raise DataError("labels misaligned with rows")

    m_features = math.ceil(math.sqrt(d))
    tree_config = TreeConfig(task=config.task, max_depth=config.max_depth)
    trees: list[DecisionTree] = []
    for child_seed in np.random.SeedSequence(config.seed).spawn(config.n_trees):
        rng = np.random.default_rng(child_seed)
        boot = rng.integers(0, n, size=n)
        trees.append(
            fit_tree(
                x[boot],
                y[boot],
                tree_config,
                rng=rng,
                m_features=m_features,
                n_classes=n_classes if config.task == "classification" else None,
            )
        )
    return RandomForestModel(trees=trees, config=config, n_features=d, n_classes=n_classes)


__all__ = ["ForestConfig", "RandomForestModel", "fit_random_forest"]
