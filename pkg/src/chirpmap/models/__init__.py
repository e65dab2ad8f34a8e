"""Classifiers and regressors trained on 2-D embedding coordinates."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import DataError
from .forest import ForestConfig, RandomForestModel, fit_random_forest
from .knn import KnnConfig, KnnModel, fit_knn
from .logistic import LogisticConfig, LogisticModel, fit_logistic
from .svm import SvmConfig, SvmModel, fit_svm, kkt_violation
from .tree import DecisionTree, TreeConfig, TreeNode, fit_tree, gini_impurity
from .io import load_model, model_from_dict, model_to_dict, save_model

CLASSIFIER_KINDS = ("random_forest", "svm", "logistic_regression", "knn")

# short names accepted on the command line
SHORT_KIND_NAMES = {
    "rf": "random_forest",
    "svm": "svm",
    "logreg": "logistic_regression",
    "knn": "knn",
}


@dataclass(frozen=True)
class LabeledPoints:
    coords: np.ndarray  # N x 2
    labels: np.ndarray  # N values in {0, 1}

    def __post_init__(self):
        coords = np.atleast_2d(np.asarray(self.coords, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise DataError("coords must be N x 2")
        if labels.shape != (coords.shape[0],):
            raise DataError("labels misaligned with coords")
        if not np.all((labels == 0) | (labels == 1)):
            raise DataError("labels must be binary {0, 1}")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "labels", labels)

    @property
    def n_points(self) -> int:
        return self.coords.shape[0]


def default_config(kind: str):
    if kind == "random_forest":
        return ForestConfig()
    if kind == "svm":
        return SvmConfig()
    if kind == "logistic_regression":
        return LogisticConfig()
    if kind == "knn":
        return KnnConfig()
    raise DataError(f"unknown classifier kind {kind!r}")


def fit_classifier(kind: str, coords, labels, seed: int = 0, config=None):
    """Train one classifier kind on (coords, labels).

    The seed only affects the random forest (bootstrap and feature
    draws); the other three are deterministic in the data. An explicit
    config overrides the defaults but the forest seed is still replaced
    so cross-validation folds stay independently seeded.
    """
    if kind not in CLASSIFIER_KINDS:
        raise DataError(f"unknown classifier kind {kind!r}")
    if config is None:
        config = default_config(kind)
    if kind == "random_forest":
        return fit_random_forest(coords, labels, replace(config, seed=seed))
    if kind == "svm":
        return fit_svm(coords, labels, config)
    if kind == "logistic_regression":
        return fit_logistic(coords, labels, config)
    return fit_knn(coords, labels, config)


def predict(model, points) -> np.ndarray:
    """Vectorized class prediction for any fitted model."""
    return model.predict(points)


__all__ = [
    "CLASSIFIER_KINDS",
    "SHORT_KIND_NAMES",
    "LabeledPoints",
    "DecisionTree",
    "TreeConfig",
    "TreeNode",
    "ForestConfig",
    "RandomForestModel",
    "SvmConfig",
    "SvmModel",
    "LogisticConfig",
    "LogisticModel",
    "KnnConfig",
    "KnnModel",
    "gini_impurity",
    "fit_tree",
    "fit_random_forest",
    "fit_svm",
    "fit_logistic",
    "fit_knn",
    "fit_classifier",
    "predict",
    "kkt_violation",
    "default_config",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
]
