"""JSON round-trip for fitted models.

Documents carry {kind, config, parameters} and reconstruct models whose
predictions are bit-identical to the originals (floats survive via
shortest round-trip repr, which json uses natively).
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from ..errors import DataError
from .forest import ForestConfig, RandomForestModel
from .knn import KnnConfig, KnnModel
from .logistic import LogisticConfig, LogisticModel
from .svm import SvmConfig, SvmModel
from .tree import DecisionTree, TreeConfig, TreeNode


def _node_to_dict(node: TreeNode) -> dict:
    doc: dict = {"n": node.n_samples, "value": node.value, "counts": node.counts}
    if node.feature is not None:
        doc["feature"] = node.feature
        doc["threshold"] = node.threshold
        doc["left"] = _node_to_dict(node.left)
        doc["right"] = _node_to_dict(node.right)
    return doc


def _node_from_dict(doc: dict) -> TreeNode:
    node = TreeNode(n_samples=doc["n"], value=doc["value"], counts=doc.get("counts"))
    if "feature" in doc:
        node.feature = doc["feature"]
        node.threshold = doc["threshold"]
        node.left = _node_from_dict(doc["left"])
        node.right = _node_from_dict(doc["right"])
    return node


def model_to_dict(model) -> dict:
    kind = getattr(model, "kind", None)
    if kind == "random_forest":
        return {
            "kind": kind,
            "config": asdict(model.config),
            "parameters": {
                "n_features": model.n_features,
                "n_classes": model.n_classes,
                "trees": [_node_to_dict(t.root) for t in model.trees],
            },
        }
    if kind == "svm":
        return {
            "kind": kind,
            "config": asdict(model.config),
            "parameters": {
                "x": model.x.tolist(),
                "y_signed": model.y_signed.tolist(),
                "alpha": model.alpha.tolist(),
                "b": model.b,
                "gamma_value": model.gamma_value,
                "converged": model.converged,
                "dual_objective": model.dual_objective,
                "n_updates": model.n_updates,
            },
        }
    if kind == "logistic_regression":
        return {
            "kind": kind,
            "config": asdict(model.config),
            "parameters": {
                "w": model.w.tolist(),
                "b": model.b,
                "converged": model.converged,
                "n_iters": model.n_iters,
                "final_gradient_norm": model.final_gradient_norm,
            },
        }
    if kind == "knn":
        return {
            "kind": kind,
            "config": asdict(model.config),
            "parameters": {"x": model.x.tolist(), "y": model.y.tolist()},
        }
    raise DataError(f"cannot serialize model of kind {kind!r}")


def model_from_dict(doc: dict):
    kind = doc.get("kind")
    cfg = doc.get("config", {})
    params = doc.get("parameters", {})
    if kind == "random_forest":
        config = ForestConfig(**cfg)
        tree_config = TreeConfig(task=config.task, max_depth=config.max_depth)
        trees = [
            DecisionTree(
                root=_node_from_dict(t),
                config=tree_config,
                n_features=params["n_features"],
                n_classes=params["n_classes"],
            )
            for t in params["trees"]
        ]
        return RandomForestModel(
            trees=trees,
            config=config,
            n_features=params["n_features"],
            n_classes=params["n_classes"],
        )
    if kind == "svm":
        return SvmModel(
            x=np.array(params["x"], dtype=np.float64),
            y_signed=np.array(params["y_signed"], dtype=np.float64),
            alpha=np.array(params["alpha"], dtype=np.float64),
            b=params["b"],
            config=SvmConfig(**cfg),
            gamma_value=params["gamma_value"],
            converged=params["converged"],
            dual_objective=params["dual_objective"],
            n_updates=params["n_updates"],
        )
    if kind == "logistic_regression":
        return LogisticModel(
            w=np.array(params["w"], dtype=np.float64),
            b=params["b"],
            config=LogisticConfig(**cfg),
            converged=params["converged"],
            n_iters=params["n_iters"],
            final_gradient_norm=params["final_gradient_norm"],
        )
    if kind == "knn":
        return KnnModel(
            x=np.array(params["x"], dtype=np.float64),
            y=np.array(params["y"], dtype=np.int64),
            config=KnnConfig(**cfg),
        )
    raise DataError(f"cannot load model of kind {kind!r}")


def save_model(model, path: str, extra: dict | None = None) -> None:
    doc = model_to_dict(model)
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_model(path: str):
    try:
        with open(path, encoding="utf-8") as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"model file {path} is not valid JSON: {exc}") from exc
    return model_from_dict(doc)


__all__ = ["model_to_dict", "model_from_dict", "save_model", "load_model"]
