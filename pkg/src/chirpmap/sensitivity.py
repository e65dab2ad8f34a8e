"""Feature-sensitivity maps over the embedding.

Two random-forest regressors learn each embedding coordinate from the
original three features; exact Shapley values over all 2^d feature
subsets attribute every prediction back to the features, and the x/y
attributions are combined into one magnitude per feature per record.

The subset value v(S) is the tree-conditional expectation: walking a
tree, a split on a feature in S follows the instance's branch, a split
on a feature outside S descends both branches weighted by the training
proportions stored at the nodes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError
from .ingest import FEATURE_NAMES, FeatureMatrix
from .models import DecisionTree, ForestConfig, RandomForestModel, fit_random_forest
from .models.tree import TreeNode
from .seeding import derive_seed
from .tsne import Embedding

COMBINATION_RULES = ("euclidean", "sum_abs")


@dataclass(frozen=True)
class SensitivityConfig:
    n_trees: int = 100
    max_depth: int | None = None
    seed: int = 0
    combination: str = "euclidean"

    def __post_init__(self):
        if self.combination not in COMBINATION_RULES:
            raise DataError(f"unknown combination rule {self.combination!r}")


@dataclass
class CoordinateRegressors:
    model_x: RandomForestModel
    model_y: RandomForestModel
    r2_x: float
    r2_y: float
    constant_x: bool  # target had zero spread; R^2 reported as 1.0 by convention
    constant_y: bool


def _r_squared(target: np.ndarray, predicted: np.ndarray) -> tuple[float, bool]:
    ss_tot = float(np.sum((target - target.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0, True
    ss_res = float(np.sum((target - predicted) ** 2))
    return 1.0 - ss_res / ss_tot, False


def fit_coordinate_regressors(
    features,
    embedding,
    config: SensitivityConfig = SensitivityConfig(),
) -> CoordinateRegressors:
    x = features.values if isinstance(features, FeatureMatrix) else np.asarray(features, dtype=np.float64)
    coords = embedding.coords if isinstance(embedding, Embedding) else np.asarray(embedding, dtype=np.float64)
    if x.shape[0] != coords.shape[0]:
        raise DataError("features misaligned with embedding rows")
    if x.shape[0] < 10:
        raise DataError("need at least 10 rows to fit coordinate regressors")

    models = []
    stats = []
    for axis, name in enumerate(("x", "y")):
        fc = ForestConfig(
            n_trees=config.n_trees,
            max_depth=config.max_depth,
            seed=derive_seed(config.seed, f"coord-{name}"),
            task="regression",
        )
        model = fit_random_forest(x, coords[:, axis], fc)
        r2, constant = _r_squared(coords[:, axis], model.predict(x))
        models.append(model)
        stats.append((r2, constant))
    return CoordinateRegressors(
        model_x=models[0],
        model_y=models[1],
        r2_x=stats[0][0],
        r2_y=stats[1][0],
        constant_x=stats[0][1],
        constant_y=stats[1][1],
    )


def _subset_masks(d: int, feature: int) -> tuple[list[int], list[int]]:
    with_f = [s for s in range(1 << d) if (s >> feature) & 1]
    without_f = [s for s in range(1 << d) if not (s >> feature) & 1]
    return with_f, without_f


def _accumulate(node: TreeNode, x: np.ndarray, weights: np.ndarray, out: np.ndarray) -> None:
    """DFS adding weight * leaf value into out (N x 2^d) per subset."""
    if node.is_leaf:
        out += weights * node.value
        return
    d = x.shape[1]
    with_f, without_f = _subset_masks(d, node.feature)
    goes_left = x[:, node.feature] <= node.threshold
    nl = node.left.n_samples
    nr = node.right.n_samples
    n = node.n_samples
    w_left = weights.copy()
    w_right = weights
    w_left[:, with_f] *= goes_left[:, None]
    w_right = w_right.copy()
    w_right[:, with_f] *= (~goes_left)[:, None]
    w_left[:, without_f] *= nl / n
    w_right[:, without_f] *= nr / n
    if np.any(w_left):
        _accumulate(node.left, x, w_left, out)
    if np.any(w_right):
        _accumulate(node.right, x, w_right, out)


def tree_subset_values(tree: DecisionTree, instances) -> np.ndarray:
    """v(S) for every instance and every feature subset of one tree.

    Returns an (N, 2^d) array; column s holds v(S) for the subset whose
    members are the set bits of s.
    """
    x = np.atleast_2d(np.asarray(instances, dtype=np.float64))
    if not np.isfinite(x).all():
        raise DataError("instances must be finite")
    if x.shape[1] != tree.n_features:
        raise DataError(f"expected {tree.n_features} features, got {x.shape[1]}")
    out = np.zeros((x.shape[0], 1 << tree.n_features), dtype=np.float64)
    _accumulate(tree.root, x, np.ones_like(out), out)
    return out


def shapley_from_subset_values(values: np.ndarray, d: int) -> np.ndarray:
    """Combine subset values into Shapley values.

    phi_j = sum over subsets S not containing j of
    |S|! (d-|S|-1)! / d! * (v(S + j) - v(S)). Numerators are integer
    factorials and each per-feature sum is exact (math.fsum), so the
    result is bit-for-bit comparable with an orderings enumeration.
    """
    values = np.atleast_2d(values)
    n = values.shape[0]
    d_fact = math.factorial(d)
    phi = np.zeros((n, d), dtype=np.float64)
    for j in range(d):
        terms = []
        for s in range(1 << d):
            if (s >> j) & 1:
                continue
            k = bin(s).count("1")
            terms.append((s, s | (1 << j), math.factorial(k) * math.factorial(d - k - 1)))
        for i in range(n):
            phi[i, j] = (
                math.fsum(w * (values[i, hi] - values[i, lo]) for lo, hi, w in terms)
                / d_fact
            )
    return phi


@dataclass
class ShapleyAttribution:
    phi: np.ndarray  # N x d
    base: float  # v(empty set), averaged over trees
    predictions: np.ndarray  # N


def shapley_values(model, instances) -> ShapleyAttribution:
    """Exact Shapley attributions for a tree or a regression forest.

    Ensemble attributions are the per-tree values averaged; efficiency
    (sum phi + base = prediction) is asserted to 1e-9 for every instance.
    """
    x = np.atleast_2d(np.asarray(instances, dtype=np.float64))
    if isinstance(model, DecisionTree):
        trees = [model]
    elif isinstance(model, RandomForestModel):
        if model.config.task != "regression":
            raise DataError("shapley attributions require regression trees (votes are not additive)")
        trees = model.trees
    else:
        raise DataError(f"cannot attribute model of type {type(model).__name__}")

    d = trees[0].n_features
    full = (1 << d) - 1
    phi_sum = np.zeros((x.shape[0], d), dtype=np.float64)
    base_sum = 0.0
    pred_sum = np.zeros(x.shape[0], dtype=np.float64)
    for tree in trees:
        values = tree_subset_values(tree, x)
        phi_sum += shapley_from_subset_values(values, d)
        base_sum += float(values[0, 0])  # v(empty) is instance-independent
        pred_sum += values[:, full]
    n_trees = len(trees)
    phi = phi_sum / n_trees
    base = base_sum / n_trees
    predictions = pred_sum / n_trees

    gap = np.abs(phi.sum(axis=1) + base - predictions)
    worst = int(np.argmax(gap))
    if gap[worst] > 1e-9:
        raise NumericError(
            f"attribution efficiency violated at instance {worst}: gap {gap[worst]:.3e}"
        )
    return ShapleyAttribution(phi=phi, base=base, predictions=predictions)


@dataclass
class SensitivityMap:
    ids: list[str]
    feature_names: tuple[str, ...]
    phi_x: np.ndarray  # N x d
    phi_y: np.ndarray  # N x d
    combined: np.ndarray  # N x d, nonnegative
    base_x: float
    base_y: float
    combination: str
    r2_x: float | None = None
    r2_y: float | None = None


def build_sensitivity_map(
    regressors: CoordinateRegressors,
    features,
    combination: str = "euclidean",
) -> SensitivityMap:
    if combination not in COMBINATION_RULES:
        raise DataError(f"unknown combination rule {combination!r}")
    if isinstance(features, FeatureMatrix):
        x = features.values
        ids = list(features.ids)
        names = tuple(features.feature_names)
    else:
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        ids = [str(i) for i in range(x.shape[0])]
        names = tuple(FEATURE_NAMES[: x.shape[1]])

    att_x = shapley_values(regressors.model_x, x)
    att_y = shapley_values(regressors.model_y, x)
    if combination == "euclidean":
        combined = np.sqrt(att_x.phi**2 + att_y.phi**2)
    else:
        combined = np.abs(att_x.phi) + np.abs(att_y.phi)
    return SensitivityMap(
        ids=ids,
        feature_names=names,
        phi_x=att_x.phi,
        phi_y=att_y.phi,
        combined=combined,
        base_x=att_x.base,
        base_y=att_y.base,
        combination=combination,
        r2_x=regressors.r2_x,
        r2_y=regressors.r2_y,
    )


def sensitivity_summary(smap: SensitivityMap) -> dict:
    """Per-feature distribution statistics of the combined magnitudes."""
    if smap.combined.size == 0:
        raise DataError("empty sensitivity map")
    summary: dict = {}
    for j, name in enumerate(smap.feature_names):
        col = smap.combined[:, j]
        q25, q50, q75 = np.quantile(col, (0.25, 0.5, 0.75))
        summary[name] = {
            "mean": float(col.mean()),
            "max": float(col.max()),
            "q25": float(q25),
            "median": float(q50),
            "q75": float(q75),
        }
    return summary


def save_sensitivity_map(smap: SensitivityMap, csv_path: str, meta_path: str, extra_metadata: dict | None = None) -> None:
    """Write one row per (record, feature) plus a JSON sidecar."""
    with open(csv_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "feature", "phi_x", "phi_y", "combined"])
        for i, rec_id in enumerate(smap.ids):
            for j, name in enumerate(smap.feature_names):
                writer.writerow(
                    [
                        rec_id,
                        name,
                        repr(float(smap.phi_x[i, j])),
                        repr(float(smap.phi_y[i, j])),
                        repr(float(smap.combined[i, j])),
                    ]
                )
    meta = {
        "base_x": smap.base_x,
        "base_y": smap.base_y,
        "combination": smap.combination,
        "r2_x": smap.r2_x,
        "r2_y": smap.r2_y,
        "feature_names": list(smap.feature_names),
        "n_records": len(smap.ids),
    }
    if extra_metadata:
        meta.update(extra_metadata)
    with open(meta_path, "w", encoding="utf-8") as handle:
        json.dump(meta, handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_sensitivity_map(csv_path: str, meta_path: str) -> SensitivityMap:
    try:
        with open(meta_path, encoding="utf-8") as handle:
            meta = json.load(handle)
    except OSError as exc:
        raise DataError(f"cannot read {meta_path}: {exc}") from exc
    names = tuple(meta["feature_names"])
    ids: list[str] = []
    rows: dict[str, dict[str, tuple[float, float, float]]] = {}
    try:
        handle = open(csv_path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {csv_path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["id", "feature", "phi_x", "phi_y", "combined"]:
            raise DataError(f"{csv_path} is not a sensitivity file")
        for row in reader:
            rec_id, feature = row[0], row[1]
            if rec_id not in rows:
                rows[rec_id] = {}
                ids.append(rec_id)
            rows[rec_id][feature] = (float(row[2]), float(row[3]), float(row[4]))
    if not ids:
        raise DataError(f"{csv_path} contains no attributions")
    n, d = len(ids), len(names)
    phi_x = np.zeros((n, d))
    phi_y = np.zeros((n, d))
    combined = np.zeros((n, d))
    for i, rec_id in enumerate(ids):
        for j, name in enumerate(names):
            if name not in rows[rec_id]:
                raise DataError(f"record {rec_id} missing feature {name}")
            phi_x[i, j], phi_y[i, j], combined[i, j] = rows[rec_id][name]
    return SensitivityMap(
        ids=ids,
        feature_names=names,
        phi_x=phi_x,
        phi_y=phi_y,
        combined=combined,
        base_x=meta["base_x"],
        base_y=meta["base_y"],
        combination=meta.get("combination", "euclidean"),
        r2_x=meta.get("r2_x"),
        r2_y=meta.get("r2_y"),
    )
