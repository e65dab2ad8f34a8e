"""Scenario encoding, stratified splitting, and classifier evaluation.

Three binary labelings of the records are evaluated: success vs rest,
difficult vs easy, and optimal (success at low difficulty) vs rest.
Accuracy is averaged over stratified k-fold cross-validation; precision,
recall, and F1 come from a stratified hold-out split. The reported
accuracy spread is the population standard deviation over fold
accuracies, and that definition is recorded in the report metadata.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DataError
from .models import CLASSIFIER_KINDS, default_config, fit_classifier
from .seeding import derive_seed


@dataclass(frozen=True)
class Scenario:
    key: str
    positive_name: str
    description: str
    rule: Callable[[str, int], bool]

    def is_positive(self, outcome: str, difficulty: int) -> bool:
        return self.rule(outcome, difficulty)


SCENARIOS: dict[str, Scenario] = {
    "s1": Scenario(
        key="s1",
        positive_name="success",
        description="surgical success vs no-resection or failure",
        rule=lambda outcome, difficulty: outcome == "S",
    ),
    "s2": Scenario(
        key="s2",
        positive_name="high_difficulty",
        description="difficult cases (levels 3-4) vs easy cases (levels 1-2)",
        rule=lambda outcome, difficulty: difficulty in (3, 4),
    ),
    "s3": Scenario(
        key="s3",
        positive_name="optimal",
        description="success at low difficulty (levels 1-2) vs everything else",
        rule=lambda outcome, difficulty: outcome == "S" and difficulty in (1, 2),
    ),
}

SCENARIO_ORDER = ("s1", "s2", "s3")


def encode_scenario(records, scenario: Scenario) -> tuple[np.ndarray, dict]:
    """Binary labels per the scenario rule, plus the class balance."""
    if not records:
        raise DataError("encode_scenario needs at least one record")
    labels = np.array(
        [1 if scenario.is_positive(r.outcome, r.difficulty) else 0 for r in records],
        dtype=np.int64,
    )
    n_pos = int(labels.sum())
    balance = {
        "positive": n_pos,
        "negative": int(labels.size - n_pos),
        "positive_fraction": n_pos / labels.size,
    }
    return labels, balance


def stratified_kfold(labels, k: int, seed: int) -> list[np.ndarray]:
    """Seeded stratified partition into k folds.

    Each class is shuffled independently and dealt round-robin, so every
    fold's class count is within one of exact proportionality.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise DataError("k must be >= 2")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in np.unique(labels):
        idx = np.nonzero(labels == cls)[0]
        if idx.size < k:
            raise DataError(
                f"class {int(cls)} has {idx.size} members, fewer than k={k}"
            )
        rng.shuffle(idx)
        for f in range(k):
            folds[f].extend(idx[f::k].tolist())
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


def holdout_split(labels, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded stratified split with test size round(fraction * N).

    Per-class test counts follow largest-remainder apportionment of the
    total, keeping every class within one of its exact proportional
    share.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.size
    if not 0.0 < fraction < 1.0:
        raise DataError("holdout fraction must be in (0, 1)")
    classes = np.unique(labels)
    counts = {int(c): int(np.sum(labels == c)) for c in classes}
    if any(v < 2 for v in counts.values()):
        raise DataError("holdout_split needs at least 2 members per class")
    n_test = int(round(fraction * n))
    n_test = max(1, min(n - 1, n_test))

    quotas = {c: counts[c] * n_test / n for c in counts}
    take = {c: int(np.floor(quotas[c])) for c in quotas}
    remaining = n_test - sum(take.values())
    by_remainder = sorted(quotas, key=lambda c: (-(quotas[c] - take[c]), c))
    for c in by_remainder[:remaining]:
        take[c] += 1

    rng = np.random.default_rng(seed)
    test_parts: list[np.ndarray] = []
    train_parts: list[np.ndarray] = []
    for c in sorted(counts):
        idx = np.nonzero(labels == c)[0]
        rng.shuffle(idx)
        test_parts.append(idx[: take[c]])
        train_parts.append(idx[take[c] :])
    test = np.array(sorted(np.concatenate(test_parts).tolist()), dtype=np.int64)
    train = np.array(sorted(np.concatenate(train_parts).tolist()), dtype=np.int64)
    return train, test


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}

    @staticmethod
    def from_predictions(y_true, y_pred) -> "ConfusionMatrix":
        t = np.asarray(y_true, dtype=np.int64)
        p = np.asarray(y_pred, dtype=np.int64)
        if t.shape != p.shape:
            raise DataError("prediction/label shape mismatch")
        return ConfusionMatrix(
            tp=int(np.sum((t == 1) & (p == 1))),
            fp=int(np.sum((t == 0) & (p == 1))),
            tn=int(np.sum((t == 0) & (p == 0))),
            fn=int(np.sum((t == 1) & (p == 0))),
        )


def compute_metrics(cm: ConfusionMatrix) -> dict:
    """Accuracy, precision, recall, F1 with explicit zero-division rules:
    precision is 0 when nothing was predicted positive, recall is 0 when
    nothing is positive, F1 is 0 when precision and recall are both 0.
    """
    if cm.total < 1:
        raise DataError("empty confusion matrix")
    accuracy = (cm.tp + cm.tn) / cm.total
    precision = cm.tp / (cm.tp + cm.fp) if (cm.tp + cm.fp) > 0 else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if (cm.tp + cm.fn) > 0 else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if (precision + recall) > 0
        else 0.0
    )
    return {"accuracy": accuracy, "precision": precision, "recall": recall, "f1": f1}


def cross_validate(
    coords,
    labels,
    kind: str,
    k: int = 5,
    seed: int = 0,
    config=None,
) -> dict:
    """Stratified k-fold CV of one classifier kind.

    Folds depend only on (labels, k, seed), so different classifiers
    evaluated under the same seed see identical folds. Per-fold training
    seeds are derived from the fold seed.
    """
    coords = np.asarray(coords, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    folds = stratified_kfold(labels, k, seed)
    all_idx = np.arange(labels.size)
    accuracies: list[float] = []
    confusions: list[dict] = []
    for f, test_idx in enumerate(folds):
        train_mask = np.ones(labels.size, dtype=bool)
        train_mask[test_idx] = False
        train_idx = all_idx[train_mask]
        fit_seed = derive_seed(seed, f"fold{f}:{kind}")
        model = fit_classifier(kind, coords[train_idx], labels[train_idx], seed=fit_seed, config=config)
        cm = ConfusionMatrix.from_predictions(labels[test_idx], model.predict(coords[test_idx]))
        accuracies.append(compute_metrics(cm)["accuracy"])
        confusions.append(cm.to_dict())
    acc = np.array(accuracies)
    return {
        "cv_accuracy_mean": float(acc.mean()),
        "cv_accuracy_sd": float(acc.std()),  # population sd over folds
        "fold_accuracies": accuracies,
        "fold_confusions": confusions,
        "fold_assignments": [f.tolist() for f in folds],
        "cv_seed": seed,
    }


def run_all_scenarios(
    coords,
    records,
    master_seed: int = 0,
    scenario_keys=SCENARIO_ORDER,
    classifier_kinds=CLASSIFIER_KINDS,
    k_folds: int = 5,
    holdout_fraction: float = 0.3,
    classifier_configs: dict | None = None,
) -> tuple[dict, dict]:
    """Full scenario x classifier evaluation grid.

    Returns (report, models) where models maps (scenario_key, kind) to
    the classifier trained on that scenario's hold-out training split;
    those are the models the decision-boundary figures draw.
    """
    coords = np.asarray(coords, dtype=np.float64)
    if coords.shape[0] != len(records):
        raise DataError("embedding rows misaligned with records")
    classifier_configs = classifier_configs or {}

    report: dict = {
        "master_seed": master_seed,
        "k_folds": k_folds,
        "holdout_fraction": holdout_fraction,
        "accuracy_sd_definition": "population standard deviation over fold accuracies",
        "scenarios": {},
    }
    models: dict[tuple[str, str], object] = {}

    for key in scenario_keys:
        if key not in SCENARIOS:
            raise DataError(f"unknown scenario {key!r}")
        scenario = SCENARIOS[key]
        labels, balance = encode_scenario(records, scenario)
        cv_seed = derive_seed(master_seed, f"cv:{key}")
        holdout_seed = derive_seed(master_seed, f"holdout:{key}")
        train_idx, test_idx = holdout_split(labels, holdout_fraction, holdout_seed)

        entry: dict = {
            "description": scenario.description,
            "positive_name": scenario.positive_name,
            "class_balance": balance,
            "holdout_seed": holdout_seed,
            "holdout_test_indices": test_idx.tolist(),
            "classifiers": {},
        }
        for kind in classifier_kinds:
            config = classifier_configs.get(kind)
            cv = cross_validate(coords, labels, kind, k=k_folds, seed=cv_seed, config=config)
            fit_seed = derive_seed(master_seed, f"holdout-fit:{key}:{kind}")
            model = fit_classifier(
                kind, coords[train_idx], labels[train_idx], seed=fit_seed, config=config
            )
            cm = ConfusionMatrix.from_predictions(
                labels[test_idx], model.predict(coords[test_idx])
            )
            holdout_metrics = compute_metrics(cm)
            holdout_metrics["confusion"] = cm.to_dict()
            entry["classifiers"][kind] = {
                "cv_accuracy_mean": cv["cv_accuracy_mean"],
                "cv_accuracy_sd": cv["cv_accuracy_sd"],
                "fold_accuracies": cv["fold_accuracies"],
                "fold_confusions": cv["fold_confusions"],
                "holdout": holdout_metrics,
            }
            models[(key, kind)] = model
        # folds depend only on (labels, k, seed): identical for every classifier
        entry["fold_assignments"] = [
            f.tolist() for f in stratified_kfold(labels, k_folds, cv_seed)
        ]
        entry["cv_seed"] = cv_seed
        report["scenarios"][key] = entry

    return report, models


def save_eval_report(report: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report, handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_eval_report(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except OSError as exc:
        raise DataError(f"cannot read report {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"report {path} is not valid JSON: {exc}") from exc
