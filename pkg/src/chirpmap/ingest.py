"""Loading, validation, and preprocessing of annotated chirp records.

A record carries three scalar features (temporal duration in seconds,
frequency onset in hertz, spectral duration in hertz), a clinical outcome
code, and a difficulty level. Rows failing validation are dropped and
reported, never imputed. Features are standardized column-wise
((value - mean) / population sd) and may then be scaled by per-feature
weights to emphasize a feature's contribution to distances.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError

FEATURE_NAMES = ("temporal_duration", "frequency_onset", "spectral_duration")
OUTCOME_CODES = ("S", "NR", "F")
DIFFICULTY_LEVELS = (1, 2, 3, 4)

CANONICAL_COLUMNS = ("id",) + FEATURE_NAMES + ("outcome", "difficulty")


@dataclass(frozen=True)
class ChirpRecord:
    """One annotated chirp event."""

    id: str
    temporal_duration: float
    frequency_onset: float
    spectral_duration: float
    outcome: str
    difficulty: int

    @property
    def features(self) -> np.ndarray:
        return np.array(
            [self.temporal_duration, self.frequency_onset, self.spectral_duration],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class FeatureWeights:
    """Per-feature multipliers applied after standardization."""

    temporal: float = 1.0
    frequency: float = 1.0
    spectral: float = 1.0

    def __post_init__(self) -> None:
        vals = (self.temporal, self.frequency, self.spectral)
        if any(w < 0 for w in vals):
            raise DataError(f"feature weights must be nonnegative, got {vals}")
        if not any(w > 0 for w in vals):
            raise DataError("at least one feature weight must be strictly positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.temporal, self.frequency, self.spectral], dtype=np.float64)


@dataclass
class FeatureMatrix:
    """Numeric feature matrix aligned with record order.

    ``scaling`` records the per-column (mean, sd) used by ``standardize``;
    it is None for a raw matrix. ``weights`` records the multipliers
    applied by ``apply_weights``.
    """

    ids: list[str]
    values: np.ndarray  # N x 3 float64
    feature_names: tuple[str, ...] = FEATURE_NAMES
    scaling: list[tuple[float, float]] | None = None
    weights: FeatureWeights | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError("feature matrix must be 2-D")
        if len(self.ids) != self.values.shape[0]:
            raise DataError("ids and value rows are misaligned")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]


@dataclass
class RejectionReport:
    """Outcome of row validation: counts plus one (row, reason) per reject.

    Row numbers are 1-based over the data rows (the header is not counted).
    """

    n_input: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)

    @property
    def n_rejected(self) -> int:
        return len(self.rejected)

    @property
    def n_accepted(self) -> int:
        return self.n_input - self.n_rejected

    def to_text(self) -> str:
        lines = [f"row {row}: {reason}" for row, reason in self.rejected]
        return "\n".join(lines) + ("\n" if lines else "")


def _parse_feature(raw: str | None, column: str) -> tuple[float | None, str | None]:
    if raw is None or raw.strip() == "":
        return None, f"missing value ({column})"
    try:
        value = float(raw)
    except ValueError:
        return None, f"invalid number ({column})"
    if not math.isfinite(value):
        return None, f"non-finite value ({column})"
    if value <= 0:
        return None, f"non-positive value ({column})"
    return value, None


def _parse_row(row: dict[str, str], columns: dict[str, str]) -> tuple[ChirpRecord | None, str | None]:
    rec_id = (row.get(columns["id"]) or "").strip()
    if not rec_id:
        return None, "missing value (id)"

    feats: dict[str, float] = {}
    for name in FEATURE_NAMES:
        value, reason = _parse_feature(row.get(columns[name]), name)
        if reason is not None:
            return None, reason
        feats[name] = value

    outcome = (row.get(columns["outcome"]) or "").strip()
    if not outcome:
        return None, "missing value (outcome)"
    if outcome not in OUTCOME_CODES:
        return None, f"unknown outcome code ({outcome!r})"

    raw_difficulty = (row.get(columns["difficulty"]) or "").strip()
    if not raw_difficulty:
        return None, "missing value (difficulty)"
    try:
        diff_value = float(raw_difficulty)
    except ValueError:
        return None, f"invalid number (difficulty)"
    if not math.isfinite(diff_value) or not diff_value.is_integer():
        return None, f"difficulty out of range ({raw_difficulty})"
    difficulty = int(diff_value)
    if difficulty not in DIFFICULTY_LEVELS:
        return None, f"difficulty out of range ({difficulty})"

    return (
        ChirpRecord(
            id=rec_id,
            temporal_duration=feats["temporal_duration"],
            frequency_onset=feats["frequency_onset"],
            spectral_duration=feats["spectral_duration"],
            outcome=outcome,
            difficulty=difficulty,
        ),
        None,
    )


def load_records(
    path: str,
    schema: dict[str, str] | None = None,
    delimiter: str = ",",
) -> tuple[list[ChirpRecord], RejectionReport]:
    """Read a delimited text file into validated records.

    ``schema`` maps canonical column names to the file's actual header
    names; omitted entries default to the canonical names. Rows with any
    missing, non-numeric, non-finite, or non-positive feature, an unknown
    outcome code, or a difficulty outside 1..4 are rejected with a reason.
    Accepted rows keep their input order.
    """
    columns = {name: name for name in CANONICAL_COLUMNS}
    if schema:
        unknown = set(schema) - set(CANONICAL_COLUMNS)
        if unknown:
            raise DataError(f"schema maps unknown canonical columns: {sorted(unknown)}")
        columns.update(schema)

    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    with handle:
        reader = csv.DictReader(handle, delimiter=delimiter)
        header = reader.fieldnames
        if header is None:
            raise DataError(f"{path} has no header row")
        missing = [col for col in columns.values() if col not in header]
        if missing:
            raise DataError(f"header is missing mapped columns: {missing}")

        records: list[ChirpRecord] = []
        report = RejectionReport()
        for row_number, row in enumerate(reader, start=1):
            report.n_input += 1
            record, reason = _parse_row(row, columns)
            if record is None:
                report.rejected.append((row_number, reason))
            else:
                records.append(record)

    if not records:
        raise DataError(f"{path} contains zero valid rows")
    return records, report


def records_to_matrix(records: list[ChirpRecord]) -> FeatureMatrix:
    """Stack record features into a raw (unscaled) matrix."""
    if not records:
        raise DataError("no records to build a feature matrix from")
    values = np.array([r.features for r in records], dtype=np.float64)
    return FeatureMatrix(ids=[r.id for r in records], values=values)


def standardize(matrix: FeatureMatrix) -> FeatureMatrix:
    """Center and scale each column to mean 0 and population sd 1.

    The (mean, sd) pair per column is recorded on the result so the
    transform is auditable and reversible.
    """
    if matrix.n_rows < 2:
        raise DataError("standardization needs at least 2 rows")
    means = matrix.values.mean(axis=0)
    sds = matrix.values.std(axis=0)  # population (1/N) convention
    for j, sd in enumerate(sds):
        if sd == 0:
            raise DataError(f"constant column ({matrix.feature_names[j]}): zero spread")
    values = (matrix.values - means) / sds
    scaling = [(float(m), float(s)) for m, s in zip(means, sds)]
    return replace(matrix, values=values, scaling=scaling)


def apply_weights(matrix: FeatureMatrix, weights: FeatureWeights) -> FeatureMatrix:
    """Multiply each standardized column by its weight.

    A weight of 2 quadruples the feature's contribution to squared
    Euclidean distance, which is what downstream embeddings consume.
    """
    if matrix.scaling is None:
        raise DataError("apply_weights requires a standardized matrix")
    values = matrix.values * weights.as_array()[None, :]
    return replace(matrix, values=values, weights=weights)


def class_distribution(records: list[ChirpRecord]) -> dict[str, dict]:
    """Proportion of records per outcome code and per difficulty level.

    Only observed categories appear, in canonical order; each grouping
    sums to 1.
    """
    if not records:
        raise DataError("class_distribution needs at least one record")
    n = len(records)
    outcome: dict[str, float] = {}
    for code in OUTCOME_CODES:
        count = sum(1 for r in records if r.outcome == code)
        if count:
            outcome[code] = count / n
    difficulty: dict[int, float] = {}
    for level in DIFFICULTY_LEVELS:
        count = sum(1 for r in records if r.difficulty == level)
        if count:
            difficulty[level] = count / n
    return {"outcome": outcome, "difficulty": difficulty}


def subsample_records(records: list[ChirpRecord], n: int, seed: int) -> list[ChirpRecord]:
    """Seeded uniform subsample without replacement, preserving input order."""
    if n <= 0:
        raise DataError(f"subsample size must be positive, got {n}")
    if n >= len(records):
        return list(records)
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(len(records), size=n, replace=False))
    return [records[i] for i in keep]
