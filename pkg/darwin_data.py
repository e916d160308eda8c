"""Load the DARWIN handwriting dataset and prepare it for the classifiers.

The CSV has one row per participant: an `ID` column, 450 feature columns
(25 tasks x 18 features, task-major) and a `class` column with H/P labels.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd


ID_COLUMN = "ID"
CLASS_COLUMN = "class"

# Label encoding: healthy -> -1, AD patient -> +1
LABELS = {"H": -1, "P": 1}

N_TASKS = 25
FEATURES_PER_TASK = 18
N_FEATURES = N_TASKS * FEATURES_PER_TASK

# Per-task feature names as they appear in the DARWIN CSV, e.g. "air_time1"
FEATURE_NAMES = [
    "air_time", "disp_index", "gmrt_in_air", "gmrt_on_paper",
    "max_x_extension", "max_y_extension", "mean_acc_in_air", "mean_acc_on_paper",
    "mean_gmrt", "mean_jerk_in_air", "mean_jerk_on_paper", "mean_speed_in_air",
    "mean_speed_on_paper", "num_of_pendown", "paper_time", "pressure_mean",
    "pressure_var", "total_time",
]

# Task categories: memory and dictation (M), graphic (G), copy (C)
TASK_CATEGORIES = {
    "M": frozenset({1, 14, 18, 20, 23}),
    "G": frozenset({2, 3, 4, 5, 21, 24}),
    "C": frozenset({6, 7, 8, 9, 10, 11, 12, 13, 15, 16, 17, 19, 22, 25}),
}
CATEGORY_NAMES = {"M": "Memory", "G": "Graphic", "C": "Copy"}


class DatasetError(ValueError):
    """Schema or parse failure in a dataset file, with its location."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column


@dataclass(frozen=True)
class DarwinRecord:
    """One participant: 450 task-major feature values and an H/P label."""
    participant_id: str
    features: Tuple[float, ...]
    label: str


@dataclass(frozen=True)
class FeatureMatrix:
    """Rows of features with +/-1 labels (-1 healthy, +1 patient)."""
    data: np.ndarray
    labels: np.ndarray
    column_names: Tuple[str, ...]
    row_ids: Optional[np.ndarray] = None  # dataset row index of each row

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        labels = np.asarray(self.labels, dtype=int)
        if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] == 0:
            raise ValueError(f"Feature matrix must be a non-empty 2-D array, got shape {data.shape}")
        if labels.shape != (data.shape[0],):
            raise ValueError(f"Expected {data.shape[0]} labels, got {labels.shape[0]}")
        if not np.isin(labels, (-1, 1)).all():
            raise ValueError("Labels must be -1 or +1")
        if not np.isfinite(data).all():
            raise ValueError("Feature matrix contains NaN or Inf")
        if len(self.column_names) != data.shape[1]:
            raise ValueError(f"Expected {data.shape[1]} column names, got {len(self.column_names)}")
        row_ids = np.arange(data.shape[0]) if self.row_ids is None else np.asarray(self.row_ids, dtype=int)
        if row_ids.shape != (data.shape[0],):
            raise ValueError("row_ids must have one entry per row")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "row_ids", row_ids)

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def n_features(self) -> int:
        return self.data.shape[1]

    def take(self, indices: Sequence[int]) -> "FeatureMatrix":
        """Row subset, keeping the dataset row ids."""
        idx = np.asarray(indices, dtype=int)
        return FeatureMatrix(self.data[idx], self.labels[idx], self.column_names, self.row_ids[idx])

    def with_data(self, data: np.ndarray, column_names: Sequence[str]) -> "FeatureMatrix":
        """Same rows and labels, new columns."""
        return FeatureMatrix(data, self.labels, tuple(column_names), self.row_ids)


@dataclass(frozen=True)
class Scaler:
    """Per-column mean and population standard deviation."""
    mean: np.ndarray
    std: np.ndarray

    def transform(self, m: FeatureMatrix) -> FeatureMatrix:
        # Constant columns keep a unit divisor and map to zeros
        scale = np.where(self.std > 0, self.std, 1.0)
        return m.with_data((m.data - self.mean) / scale, m.column_names)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}


@dataclass(frozen=True)
class PcaModel:
    """Top-k principal directions of centered data."""
    mean: np.ndarray
    components: np.ndarray          # k x D, orthonormal rows
    explained_variance: np.ndarray  # length k, nonincreasing

    @property
    def k(self) -> int:
        return self.components.shape[0]

    def transform(self, m: FeatureMatrix) -> FeatureMatrix:
        projected = (m.data - self.mean) @ self.components.T
        return m.with_data(projected, [f"pc{i + 1}" for i in range(self.k)])

    def inverse_transform(self, projected: np.ndarray) -> np.ndarray:
        return projected @ self.components + self.mean


@dataclass(frozen=True)
class Preprocessor:
    """standardize -> PCA -> standardize, fitted once and reusable on new rows."""
    first: Scaler
    pca: PcaModel
    second: Scaler

    def transform(self, m: FeatureMatrix) -> FeatureMatrix:
        return self.second.transform(self.pca.transform(self.first.transform(m)))

    def to_dict(self) -> dict:
        return {
            "k": self.pca.k,
            "first_scaler": self.first.to_dict(),
            "second_scaler": self.second.to_dict(),
            "explained_variance": self.pca.explained_variance.tolist(),
        }


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


@dataclass(frozen=True)
class SplitPlan:
    """Independent shuffled train/validation/test partitions (ShuffleSplit)."""
    seed: int
    n_splits: int
    train_frac: float
    val_frac: float
    test_frac: float
    splits: Tuple[Split, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_splits": self.n_splits,
            "train_frac": self.train_frac,
            "val_frac": self.val_frac,
            "test_frac": self.test_frac,
        }


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def expected_columns() -> List[str]:
    """Feature column names of the canonical file, task-major."""
    return [f"{name}{task}" for task in range(1, N_TASKS + 1) for name in FEATURE_NAMES]


def check_darwin_schema(column_names: Sequence[str]) -> List[str]:
    """List schema problems in a header; empty when it matches DARWIN."""
    problems = []
    columns = list(column_names)
    if ID_COLUMN not in columns:
        problems.append(f"missing column '{ID_COLUMN}'")
    if CLASS_COLUMN not in columns:
        problems.append(f"missing column '{CLASS_COLUMN}'")

    features = [c for c in columns if c not in (ID_COLUMN, CLASS_COLUMN)]
    expected = expected_columns()
    if len(columns) != N_FEATURES + 2:
        problems.append(f"expected {N_FEATURES + 2} columns, found {len(columns)}")

    missing = [c for c in expected if c not in set(features)]
    if missing:
        shown = ", ".join(missing[:20])
        more = f" (+{len(missing) - 20} more)" if len(missing) > 20 else ""
        problems.append(f"missing columns: {shown}{more}")

    unexpected = [c for c in features if c not in set(expected)]
    if unexpected:
        problems.append(f"unexpected columns: {', '.join(unexpected[:20])}")

    # Task-major order: column j must belong to task j // 18 + 1
    if not missing and not unexpected:
        for j, name in enumerate(features):
            if name != expected[j]:
                problems.append(f"column {j + 1} is '{name}', expected '{expected[j]}' (task-major order)")
                break

    return problems


def _read_frame(path) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"Dataset file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False)
    except pd.errors.EmptyDataError:
        raise DatasetError(f"Dataset file is empty: {path}")
    except pd.errors.ParserError as e:
        raise DatasetError(f"Malformed row in {path}: {e}")

    if frame.shape[0] == 0:
        raise DatasetError(f"No data rows in {path}")
    for column in (ID_COLUMN, CLASS_COLUMN):
        if column not in frame.columns:
            raise DatasetError("Missing required column", column=column)
    return frame


def _require_schema(frame: pd.DataFrame):
    """Raise on the first header problem, located at the first column out of place."""
    problems = check_darwin_schema(list(frame.columns))
    if not problems:
        return
    features = [c for c in frame.columns if c not in (ID_COLUMN, CLASS_COLUMN)]
    column = next(
        (name for j, name in enumerate(expected_columns()) if j >= len(features) or features[j] != name),
        features[N_FEATURES] if len(features) > N_FEATURES else None,
    )
    raise DatasetError(f"Not a DARWIN file: {problems[0]}", column=column)


def _scan_frame(frame: pd.DataFrame) -> Tuple[np.ndarray, List[DatasetError]]:
    """Parse feature cells and labels, collecting every offending cell."""
    problems = []
    feature_columns = [c for c in frame.columns if c not in (ID_COLUMN, CLASS_COLUMN)]
    if not feature_columns:
        problems.append(DatasetError("No feature columns"))

    values = np.zeros((frame.shape[0], len(feature_columns)))
    for j, column in enumerate(feature_columns):
        raw = frame[column]
        parsed = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=float)
        for i in np.flatnonzero(~np.isfinite(parsed)):
            cell = raw.iloc[i]
            if not isinstance(cell, str) or cell == "":
                problems.append(DatasetError("Missing value", row=i + 1, column=column))
            else:
                problems.append(DatasetError(f"Non-numeric or non-finite value '{cell}'", row=i + 1, column=column))
        values[:, j] = parsed

    for i, label in enumerate(frame[CLASS_COLUMN]):
        if not isinstance(label, str) or label.strip() not in LABELS:
            problems.append(DatasetError(f"Unknown label '{label}'", row=i + 1, column=CLASS_COLUMN))

    seen = {}
    for i, pid in enumerate(frame[ID_COLUMN]):
        if pid in seen:
            problems.append(DatasetError(f"Duplicate participant id '{pid}' (first at row {seen[pid]})",
                                         row=i + 1, column=ID_COLUMN))
        else:
            seen[pid] = i + 1

    return values, problems


def read_darwin_records(path) -> List[DarwinRecord]:
    """Parse the CSV into participant records; raises on the first bad cell."""
    frame = _read_frame(path)
    _require_schema(frame)
    values, problems = _scan_frame(frame)
    if problems:
        raise problems[0]

    return [
        DarwinRecord(
            participant_id=str(pid),
            features=tuple(values[i]),
            label=str(label).strip(),
        )
        for i, (pid, label) in enumerate(zip(frame[ID_COLUMN], frame[CLASS_COLUMN]))
    ]


def load_darwin(path) -> FeatureMatrix:
    """Load the CSV as a feature matrix: ID dropped, class mapped to +/-1."""
    frame = _read_frame(path)
    _require_schema(frame)
    values, problems = _scan_frame(frame)
    if problems:
        raise problems[0]

    labels = np.array([LABELS[label.strip()] for label in frame[CLASS_COLUMN]])
    feature_columns = [c for c in frame.columns if c not in (ID_COLUMN, CLASS_COLUMN)]
    return FeatureMatrix(values, labels, tuple(feature_columns))


@dataclass
class ValidationResult:
    n_rows: int = 0
    n_patients: int = 0
    n_healthy: int = 0
    n_features: int = 0
    problems: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems

    def summary(self) -> str:
        status = "OK" if self.ok else f"{len(self.problems)} problem(s)"
        return (f"{self.n_rows} rows, {self.n_patients} P, {self.n_healthy} H, "
                f"{self.n_features} features: {status}")


def validate_darwin(path) -> ValidationResult:
    """Full schema check of a DARWIN file, listing every problem found."""
    frame = _read_frame(path)
    result = ValidationResult(n_rows=frame.shape[0])
    result.problems.extend(check_darwin_schema(list(frame.columns)))

    _, problems = _scan_frame(frame)
    result.problems.extend(str(p) for p in problems)

    labels = frame[CLASS_COLUMN].astype(str).str.strip()
    result.n_patients = int((labels == "P").sum())
    result.n_healthy = int((labels == "H").sum())
    result.n_features = frame.shape[1] - 2
    return result


# ---------------------------------------------------------------------------
# Preprocessing
# ---------------------------------------------------------------------------

def fit_scaler(m: FeatureMatrix) -> Scaler:
    if m.n_samples < 2:
        raise ValueError(f"Standardization needs at least 2 rows, got {m.n_samples}")
    return Scaler(mean=m.data.mean(axis=0), std=m.data.std(axis=0))


def standardize(m: FeatureMatrix) -> Tuple[FeatureMatrix, Scaler]:
    """Zero mean, unit population variance per column; constant columns -> 0."""
    scaler = fit_scaler(m)
    return scaler.transform(m), scaler


def fit_pca(m: FeatureMatrix, k: int) -> PcaModel:
    """Top-k right singular directions of the centered data."""
    n, d = m.data.shape
    if not 1 <= k <= min(n - 1, d):
        raise ValueError(f"PCA needs 1 <= k <= min(N-1, D) = {min(n - 1, d)}, got k={k}")

    mean = m.data.mean(axis=0)
    _, s, vt = np.linalg.svd(m.data - mean, full_matrices=False)
    components = vt[:k]

    # Deterministic sign: largest-magnitude loading of each component positive
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(k), pivots])
    signs[signs == 0] = 1.0
    components = components * signs[:, None]

    explained_variance = s[:k] ** 2 / (n - 1)
    return PcaModel(mean=mean, components=components, explained_variance=explained_variance)


def fit_preprocessor(m: FeatureMatrix, k: int) -> Preprocessor:
    first = fit_scaler(m)
    scaled = first.transform(m)
    pca = fit_pca(scaled, k)
    second = fit_scaler(pca.transform(scaled))
    return Preprocessor(first=first, pca=pca, second=second)


def preprocess(m: FeatureMatrix, k: int) -> FeatureMatrix:
    """standardize(project(standardize(m), PCA_k))."""
    return fit_preprocessor(m, k).transform(m)


# ---------------------------------------------------------------------------
# Splits and feature subsets
# ---------------------------------------------------------------------------

def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def make_splits(n: int, train_frac: float = 0.6, val_frac: float = 0.2, test_frac: float = 0.2,
                n_splits: int = 20, seed: int = 0) -> SplitPlan:
    """ShuffleSplit partitions; test and validation sizes round half up, train takes the rest."""
    if min(train_frac, val_frac, test_frac) < 0 or train_frac <= 0 or test_frac <= 0:
        raise ValueError("Split fractions must be non-negative with positive train and test fractions")
    total = train_frac + val_frac + test_frac
    if total > 1 + 1e-9:
        raise ValueError(f"Split fractions sum to {total:.6f} > 1")
    if n_splits < 1:
        raise ValueError("n_splits must be at least 1")

    n_test = _round_half_up(test_frac * n)
    n_val = _round_half_up(val_frac * n)
    if abs(total - 1) <= 1e-9:
        n_train = n - n_test - n_val
    else:
        n_train = _round_half_up(train_frac * n)
    if n_test < 1 or n_train < 1 or n_train + n_val + n_test > n:
        raise ValueError(f"Fractions ({train_frac}, {val_frac}, {test_frac}) impossible for n={n}")

    rng = np.random.default_rng(seed)
    splits = []
    for _ in range(n_splits):
        perm = rng.permutation(n)
        test = np.sort(perm[:n_test])
        val = np.sort(perm[n_test:n_test + n_val])
        train = np.sort(perm[n_test + n_val:n_test + n_val + n_train])
        splits.append(Split(train=train, val=val, test=test))

    return SplitPlan(seed=seed, n_splits=n_splits, train_frac=train_frac, val_frac=val_frac,
                     test_frac=test_frac, splits=tuple(splits))


def task_columns(task: int) -> range:
    if not 1 <= task <= N_TASKS:
        raise ValueError(f"Invalid task id {task}; expected 1..{N_TASKS}")
    return range(FEATURES_PER_TASK * (task - 1), FEATURES_PER_TASK * task)


def category_tasks(category: str) -> frozenset:
    key = category.strip().upper()[:1]
    if key not in TASK_CATEGORIES:
        raise ValueError(f"Unknown task category '{category}'; expected one of M, G, C")
    return TASK_CATEGORIES[key]


def select_task_features(m: FeatureMatrix, tasks: Iterable[int]) -> FeatureMatrix:
    """Columns of the selected tasks, ascending task order."""
    if m.n_features != N_FEATURES:
        raise ValueError(f"Task selection needs {N_FEATURES} task-major columns, got {m.n_features}")
    selected = sorted(set(tasks))
    if not selected:
        raise ValueError("No tasks selected")
    columns = [j for task in selected for j in task_columns(task)]
    return m.with_data(m.data[:, columns], [m.column_names[j] for j in columns])


def save_preprocessed(m: FeatureMatrix, path, sidecar: dict) -> Path:
    """Write the matrix as CSV plus a JSON sidecar next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    frame = pd.DataFrame(m.data, columns=list(m.column_names))
    frame.insert(0, "row_id", m.row_ids)
    frame["label"] = m.labels
    frame.to_csv(path, index=False, float_format="%.17g")

    with open(path.with_suffix(".json"), "w") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
    return path
