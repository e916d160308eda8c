"""Kernel functions, Gram matrices and their eigenvalue spectra.

Classical kernels follow the usual SVC formulas; the quantum kernel is the
fidelity between encoded states, computed exactly, from sampled shots, or from
noisy trajectories.
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from darwin_data import FeatureMatrix
from quantum import (
    CircuitSpec,
    NoiseModel,
    binomial_estimate,
    encode,
    encode_batch,
    fidelity_exact,
    fidelity_noisy,
    fidelity_shots,
)

KERNEL_KINDS = ("rbf", "linear", "poly", "sigmoid", "quantum")
EXECUTION_MODES = ("exact", "shots", "noisy")

# Eigenvalues below this count as PSD violations
PSD_TOLERANCE = 1e-8


@dataclass(frozen=True)
class KernelParams:
    """Kernel choice; gamma is a number or "scale" (1 / (D * Var(X)))."""
    kind: str = "rbf"
    gamma: Union[float, str] = "scale"
    coef0: float = 0.0
    degree: int = 3
    circuit: Optional[CircuitSpec] = None

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind not in KERNEL_KINDS:
            raise ValueError(f"Unknown kernel '{self.kind}'; expected one of {', '.join(KERNEL_KINDS)}")
        if kind == "quantum" and self.circuit is None:
            raise ValueError("The quantum kernel needs a circuit")
        if kind == "poly" and self.degree < 1:
            raise ValueError(f"Polynomial degree must be >= 1, got {self.degree}")
        if isinstance(self.gamma, str):
            if self.gamma != "scale":
                raise ValueError(f"gamma must be a positive number or 'scale', got '{self.gamma}'")
        elif not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def resolve(self, X: np.ndarray) -> "KernelParams":
        """Replace gamma="scale" by 1 / (D * Var(X)) computed on X."""
        if self.gamma != "scale":
            return self
        variance = float(np.var(X))
        gamma = 1.0 / (X.shape[1] * variance) if variance > 0 else 1.0
        return replace(self, gamma=gamma)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "gamma": self.gamma,
            "coef0": self.coef0,
            "degree": self.degree,
            "circuit": self.circuit.to_dict() if self.circuit else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KernelParams":
        circuit = CircuitSpec.from_dict(data["circuit"]) if data.get("circuit") else None
        return cls(kind=data["kind"], gamma=data["gamma"], coef0=data["coef0"],
                   degree=data["degree"], circuit=circuit)


@dataclass(frozen=True)
class Execution:
    """How quantum kernel entries are obtained."""
    mode: str = "exact"
    shots: int = 256
    seed: int = 0
    noise: Optional[NoiseModel] = None

    def __post_init__(self):
        if self.mode not in EXECUTION_MODES:
            raise ValueError(f"Unknown execution mode '{self.mode}'; expected one of {', '.join(EXECUTION_MODES)}")
        if self.shots < 1:
            raise ValueError(f"shots must be >= 1, got {self.shots}")
        if self.mode == "noisy" and self.noise is None:
            object.__setattr__(self, "noise", NoiseModel(shots=self.shots, rng_seed=self.seed))

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "shots": self.shots,
            "seed": self.seed,
            "noise": self.noise.to_dict() if self.noise else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Execution":
        noise = NoiseModel(**data["noise"]) if data.get("noise") else None
        return cls(mode=data["mode"], shots=data["shots"], seed=data["seed"], noise=noise)


EXACT = Execution()


@dataclass
class GramMatrix:
    """values[i, j] = k(row i, col j), with dataset row ids on both axes."""
    values: np.ndarray
    row_ids: np.ndarray
    col_ids: np.ndarray
    params: KernelParams
    execution: Execution = field(default=EXACT)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    @property
    def is_square(self) -> bool:
        return self.values.shape[0] == self.values.shape[1] and np.array_equal(self.row_ids, self.col_ids)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a square Gram, nonincreasing."""
    eigenvalues: np.ndarray
    n_negative: int

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def is_psd(self) -> bool:
        return self.n_negative == 0

    def decay_ratio(self, k: int) -> Optional[float]:
        """lambda_1 / lambda_k (k is 1-based); None once lambda_k is numerically zero or negative."""
        if not 1 <= k <= self.eigenvalues.size:
            raise ValueError(f"Spectrum has {self.eigenvalues.size} eigenvalues, asked for #{k}")
        if self.eigenvalues[k - 1] <= PSD_TOLERANCE:
            return None
        return float(self.eigenvalues[0] / self.eigenvalues[k - 1])


def pair_seed(seed: int, i: int, j: int) -> int:
    """Per-pair seed, symmetric in (i, j)."""
    lo, hi = (i, j) if i <= j else (j, i)
    return int(np.random.SeedSequence([seed, lo, hi]).generate_state(1)[0])


def kernel_value(x: Sequence[float], y: Sequence[float], p: KernelParams,
                 execution: Execution = EXACT) -> float:
    """Single kernel entry k(x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"Dimension mismatch: {x.shape} vs {y.shape}")

    if p.kind == "quantum":
        if execution.mode == "exact":
            return fidelity_exact(encode(p.circuit, x), encode(p.circuit, y))
        if execution.mode == "shots":
            return fidelity_shots(p.circuit, x, y, execution.shots, execution.seed)
        return fidelity_noisy(p.circuit, x, y, execution.noise)

    if p.gamma == "scale":
        raise ValueError("gamma='scale' must be resolved against training data first")
    if p.kind == "rbf":
        return float(np.exp(-p.gamma * np.sum((x - y) ** 2)))
    if p.kind == "linear":
        return float(x @ y)
    if p.kind == "poly":
        return float((p.gamma * (x @ y) + p.coef0) ** p.degree)
    return float(np.tanh(p.gamma * (x @ y) + p.coef0))


def _classical_values(A: np.ndarray, B: np.ndarray, p: KernelParams) -> np.ndarray:
    if p.kind == "rbf":
        sq = np.sum(A ** 2, axis=1)[:, None] + np.sum(B ** 2, axis=1)[None, :] - 2 * A @ B.T
        return np.exp(-p.gamma * np.clip(sq, 0, None))
    dots = A @ B.T
    if p.kind == "linear":
        return dots
    if p.kind == "poly":
        return (p.gamma * dots + p.coef0) ** p.degree
    return np.tanh(p.gamma * dots + p.coef0)


def _mirror_upper(values: np.ndarray) -> np.ndarray:
    return np.triu(values) + np.triu(values, 1).T


def _exact_fidelities(circuit: CircuitSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    overlaps = encode_batch(circuit, A).conj() @ encode_batch(circuit, B).T
    return np.clip(np.abs(overlaps) ** 2, 0.0, 1.0)


def _shot_values(probabilities, row_ids, col_ids, execution, square):
    values = np.empty_like(probabilities)
    for a, i in enumerate(row_ids):
        for b, j in enumerate(col_ids):
            if square and b < a:
                continue
            if i == j:
                # Inversion test on identical inputs always returns all zeros
                values[a, b] = 1.0
            else:
                rng = np.random.default_rng(pair_seed(execution.seed, i, j))
                values[a, b] = binomial_estimate(probabilities[a, b], execution.shots, rng)
    return _mirror_upper(values) if square else values


def _noisy_chunk(circuit, noise, pairs):
    return [
        fidelity_noisy(circuit, x, y, noise, seed=pair_seed(noise.rng_seed, i, j))
        for i, j, x, y in pairs
    ]


def _noisy_values(circuit, rows, cols, noise, square, jobs):
    pairs, cells = [], []
    for a in range(rows.n_samples):
        for b in range(cols.n_samples):
            if square and b < a:
                continue
            i, j = int(rows.row_ids[a]), int(cols.row_ids[b])
            x, y = rows.data[a], cols.data[b]
            # Canonical circuit orientation: lower dataset id encoded first
            if j < i:
                i, j, x, y = j, i, y, x
            pairs.append((i, j, x, y))
            cells.append((a, b))

    if jobs > 1 and len(pairs) > 1:
        size = -(-len(pairs) // (jobs * 4))
        chunks = [pairs[k:k + size] for k in range(0, len(pairs), size)]
        parts = Parallel(n_jobs=jobs)(delayed(_noisy_chunk)(circuit, noise, chunk) for chunk in chunks)
        estimates = [v for part in parts for v in part]
    else:
        estimates = _noisy_chunk(circuit, noise, pairs)

    values = np.zeros((rows.n_samples, cols.n_samples))
    for (a, b), value in zip(cells, estimates):
        values[a, b] = value
    return _mirror_upper(values) if square else values


def gram(rows: FeatureMatrix, cols: FeatureMatrix, p: KernelParams,
         execution: Execution = EXACT, jobs: int = 1) -> GramMatrix:
    """Kernel matrix between two row sets.

    When rows and cols are the same samples the matrix is built from its upper
    triangle and mirrored. gamma="scale" is resolved on `cols` (the training side).
    """
    if rows.n_features != cols.n_features:
        raise ValueError(f"Dimension mismatch: {rows.n_features} vs {cols.n_features} features")
    square = rows.n_samples == cols.n_samples and np.array_equal(rows.row_ids, cols.row_ids)

    if p.kind != "quantum":
        p = p.resolve(cols.data)
        values = _classical_values(rows.data, cols.data, p)
        if square:
            values = _mirror_upper(values)
        return GramMatrix(values, rows.row_ids.copy(), cols.row_ids.copy(), p, EXACT)

    if rows.n_features != p.circuit.n_params:
        raise ValueError(f"Circuit takes {p.circuit.n_params} features, data has {rows.n_features}")

    if execution.mode == "noisy":
        values = _noisy_values(p.circuit, rows, cols, execution.noise, square, jobs)
    else:
        values = _exact_fidelities(p.circuit, rows.data, cols.data)
        if execution.mode == "shots":
            values = _shot_values(values, rows.row_ids, cols.row_ids, execution, square)
        elif square:
            values = _mirror_upper(values)
    return GramMatrix(values, rows.row_ids.copy(), cols.row_ids.copy(), p, execution)


def spectrum(g: GramMatrix) -> Spectrum:
    """Eigenvalues of a square symmetric Gram, nonincreasing."""
    values = np.asarray(g.values, dtype=float)
    if values.ndim != 2 or not g.is_square:
        raise ValueError(f"Spectrum needs a square Gram over one sample set, got shape {values.shape}")
    if not np.allclose(values, values.T, atol=1e-9):
        raise ValueError("Spectrum needs a symmetric Gram")
    eigenvalues = np.linalg.eigvalsh(values)[::-1]
    return Spectrum(eigenvalues=eigenvalues, n_negative=int(np.sum(eigenvalues < -PSD_TOLERANCE)))


def save_gram(g: GramMatrix, path) -> Path:
    """Write values to <path>.npy and provenance to <path>.json."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.save(path.with_suffix(".npy"), g.values)
    sidecar = {
        "params": g.params.to_dict(),
        "execution": g.execution.to_dict(),
        "row_ids": g.row_ids.tolist(),
        "col_ids": g.col_ids.tolist(),
    }
    with open(path.with_suffix(".json"), "w") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
    return path.with_suffix(".npy")


def load_gram(path) -> GramMatrix:
    path = Path(path)
    with open(path.with_suffix(".json")) as f:
        sidecar = json.load(f)
    return GramMatrix(
        values=np.load(path.with_suffix(".npy")),
        row_ids=np.asarray(sidecar["row_ids"], dtype=int),
        col_ids=np.asarray(sidecar["col_ids"], dtype=int),
        params=KernelParams.from_dict(sidecar["params"]),
        execution=Execution.from_dict(sidecar["execution"]),
    )
