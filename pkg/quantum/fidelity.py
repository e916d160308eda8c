"""State fidelities: exact, Uhlmann (mixed), shot-sampled and noisy."""

from typing import Optional, Sequence

import numpy as np

from .circuit import CircuitSpec
from .noise import MAX_DENSITY_QUBITS, NoiseModel, sample_trajectories
from .statevector import StateVector, inversion_probability, inversion_test_gates


def fidelity_exact(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2."""
    if a.amplitudes.size != b.amplitudes.size:
        raise ValueError(f"States have different widths ({a.n_qubits} vs {b.n_qubits} qubits)")
    overlap = np.vdot(a.amplitudes, b.amplitudes)
    return float(min(1.0, abs(overlap) ** 2))


def _check_density(rho: np.ndarray, name: str) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    if rho.ndim != 2 or rho.shape[1] != dim or dim < 2 or dim & (dim - 1):
        raise ValueError(f"{name} must be a square 2^n x 2^n matrix, got shape {rho.shape}")
    if dim > 2 ** MAX_DENSITY_QUBITS:
        raise ValueError(f"{name} wider than {MAX_DENSITY_QUBITS} qubits")
    if not np.allclose(rho, rho.conj().T, atol=1e-8):
        raise ValueError(f"{name} is not Hermitian")
    if abs(np.trace(rho).real - 1) > 1e-8:
        raise ValueError(f"{name} has trace {np.trace(rho).real:.10f}, expected 1")
    if np.linalg.eigvalsh(rho).min() < -1e-8:
        raise ValueError(f"{name} is not positive semidefinite")
    return rho


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def fidelity_mixed(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    rho = _check_density(rho, "rho")
    sigma = _check_density(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise ValueError(f"Density matrices have different shapes {rho.shape} and {sigma.shape}")

    root = _psd_sqrt(rho)
    inner = root @ sigma @ root
    inner = (inner + inner.conj().T) / 2
    eigenvalues = np.clip(np.linalg.eigvalsh(inner), 0, None)
    return float(min(1.0, np.sum(np.sqrt(eigenvalues)) ** 2))


def binomial_estimate(probability: float, shots: int, rng: np.random.Generator) -> float:
    """Fraction of `shots` Bernoulli(probability) successes."""
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    p = float(np.clip(probability, 0.0, 1.0))
    if 1.0 - p < 1e-12:
        p = 1.0  # round-off on identical inputs
    return rng.binomial(shots, p) / shots


def fidelity_shots(spec: CircuitSpec, x: Sequence[float], y: Sequence[float],
                   shots: int, seed: int) -> float:
    """Inversion test sampled with `shots` measurements of the exact distribution."""
    probability = inversion_probability(spec, x, y)
    return binomial_estimate(probability, shots, np.random.default_rng(seed))


def fidelity_noisy(spec: CircuitSpec, x: Sequence[float], y: Sequence[float],
                   noise: NoiseModel, seed: Optional[int] = None) -> float:
    """Inversion test run as noisy trajectories, one per shot.

    `seed` overrides `noise.rng_seed` (Gram builders pass per-pair seeds).
    """
    rng = np.random.default_rng(noise.rng_seed if seed is None else seed)
    return sample_trajectories(inversion_test_gates(spec, x, y), spec.n_qubits, noise, rng)
