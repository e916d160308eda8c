"""Thermal-relaxation noise: trajectory sampling and exact channel evolution.

After every gate each touched qubit is amplitude-damped with probability
1 - exp(-t/T1) and dephased with probability 1 - exp(-t/Tphi), where
1/Tphi = 1/T2 - 1/(2 T1). A dephasing event applies Z with probability 1/2,
so coherences shrink by exp(-t/Tphi) and, with damping, by exp(-t/T2) overall.
"""

import math
from dataclasses import asdict, dataclass, replace
from typing import List, Sequence

import numpy as np

from .circuit import CircuitSpec, Gate
from .statevector import apply_matrix, gate_matrix, inversion_test_gates, zero_states

# Average qubit properties of the 14-qubit Melbourne device
MELBOURNE_T1_US = 50.0
MELBOURNE_T2_US = 70.0

# Gate durations are not published with the averages; typical values
DEFAULT_GATE_TIME_1Q_NS = 50.0
DEFAULT_GATE_TIME_2Q_NS = 300.0

DEFAULT_SHOTS = 256

# Density matrices beyond this width are too large for a test oracle
MAX_DENSITY_QUBITS = 6


@dataclass(frozen=True)
class NoiseModel:
    """T1/T2 in microseconds, gate times in nanoseconds."""
    t1: float = MELBOURNE_T1_US
    t2: float = MELBOURNE_T2_US
    gate_time_1q: float = DEFAULT_GATE_TIME_1Q_NS
    gate_time_2q: float = DEFAULT_GATE_TIME_2Q_NS
    shots: int = DEFAULT_SHOTS
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("t1", "t2", "gate_time_1q", "gate_time_2q"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"NoiseModel.{name} must be positive, got {value}")
        if self.t2 > 2 * self.t1:
            raise ValueError(f"T2 ({self.t2}) cannot exceed 2*T1 ({2 * self.t1})")
        if self.shots < 1:
            raise ValueError(f"NoiseModel.shots must be >= 1, got {self.shots}")

    def gate_time_us(self, gate: Gate) -> float:
        return (self.gate_time_1q if gate.is_rotation else self.gate_time_2q) / 1000.0

    def damping_probability(self, duration_us: float) -> float:
        return 1.0 - math.exp(-duration_us / self.t1)

    def dephasing_probability(self, duration_us: float) -> float:
        rate = max(0.0, 1.0 / self.t2 - 1.0 / (2.0 * self.t1))
        return 1.0 - math.exp(-duration_us * rate)

    def with_seed(self, seed: int) -> "NoiseModel":
        return replace(self, rng_seed=seed)

    def to_dict(self) -> dict:
        return asdict(self)


def excited_population(states: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    """Probability that `qubit` reads 1, per state of the batch."""
    psi = states.reshape((states.shape[0],) + (2,) * n_qubits)
    ones = np.take(psi, 1, axis=n_qubits - qubit)
    return np.sum(np.abs(ones) ** 2, axis=tuple(range(1, n_qubits)))


def _amplitude_damping(states, qubit, n_qubits, gamma, rng):
    if gamma <= 0:
        return states
    p1 = excited_population(states, qubit, n_qubits)
    jump = rng.random(states.shape[0]) < gamma * p1

    kraus = np.zeros((states.shape[0], 2, 2), dtype=complex)
    # Decay |1> -> |0>, renormalized by the jump probability
    kraus[jump, 0, 1] = 1.0 / np.sqrt(p1[jump])
    stay = ~jump
    norm = np.sqrt(1.0 - gamma * p1[stay])
    kraus[stay, 0, 0] = 1.0 / norm
    kraus[stay, 1, 1] = math.sqrt(1.0 - gamma) / norm
    return apply_matrix(states, kraus, (qubit,), n_qubits)


def _dephasing(states, qubit, n_qubits, p_phi, rng):
    if p_phi <= 0:
        return states
    flip = rng.random(states.shape[0]) < p_phi / 2.0
    if not flip.any():
        return states
    kraus = np.zeros((states.shape[0], 2, 2), dtype=complex)
    kraus[:, 0, 0] = 1.0
    kraus[:, 1, 1] = np.where(flip, -1.0, 1.0)
    return apply_matrix(states, kraus, (qubit,), n_qubits)


def sample_trajectories(gates: Sequence[Gate], n_qubits: int, noise: NoiseModel,
                        rng: np.random.Generator) -> float:
    """Run one noisy trajectory per shot; fraction of all-zeros outcomes."""
    states = zero_states(noise.shots, n_qubits)
    for gate in gates:
        states = apply_matrix(states, gate_matrix(gate), gate.qubits, n_qubits)
        duration = noise.gate_time_us(gate)
        gamma = noise.damping_probability(duration)
        p_phi = noise.dephasing_probability(duration)
        for q in gate.qubits:
            states = _amplitude_damping(states, q, n_qubits, gamma, rng)
            states = _dephasing(states, q, n_qubits, p_phi, rng)

    p_zero = np.abs(states[:, 0]) ** 2
    hits = rng.random(noise.shots) < p_zero
    return float(hits.mean())


# ---------------------------------------------------------------------------
# Exact channel evolution (small widths only)
# ---------------------------------------------------------------------------

def damping_kraus(gamma: float) -> List[np.ndarray]:
    return [
        np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex),
        np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex),
    ]


def dephasing_kraus(p_phi: float) -> List[np.ndarray]:
    return [
        math.sqrt(1 - p_phi / 2) * np.eye(2, dtype=complex),
        math.sqrt(p_phi / 2) * np.diag([1, -1]).astype(complex),
    ]


def _left(matrix, rho, qubits, n_qubits):
    # matrix . rho, acting on every column of rho
    return apply_matrix(rho.T, matrix, qubits, n_qubits).T


def conjugate(rho: np.ndarray, matrix: np.ndarray, qubits: Sequence[int], n_qubits: int) -> np.ndarray:
    """matrix . rho . matrix^dagger for Hermitian rho."""
    half = _left(matrix, rho, qubits, n_qubits)
    return _left(matrix, half.conj().T, qubits, n_qubits)


def apply_channel(rho, kraus_ops, qubit, n_qubits):
    return sum(conjugate(rho, k, (qubit,), n_qubits) for k in kraus_ops)


def inversion_density_matrix(spec: CircuitSpec, x: Sequence[float], y: Sequence[float],
                             noise: NoiseModel) -> np.ndarray:
    """Density matrix after the noisy inversion-test circuit."""
    n = spec.n_qubits
    if n > MAX_DENSITY_QUBITS:
        raise ValueError(f"Density-matrix evolution limited to {MAX_DENSITY_QUBITS} qubits, got {n}")

    rho = np.zeros((2 ** n, 2 ** n), dtype=complex)
    rho[0, 0] = 1.0
    for gate in inversion_test_gates(spec, x, y):
        rho = conjugate(rho, gate_matrix(gate), gate.qubits, n)
        duration = noise.gate_time_us(gate)
        damping = damping_kraus(noise.damping_probability(duration))
        dephasing = dephasing_kraus(noise.dephasing_probability(duration))
        for q in gate.qubits:
            rho = apply_channel(rho, damping, q, n)
            rho = apply_channel(rho, dephasing, q, n)
    return rho


def density_inversion_probability(spec: CircuitSpec, x: Sequence[float], y: Sequence[float],
                                  noise: NoiseModel) -> float:
    """All-zeros probability of the noisy inversion test, without sampling."""
    return float(inversion_density_matrix(spec, x, y, noise)[0, 0].real)
