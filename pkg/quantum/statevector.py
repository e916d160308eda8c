"""Statevector simulation of the encoding circuits.

Qubit ordering is little-endian: qubit 0 is the least-significant bit of the
amplitude index, so |q1 q0> = |10> is amplitude index 2.
"""

from dataclasses import dataclass
from typing import Iterable, List, Sequence

import numpy as np

from .circuit import CircuitSpec, Gate

CX_MATRIX = np.array([[1, 0, 0, 0],
                      [0, 1, 0, 0],
                      [0, 0, 0, 1],
                      [0, 0, 1, 0]], dtype=complex)  # basis |control target>

CZ_MATRIX = np.diag([1, 1, 1, -1]).astype(complex)


def rx_matrix(theta):
    """RX for a scalar angle (2x2) or an array of angles (..., 2, 2)."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    out = np.empty(theta.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 0, 1] = -1j * s
    out[..., 1, 0] = -1j * s
    out[..., 1, 1] = c
    return out


def ry_matrix(theta):
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    out = np.empty(theta.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def gate_matrix(gate: Gate) -> np.ndarray:
    if gate.kind == "RX":
        return rx_matrix(gate.angle)
    if gate.kind == "RY":
        return ry_matrix(gate.angle)
    return CX_MATRIX if gate.kind == "CX" else CZ_MATRIX


@dataclass(frozen=True)
class StateVector:
    """Unit-norm amplitudes of an n-qubit pure state."""
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        n = amps.size.bit_length() - 1
        if amps.size < 2 or 2 ** n != amps.size:
            raise ValueError(f"State length must be a power of two >= 2, got {amps.size}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1) > 1e-10:
            raise ValueError(f"State is not normalized (squared norm {norm:.12f})")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(2 ** n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(amps)


def apply_matrix(states: np.ndarray, matrix: np.ndarray, qubits: Sequence[int], n_qubits: int) -> np.ndarray:
    """Apply a k-qubit matrix to a batch of states (B x 2^n).

    `matrix` is either shared (2^k x 2^k) or one per state (B x 2^k x 2^k).
    The first listed qubit is the most significant index of the matrix.
    """
    batch = states.shape[0]
    k = len(qubits)
    axes = [n_qubits - q for q in qubits]  # axis 0 is the batch
    front = list(range(1, k + 1))

    psi = np.moveaxis(states.reshape((batch,) + (2,) * n_qubits), axes, front)
    moved_shape = psi.shape
    psi = psi.reshape(batch, 2 ** k, -1)
    if matrix.ndim == 2:
        psi = np.einsum("ij,bjr->bir", matrix, psi)
    else:
        psi = np.einsum("bij,bjr->bir", matrix, psi)
    psi = np.moveaxis(psi.reshape(moved_shape), front, axes)
    return psi.reshape(batch, -1)


def _check_width(gate: Gate, n_qubits: int):
    if max(gate.qubits) >= n_qubits:
        raise ValueError(f"{gate.kind} on qubits {gate.qubits} outside a {n_qubits}-qubit state")


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """U . state with the gate unitary embedded at its qubits."""
    n = state.n_qubits
    _check_width(gate, n)
    out = apply_matrix(state.amplitudes[None, :], gate_matrix(gate), gate.qubits, n)
    return StateVector(out[0])


def apply_gates(states: np.ndarray, gates: Iterable[Gate], n_qubits: int) -> np.ndarray:
    """Apply a gate sequence to every state of a batch."""
    for gate in gates:
        _check_width(gate, n_qubits)
        states = apply_matrix(states, gate_matrix(gate), gate.qubits, n_qubits)
    return states


def zero_states(batch: int, n_qubits: int) -> np.ndarray:
    states = np.zeros((batch, 2 ** n_qubits), dtype=complex)
    states[:, 0] = 1.0
    return states


def encode_batch(spec: CircuitSpec, X: np.ndarray) -> np.ndarray:
    """Encode every row of X: row b of the result is U(x_b)|0...0>."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != spec.n_params:
        raise ValueError(f"Circuit takes {spec.n_params} features, got {X.shape[1]}")

    states = zero_states(X.shape[0], spec.n_qubits)
    return run_layout(states, spec, X)


def run_layout(states: np.ndarray, spec: CircuitSpec, X: np.ndarray) -> np.ndarray:
    """Apply U(x_b) to state b of the batch."""
    for gate in spec.layout:
        if gate.kind == "RX":
            matrix = rx_matrix(spec.bandwidth * X[:, gate.slot])
        elif gate.kind == "RY":
            matrix = ry_matrix(spec.bandwidth * X[:, gate.slot])
        else:
            matrix = gate_matrix(gate)
        states = apply_matrix(states, matrix, gate.qubits, spec.n_qubits)
    return states


def encode(spec: CircuitSpec, x: Sequence[float]) -> StateVector:
    """|psi(x)> = U(x)|0...0>."""
    gates = spec.bind(x)
    states = apply_gates(zero_states(1, spec.n_qubits), gates, spec.n_qubits)
    return StateVector(states[0])


def inverse_layout(spec: CircuitSpec, y: Sequence[float]) -> List[Gate]:
    """Gates of U(y)^dagger: layout reversed, angles negated."""
    return [g.inverse() for g in reversed(spec.bind(y))]


def inversion_test_gates(spec: CircuitSpec, x: Sequence[float], y: Sequence[float]) -> List[Gate]:
    """U(x) followed by U(y)^dagger."""
    return spec.bind(x) + inverse_layout(spec, y)


def inversion_probability(spec: CircuitSpec, x: Sequence[float], y: Sequence[float]) -> float:
    """Exact all-zeros probability of the inversion test (the infinite-shot value)."""
    states = apply_gates(zero_states(1, spec.n_qubits), inversion_test_gates(spec, x, y), spec.n_qubits)
    return float(abs(states[0, 0]) ** 2)
