from .circuit import Gate, CircuitSpec, build_ansatz
from .statevector import (
    StateVector,
    apply_gate,
    apply_gates,
    encode,
    encode_batch,
    gate_matrix,
    inverse_layout,
    inversion_probability,
    inversion_test_gates,
)
from .noise import NoiseModel, density_inversion_probability, inversion_density_matrix
from .fidelity import fidelity_exact, fidelity_mixed, fidelity_shots, fidelity_noisy, binomial_estimate

__all__ = [
    "Gate",
    "CircuitSpec",
    "build_ansatz",
    "StateVector",
    "apply_gate",
    "apply_gates",
    "encode",
    "encode_batch",
    "gate_matrix",
    "inverse_layout",
    "inversion_probability",
    "inversion_test_gates",
    "NoiseModel",
    "density_inversion_probability",
    "inversion_density_matrix",
    "fidelity_exact",
    "fidelity_mixed",
    "fidelity_shots",
    "fidelity_noisy",
    "binomial_estimate",
]
