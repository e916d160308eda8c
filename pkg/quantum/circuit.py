"""Gates and data-encoding circuit templates."""

import json
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

ROTATIONS = ("RX", "RY")
ENTANGLERS = ("CX", "CZ")


@dataclass(frozen=True)
class Gate:
    """A rotation (one qubit, angle in radians) or an entangler (control, target).

    In a circuit template rotations carry a `slot` instead of a bound angle.
    """
    kind: str
    qubits: Tuple[int, ...]
    angle: float = 0.0
    slot: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.kind in ROTATIONS:
            if len(self.qubits) != 1:
                raise ValueError(f"{self.kind} acts on one qubit, got {self.qubits}")
            if not math.isfinite(self.angle):
                raise ValueError(f"{self.kind} angle must be finite, got {self.angle}")
        elif self.kind in ENTANGLERS:
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ValueError(f"{self.kind} needs two distinct qubits, got {self.qubits}")
            if self.slot is not None:
                raise ValueError(f"{self.kind} has no parameter slot")
        else:
            raise ValueError(f"Unknown gate kind '{self.kind}'")
        if min(self.qubits) < 0:
            raise ValueError(f"Negative qubit index in {self.qubits}")

    @property
    def is_rotation(self) -> bool:
        return self.kind in ROTATIONS

    def inverse(self) -> "Gate":
        # CX and CZ are self-inverse
        return replace(self, angle=-self.angle) if self.is_rotation else self


@dataclass(frozen=True)
class CircuitSpec:
    """Gate template whose rotation slots are bound to bandwidth * feature value."""
    n_qubits: int
    layout: Tuple[Gate, ...]
    n_params: int
    bandwidth: float

    def __post_init__(self):
        object.__setattr__(self, "layout", tuple(self.layout))
        if self.n_qubits < 1:
            raise ValueError("A circuit needs at least one qubit")
        if not self.bandwidth > 0:
            raise ValueError(f"Bandwidth must be positive, got {self.bandwidth}")
        slots = []
        for gate in self.layout:
            if max(gate.qubits) >= self.n_qubits:
                raise ValueError(f"{gate.kind} on {gate.qubits} outside a {self.n_qubits}-qubit circuit")
            if gate.is_rotation:
                if gate.slot is None:
                    raise ValueError("Template rotations must carry a parameter slot")
                slots.append(gate.slot)
        if sorted(slots) != list(range(self.n_params)):
            raise ValueError(f"Rotation slots must bind each of the {self.n_params} parameters exactly once")

    def bind(self, x: Sequence[float]) -> List[Gate]:
        """Concrete gates for input x: angle of slot i is bandwidth * x[i]."""
        if len(x) != self.n_params:
            raise ValueError(f"Circuit takes {self.n_params} features, got {len(x)}")
        return [
            replace(g, angle=self.bandwidth * float(x[g.slot])) if g.is_rotation else g
            for g in self.layout
        ]

    @property
    def depth(self) -> int:
        return len(self.layout)

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "n_params": self.n_params,
            "bandwidth": self.bandwidth,
            "gates": [
                {"kind": g.kind, "qubits": list(g.qubits), "slot": g.slot}
                for g in self.layout
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CircuitSpec":
        layout = [Gate(g["kind"], tuple(g["qubits"]), slot=g.get("slot")) for g in data["gates"]]
        return cls(n_qubits=data["n_qubits"], layout=tuple(layout),
                   n_params=data["n_params"], bandwidth=data["bandwidth"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CircuitSpec":
        return cls.from_dict(json.loads(text))


def build_ansatz(n_qubits: int, n_params: int, bandwidth: float = 0.4) -> CircuitSpec:
    """Alternating RX/RY rotation layers with CZ/CX linear-chain entanglers.

    Layer l rotates every qubit (RX for even l, RY for odd l) with slot l*n + q on
    qubit q. Between rotation layers l and l+1 sits a chain of (q, q+1)
    entanglers: CZ after an even layer, CX after an odd one.
    """
    if n_qubits < 1 or n_params < 1 or n_params % n_qubits != 0:
        raise ValueError(f"{n_params} parameters cannot be spread over {n_qubits} qubits in whole layers")

    n_layers = n_params // n_qubits
    layout = []
    for layer in range(n_layers):
        kind = "RX" if layer % 2 == 0 else "RY"
        for q in range(n_qubits):
            layout.append(Gate(kind, (q,), slot=layer * n_qubits + q))
        if layer < n_layers - 1:
            entangler = "CZ" if layer % 2 == 0 else "CX"
            for q in range(n_qubits - 1):
                layout.append(Gate(entangler, (q, q + 1)))

    return CircuitSpec(n_qubits=n_qubits, layout=tuple(layout), n_params=n_params, bandwidth=bandwidth)
