"""Gate figures of merit: success probability and normalized trace fidelity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evolution import GateOperator

__all__ = [
    "HADAMARD",
    "CNOT",
    "IDENTITY_1Q",
    "IDENTITY_2Q",
    "TARGETS",
    "GateScore",
    "success_probability",
    "fidelity",
    "score",
]

_S2 = 1 / np.sqrt(2)

# basis (up, down)
HADAMARD = np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex)
IDENTITY_1Q = np.eye(2, dtype=complex)
# basis (up,up), (up,down), (down,up), (down,down); control first
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
    dtype=complex,
)
IDENTITY_2Q = np.eye(4, dtype=complex)

TARGETS = {
    "hadamard": HADAMARD,
    "identity": IDENTITY_1Q,
    "cnot": CNOT,
    "identity2": IDENTITY_2Q,
}


def _mat(O) -> np.ndarray:
    return O.matrix if isinstance(O, GateOperator) else np.asarray(O, dtype=complex)


def success_probability(O) -> float:
    """``Tr(O^H O) / d``."""
    O = _mat(O)
    if O.ndim != 2 or O.shape[0] != O.shape[1]:
        raise ValueError(f"operator must be square, got {O.shape}")
    return float(np.real(np.vdot(O, O))) / O.shape[0]


def fidelity(O, G) -> float:
    """``|Tr(O^H G)|^2 / (Tr(O^H O) Tr(G^H G))``: blind to global phase and scale of ``O``."""
    O = _mat(O)
    G = np.asarray(G, dtype=complex)
    if O.shape != G.shape:
        raise ValueError(f"operator {O.shape} and target {G.shape} differ in shape")
    oo = np.real(np.vdot(O, O))
    if oo == 0:
        raise ValueError("fidelity of the zero operator is undefined")
    return float(abs(np.vdot(O, G)) ** 2 / (oo * np.real(np.vdot(G, G))))


@dataclass(frozen=True)
class GateScore:
    fidelity: float
    success: float
    d: int

    def __post_init__(self):
        for name in ("fidelity", "success"):
            v = getattr(self, name)
            if not -1e-9 <= v <= 1 + 1e-9:
                raise ValueError(f"{name}={v} outside [0, 1]")

    def to_dict(self) -> dict:
        return {"fidelity": self.fidelity, "success": self.success, "d": self.d}


def score(O, G) -> GateScore:
    O = _mat(O)
    return GateScore(fidelity(O, G), success_probability(O), O.shape[0])
