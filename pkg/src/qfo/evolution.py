"""Few-photon evolution through mode transforms, coincidence post-selection
and extraction of the implemented qubit operators."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .layers import ModeTransform
from .modes import PhotonicState, QubitLayout

__all__ = [
    "MAX_PERMANENT_DIM",
    "permanent",
    "transition_amplitude",
    "evolve",
    "CoincidenceProjector",
    "coincidence_project",
    "GateOperator",
    "SINGLE_QUBIT_BASIS",
    "TWO_QUBIT_BASIS",
    "extract_single_qubit_operator",
    "extract_two_qubit_operator",
    "qubit_block",
    "two_qubit_block",
    "reduced_one_photon_density",
]

MAX_PERMANENT_DIM = 12

SINGLE_QUBIT_BASIS = ("up", "down")
TWO_QUBIT_BASIS = ("up,up", "up,down", "down,up", "down,down")


def permanent(A) -> complex:
    """Matrix permanent by Ryser's formula with Gray-code subset updates."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"permanent needs a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if n > MAX_PERMANENT_DIM:
        raise ValueError(f"dimension {n} exceeds the permanent cap of {MAX_PERMANENT_DIM}")
    if n == 0:
        return 1.0 + 0j

    row_sums = np.zeros(n, dtype=complex)
    total = 0j
    prev_gray = 0
    for k in range(1, 2**n):
        gray = k ^ (k >> 1)
        flipped = (gray ^ prev_gray).bit_length() - 1
        if gray & (1 << flipped):
            row_sums += A[:, flipped]
        else:
            row_sums -= A[:, flipped]
        prev_gray = gray
        sign = -1 if bin(gray).count("1") % 2 else 1
        total += sign * np.prod(row_sums)
    return complex((-1) ** n * total)


def _modes_of(pattern: Sequence[int]) -> list[int]:
    return [m for m, c in enumerate(pattern) for _ in range(c)]


def _fact_weight(pattern: Sequence[int]) -> int:
    return math.prod(math.factorial(c) for c in pattern)


def _as_matrix(T) -> np.ndarray:
    return T.matrix if isinstance(T, ModeTransform) else np.asarray(T, dtype=complex)


def transition_amplitude(pattern_in: Sequence[int], pattern_out: Sequence[int], T) -> complex:
    """``<out| U_T |in>`` as a normalized permanent of the repeated-index submatrix."""
    T = _as_matrix(T)
    if sum(pattern_in) != sum(pattern_out):
        raise ValueError("input and output patterns carry different photon numbers")
    rows = _modes_of(pattern_in)
    cols = _modes_of(pattern_out)
    sub = T[np.ix_(rows, cols)]
    return permanent(sub) / math.sqrt(_fact_weight(pattern_in) * _fact_weight(pattern_out))


def evolve(state: PhotonicState, T) -> PhotonicState:
    """Push a Fock state through a linear transform.

    Each input creation operator ``a_n^dag`` becomes ``sum_l T[n, l] d_l^dag``;
    the product is expanded monomial by monomial and mapped back to normalized
    occupation patterns.
    """
    T = _as_matrix(T)
    M = state.M
    if T.shape != (M, M):
        raise ValueError(f"transform of shape {T.shape} does not act on {M} modes")

    out: dict[tuple[int, ...], complex] = {}
    for pattern, amp in state.amplitudes.items():
        # monomials in the output creation operators, keyed by their exponents
        poly: dict[tuple[int, ...], complex] = {(0,) * M: amp / math.sqrt(_fact_weight(pattern))}
        for n in _modes_of(pattern):
            row = T[n]
            support = np.flatnonzero(row)
            nxt: dict[tuple[int, ...], complex] = {}
            for mono, c in poly.items():
                for l in support:
                    key = mono[:l] + (mono[l] + 1,) + mono[l + 1 :]
                    nxt[key] = nxt.get(key, 0j) + c * row[l]
            poly = nxt
        for mono, c in poly.items():
            out[mono] = out.get(mono, 0j) + c * math.sqrt(_fact_weight(mono))
    return PhotonicState(state.window, state.photon_number, out, state.max_photons)


@dataclass(frozen=True)
class CoincidenceProjector:
    """Keeps the two-photon patterns with one photon in each mode pair (internal indices)."""

    control_pair: tuple[int, int]
    target_pair: tuple[int, int]

    def __post_init__(self):
        modes = tuple(self.control_pair) + tuple(self.target_pair)
        if len(modes) != 4 or len(set(modes)) != 4:
            raise ValueError(f"projector needs four distinct modes, got {modes}")

    @classmethod
    def for_qubits(cls, layout: QubitLayout, control: int, target: int) -> CoincidenceProjector:
        return cls(layout.modes(control), layout.modes(target))

    def accepts(self, pattern: Sequence[int]) -> bool:
        c = sum(pattern[m] for m in self.control_pair)
        t = sum(pattern[m] for m in self.target_pair)
        return c == 1 and t == 1


def coincidence_project(state: PhotonicState, proj: CoincidenceProjector) -> PhotonicState:
    """Post-select one photon per pair; the result stays sub-normalized."""
    if state.photon_number != 2:
        raise ValueError(f"coincidence projection needs a two-photon state, got n={state.photon_number}")
    kept = {p: a for p, a in state.amplitudes.items() if proj.accepts(p)}
    return PhotonicState(state.window, 2, kept, state.max_photons)


@dataclass(frozen=True, eq=False)
class GateOperator:
    """Implemented qubit operator, acting as ``out = matrix @ in`` on the listed basis.

    Single-qubit basis is ``(up, down)``; two-qubit basis is ``(up,up),
    (up,down), (down,up), (down,down)`` with the control qubit first.
    """

    matrix: np.ndarray
    basis: tuple[str, ...]
    qubits: tuple[int, ...] = ()

    def __post_init__(self):
        O = np.array(self.matrix, dtype=complex)
        if O.shape != (len(self.basis), len(self.basis)):
            raise ValueError(f"operator shape {O.shape} does not match basis {self.basis}")
        O.setflags(write=False)
        object.__setattr__(self, "matrix", O)

    @property
    def d(self) -> int:
        return len(self.basis)

    def to_dict(self) -> dict:
        O = self.matrix
        return {
            "qubits": list(self.qubits),
            "basis": list(self.basis),
            "magnitude": np.abs(O).tolist(),
            "phase": np.angle(O).tolist(),
        }

    @classmethod
    def from_dict(cls, data) -> GateOperator:
        mag = np.asarray(data["magnitude"], dtype=float)
        ph = np.asarray(data["phase"], dtype=float)
        return cls(mag * np.exp(1j * ph), tuple(data["basis"]), tuple(data.get("qubits", ())))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def format(self, digits: int = 3) -> str:
        """Rows of ``|O| e^{i arg O}`` entries, the way gate operators are usually printed."""
        lines = []
        for row in self.matrix:
            cells = [f"{abs(z):.{digits}f} e^{{{np.angle(z):.{digits}f}i}}" for z in row]
            lines.append("  ".join(cells))
        return "\n".join(lines)


def qubit_block(T: np.ndarray, up: int, down: int) -> np.ndarray:
    """Action matrix of ``T`` on one dual-rail pair, basis ``(up, down)``.

    ``O[a, c]`` is the amplitude for the photon entering mode ``c`` to leave in
    mode ``a``, i.e. ``T[c, a]``.
    """
    modes = [up, down]
    return T[np.ix_(modes, modes)].T


def two_qubit_block(T: np.ndarray, control: tuple[int, int], target: tuple[int, int]) -> np.ndarray:
    """Coincidence action matrix on two dual-rail pairs, each given as ``(up, down)``.

    For input photons in modes ``(n, m)`` and output in ``(i, j)`` the entry is
    ``T[n, i] T[m, j] + T[n, j] T[m, i]``.
    """
    basis = [(c, t) for c in control for t in target]
    O = np.empty((4, 4), dtype=complex)
    for a, (i, j) in enumerate(basis):
        for b, (n, m) in enumerate(basis):
            O[a, b] = T[n, i] * T[m, j] + T[n, j] * T[m, i]
    return O


def extract_single_qubit_operator(T, layout: QubitLayout, b: int) -> GateOperator:
    T = _as_matrix(T)
    if T.shape[0] != layout.window.M:
        raise ValueError(f"transform has {T.shape[0]} modes, layout expects {layout.window.M}")
    down, up = layout.modes(b)
    return GateOperator(qubit_block(T, up, down), SINGLE_QUBIT_BASIS, (b,))


def extract_two_qubit_operator(T, layout: QubitLayout, control: int, target: int) -> GateOperator:
    T = _as_matrix(T)
    if control == target:
        raise ValueError("control and target must be distinct qubits")
    if T.shape[0] != layout.window.M:
        raise ValueError(f"transform has {T.shape[0]} modes, layout expects {layout.window.M}")
    cd, cu = layout.modes(control)
    td, tu = layout.modes(target)
    return GateOperator(two_qubit_block(T, (cu, cd), (tu, td)), TWO_QUBIT_BASIS, (control, target))


def reduced_one_photon_density(state: PhotonicState) -> np.ndarray:
    """``rho[l, l'] = <a_{l'}^dag a_l>``; Hermitian with trace ``n * norm2``."""
    if state.photon_number < 1:
        raise ValueError("the vacuum has no one-photon density")
    M = state.M
    rho = np.zeros((M, M), dtype=complex)
    amps = state.amplitudes
    for s, c_s in amps.items():
        for l in range(M):
            if s[l] == 0:
                continue
            lowered = s[:l] + (s[l] - 1,) + s[l + 1 :]
            for lp in range(M):
                t = lowered[:lp] + (lowered[lp] + 1,) + lowered[lp + 1 :]
                c_t = amps.get(t)
                if c_t is None:
                    continue
                rho[l, lp] += np.conj(c_t) * c_s * math.sqrt(s[l] * t[lp])
    return rho
