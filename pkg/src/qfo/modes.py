"""Lattice modes, dual-rail qubit layout and few-photon Fock states.

Modes carry signed lattice labels (``..., -2, -1, 0, 1, 2, ...``) as used when
talking about ports, and are stored internally at ascending indices
``0 .. M-1`` with ``index = label + offset``. The window is treated as the
cyclic group Z_M, so sums of labels are taken modulo ``M``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "ModeWindow",
    "QubitLayout",
    "PhotonicState",
    "DEFAULT_MAX_PHOTONS",
    "PRUNE_TOL",
    "single_photon",
    "fock_state",
    "make_qubit_state",
    "product_state",
    "mode_intensities",
]

DEFAULT_MAX_PHOTONS = 3
PRUNE_TOL = 1e-14
_NORM_TOL = 1e-9


@dataclass(frozen=True)
class ModeWindow:
    """A cyclic window of ``M`` lattice modes.

    ``offset`` is the number of negative labels, so labels run over
    ``[-offset, M - offset)``. It must satisfy ``2 * offset % M == 0``: only
    then does an internal index sum ``i + j`` equal the label sum modulo ``M``,
    which is what lets circulant layers be built directly on internal indices.
    """

    M: int
    offset: int | None = None

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"need at least 2 modes, got M={self.M}")
        if self.offset is None:
            object.__setattr__(self, "offset", self.M // 2 if self.M % 2 == 0 else 0)
        if (2 * self.offset) % self.M != 0:
            raise ValueError(
                f"offset {self.offset} breaks the cyclic label algebra for M={self.M}; "
                "use 0 or M/2"
            )

    @property
    def labels(self) -> range:
        return range(-self.offset, self.M - self.offset)

    def index(self, label: int) -> int:
        if label not in self.labels:
            raise ValueError(f"mode label {label} outside window {self.labels}")
        return label + self.offset

    def label(self, index: int) -> int:
        if not 0 <= index < self.M:
            raise ValueError(f"mode index {index} outside 0..{self.M - 1}")
        return index - self.offset


@dataclass(frozen=True)
class QubitLayout:
    """Dual-rail qubits on a window: qubit ``b`` uses labels ``2b`` (down) and ``2b+1`` (up)."""

    window: ModeWindow
    qubits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(b) for b in self.qubits))
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"qubit indices repeat: {self.qubits}")
        for b in self.qubits:
            self.window.index(2 * b)
            self.window.index(2 * b + 1)

    def labels(self, b: int) -> tuple[int, int]:
        """``(down, up)`` mode labels of qubit ``b``."""
        if b not in self.qubits:
            raise ValueError(f"qubit {b} not in layout {self.qubits}")
        return 2 * b, 2 * b + 1

    def modes(self, b: int) -> tuple[int, int]:
        """``(down, up)`` internal mode indices of qubit ``b``."""
        down, up = self.labels(b)
        return self.window.index(down), self.window.index(up)


def _pattern_from_modes(modes: Iterable[int], M: int) -> tuple[int, ...]:
    counts = [0] * M
    for m in modes:
        counts[m] += 1
    return tuple(counts)


@dataclass(frozen=True)
class PhotonicState:
    """An n-photon pure state as a sparse map from occupation patterns to amplitudes.

    Patterns are length-``M`` tuples of counts over internal mode indices.
    States produced by post-selection may be sub-normalized; ``norm2`` then
    reads off the success probability.
    """

    window: ModeWindow
    photon_number: int
    amplitudes: Mapping[tuple[int, ...], complex] = field(repr=False)
    max_photons: int = DEFAULT_MAX_PHOTONS

    def __post_init__(self):
        if self.photon_number > self.max_photons:
            raise ValueError(
                f"{self.photon_number} photons exceeds the cap of {self.max_photons}"
            )
        clean = {}
        for pattern, amp in self.amplitudes.items():
            pattern = tuple(int(c) for c in pattern)
            if len(pattern) != self.window.M:
                raise ValueError(f"pattern {pattern} does not span {self.window.M} modes")
            if min(pattern) < 0 or sum(pattern) != self.photon_number:
                raise ValueError(f"pattern {pattern} is not a {self.photon_number}-photon pattern")
            amp = complex(amp)
            if abs(amp) > PRUNE_TOL:
                clean[pattern] = clean.get(pattern, 0j) + amp
        object.__setattr__(self, "amplitudes", MappingProxyType(clean))

    @property
    def M(self) -> int:
        return self.window.M

    @property
    def norm2(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def amplitude(self, pattern: Sequence[int]) -> complex:
        return self.amplitudes.get(tuple(pattern), 0j)

    def amplitude_at(self, labels: Iterable[int]) -> complex:
        """Amplitude of the pattern holding one photon per listed label (repeats allowed)."""
        modes = [self.window.index(l) for l in labels]
        return self.amplitude(_pattern_from_modes(modes, self.M))

    def to_dict(self) -> dict:
        terms = [
            {"pattern": list(p), "re": a.real, "im": a.imag}
            for p, a in sorted(self.amplitudes.items())
        ]
        return {"n": self.photon_number, "terms": terms}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: Mapping, window: ModeWindow | None = None) -> PhotonicState:
        terms = data["terms"]
        if window is None:
            if not terms:
                raise ValueError("cannot infer the window of an empty state")
            window = ModeWindow(len(terms[0]["pattern"]))
        amps = {tuple(t["pattern"]): complex(t["re"], t["im"]) for t in terms}
        return cls(window, int(data["n"]), amps, max(DEFAULT_MAX_PHOTONS, int(data["n"])))

    @classmethod
    def from_json(cls, text: str, window: ModeWindow | None = None) -> PhotonicState:
        return cls.from_dict(json.loads(text), window)


def single_photon(window: ModeWindow, amplitudes: Mapping[int, complex]) -> PhotonicState:
    """A single photon spread over lattice sites: ``sum_l xi_l |1>_l`` keyed by label."""
    norm2 = sum(abs(a) ** 2 for a in amplitudes.values())
    if abs(norm2 - 1.0) > _NORM_TOL:
        raise ValueError(f"single-photon amplitudes have norm^2 {norm2}, expected 1")
    amps = {}
    for label, a in amplitudes.items():
        pattern = _pattern_from_modes([window.index(label)], window.M)
        amps[pattern] = amps.get(pattern, 0j) + complex(a)
    return PhotonicState(window, 1, amps)


def fock_state(window: ModeWindow, labels: Sequence[int], max_photons: int = DEFAULT_MAX_PHOTONS) -> PhotonicState:
    """Basis state with one photon at each listed label (repeated labels stack)."""
    pattern = _pattern_from_modes([window.index(l) for l in labels], window.M)
    return PhotonicState(window, len(labels), {pattern: 1.0}, max_photons)


def make_qubit_state(layout: QubitLayout, b: int, xi_down: complex, xi_up: complex) -> PhotonicState:
    """Dual-rail qubit ``xi_down |1>_{2b} + xi_up |1>_{2b+1}``."""
    down, up = layout.labels(b)
    return single_photon(layout.window, {down: xi_down, up: xi_up})


def product_state(factors: Sequence[PhotonicState], max_photons: int = DEFAULT_MAX_PHOTONS) -> PhotonicState:
    """Tensor product of single-photon states living on disjoint modes."""
    if not factors:
        raise ValueError("product of no factors")
    window = factors[0].window
    used: set[int] = set()
    for f in factors:
        if f.window != window:
            raise ValueError("factors live on different windows")
        if f.photon_number != 1:
            raise ValueError("product_state takes single-photon factors")
        support = {p.index(1) for p in f.amplitudes}
        if used & support:
            raise ValueError(f"factors share modes {sorted(used & support)}")
        used |= support
    n = len(factors)
    if n > max_photons:
        raise ValueError(f"{n} photons exceeds the cap of {max_photons}")

    # disjoint supports: every pattern is a set of distinct modes, so the
    # normalization sqrt(prod counts!) is 1 throughout
    amps: dict[tuple[int, ...], complex] = {(0,) * window.M: 1.0 + 0j}
    for f in factors:
        nxt: dict[tuple[int, ...], complex] = {}
        for pattern, a in amps.items():
            for single, b in f.amplitudes.items():
                key = tuple(x + y for x, y in zip(pattern, single))
                nxt[key] = nxt.get(key, 0j) + a * b
        amps = nxt
    return PhotonicState(window, n, amps, max_photons)


def mode_intensities(state: PhotonicState) -> np.ndarray:
    """Mean photon number per mode, in internal index order."""
    out = np.zeros(state.M)
    for pattern, a in state.amplitudes.items():
        out += abs(a) ** 2 * np.asarray(pattern, dtype=float)
    return out

