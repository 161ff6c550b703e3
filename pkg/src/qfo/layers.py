"""Circulant and diagonal mode transforms built from phase-only optics.

A 4f relay with a periodic phase-only pupil maps lattice mode ``n`` to
``sum_r P[n + r] b_r``, where ``P`` are the Fourier-series coefficients of the
pupil transmission ``exp(-i phi_p(x))``. Sampling the pupil ``M`` times per
period turns that into an exactly unitary circulant on Z_M. A spatial phase
modulator sitting on the image lattice is a diagonal layer.

Transform matrices follow the creation-operator convention: row ``n`` holds the
output amplitudes of input mode ``n``, so a stack traversed by light in the
order ``L1, L2, ...`` has matrix ``L1 @ L2 @ ...``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

__all__ = [
    "PupilProfile",
    "DiagonalPhases",
    "ModeTransform",
    "UNITARY_TOL",
    "sample_pupil",
    "fourier_coeffs",
    "circulant_from_samples",
    "circulant_transform",
    "diagonal_transform",
    "compose_8f",
    "layered_stack",
]

UNITARY_TOL = 1e-10
_UNIMODULAR_TOL = 1e-12


@dataclass(frozen=True)
class PupilProfile:
    """Phase of a periodic pupil as a truncated Fourier series.

    ``phi_p(x) = sum_n S_n sin(n kappa_x x) + C_n cos(n kappa_x x)`` for
    ``n = 1..R``. ``kappa_x`` only matters when the pupil is placed in a
    physical scene; the layer math works per period.
    """

    sin: tuple[float, ...]
    cos: tuple[float, ...]
    kappa_x: float = 2 * np.pi

    def __post_init__(self):
        s = tuple(float(v) for v in self.sin)
        c = tuple(float(v) for v in self.cos)
        if len(s) != len(c):
            raise ValueError(f"{len(s)} sine vs {len(c)} cosine coefficients")
        if not np.all(np.isfinite(s + c)):
            raise ValueError("pupil coefficients must be finite")
        object.__setattr__(self, "sin", s)
        object.__setattr__(self, "cos", c)

    @property
    def R(self) -> int:
        return len(self.sin)

    @classmethod
    def flat(cls, R: int = 1, kappa_x: float = 2 * np.pi) -> PupilProfile:
        return cls((0.0,) * R, (0.0,) * R, kappa_x)

    def phase(self, x) -> np.ndarray:
        """Evaluate ``phi_p`` at physical positions ``x``."""
        x = np.asarray(x, dtype=float)
        n = np.arange(1, self.R + 1)
        arg = np.multiply.outer(x, n * self.kappa_x)
        return np.sin(arg) @ np.asarray(self.sin) + np.cos(arg) @ np.asarray(self.cos)

    def to_dict(self) -> dict:
        return {"R": self.R, "sin": list(self.sin), "cos": list(self.cos), "kappa_x": self.kappa_x}

    @classmethod
    def from_dict(cls, data: Mapping) -> PupilProfile:
        prof = cls(data["sin"], data["cos"], float(data.get("kappa_x", 2 * np.pi)))
        if "R" in data and int(data["R"]) != prof.R:
            raise ValueError(f"R={data['R']} disagrees with {prof.R} coefficient pairs")
        return prof

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> PupilProfile:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class DiagonalPhases:
    """Per-mode modulator phases, in internal index order."""

    phi: tuple[float, ...]

    def __post_init__(self):
        phi = tuple(float(v) for v in self.phi)
        if not np.all(np.isfinite(phi)):
            raise ValueError("modulator phases must be finite")
        object.__setattr__(self, "phi", phi)

    @property
    def M(self) -> int:
        return len(self.phi)

    @classmethod
    def zeros(cls, M: int) -> DiagonalPhases:
        return cls((0.0,) * M)

    def to_dict(self) -> dict:
        return {"phi": list(self.phi)}

    @classmethod
    def from_dict(cls, data: Mapping) -> DiagonalPhases:
        return cls(data["phi"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> DiagonalPhases:
        return cls.from_dict(json.loads(text))


_KINDS = ("circulant", "diagonal", "composite")


@dataclass(frozen=True, eq=False)
class ModeTransform:
    """Unitary ``M x M`` transform on lattice creation operators.

    The constructor checks unitarity and, for the structured kinds, the
    circulant (constant along ``(n + r) mod M``) or diagonal pattern.
    """

    matrix: np.ndarray
    kind: str
    provenance: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        T = np.array(self.matrix, dtype=complex)
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise ValueError(f"transform must be square, got shape {T.shape}")
        err = unitarity_error(T)
        if err > UNITARY_TOL:
            raise ValueError(f"transform is not unitary (max |T^H T - I| = {err:.3g})")
        if self.kind == "diagonal" and np.any(T[~np.eye(len(T), dtype=bool)] != 0):
            raise ValueError("diagonal transform has off-diagonal entries")
        if self.kind == "circulant" and circulant_defect(T) > UNITARY_TOL:
            raise ValueError("transform is not constant along (n + r) mod M")
        T.setflags(write=False)
        object.__setattr__(self, "matrix", T)

    @property
    def M(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other: ModeTransform) -> ModeTransform:
        return ModeTransform(self.matrix @ other.matrix, "composite", self.provenance + other.provenance)


def unitarity_error(T: np.ndarray) -> float:
    T = np.asarray(T)
    return float(np.max(np.abs(T.conj().T @ T - np.eye(len(T)))))


def circulant_defect(T: np.ndarray) -> float:
    """Largest spread of entries within one ``(n + r) mod M`` class."""
    T = np.asarray(T)
    M = len(T)
    cls = (np.arange(M)[:, None] + np.arange(M)[None, :]) % M
    worst = 0.0
    for k in range(M):
        vals = T[cls == k]
        worst = max(worst, float(np.max(np.abs(vals - vals[0]))))
    return worst


def sample_pupil(profile: PupilProfile, M: int) -> np.ndarray:
    """Pupil transmission ``exp(-i phi_p)`` at ``M`` equispaced points of one period.

    Requires ``M >= 2R + 1`` so every harmonic sits strictly below the
    sampling Nyquist frequency.
    """
    if M < 2 * profile.R + 1:
        raise ValueError(f"M={M} under-samples a pupil with R={profile.R} harmonics (need M >= {2 * profile.R + 1})")
    theta = 2 * np.pi * np.arange(M) / M
    n = np.arange(1, profile.R + 1)
    arg = np.outer(theta, n)
    phi = np.sin(arg) @ np.asarray(profile.sin) + np.cos(arg) @ np.asarray(profile.cos)
    return np.exp(-1j * phi)


def _check_unimodular(d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=complex)
    if d.ndim != 1 or len(d) < 2:
        raise ValueError("expected a 1-D sample vector of length >= 2")
    dev = np.max(np.abs(np.abs(d) - 1.0))
    if dev > _UNIMODULAR_TOL:
        raise ValueError(f"pupil samples are not unit modulus (max deviation {dev:.3g})")
    return d


def fourier_coeffs(d: Sequence[complex]) -> np.ndarray:
    """Discrete Fourier-series coefficients of pupil samples.

    ``P[k] = (1/M) sum_j d[j] exp(-2 pi i j k / M)``, i.e. ``d[j] = sum_k P[k]
    exp(2 pi i j k / M)`` with ``d[j]`` the transmission at ``x_j = j * period / M``.
    """
    d = _check_unimodular(d)
    return np.fft.fft(d) / len(d)


def circulant_from_samples(d: Sequence[complex]) -> ModeTransform:
    """Circulant layer ``T[n, r] = P[(n + r) mod M]`` from pupil samples."""
    P = fourier_coeffs(d)
    M = len(P)
    idx = (np.arange(M)[:, None] + np.arange(M)[None, :]) % M
    return ModeTransform(P[idx], "circulant", (("samples", tuple(np.asarray(d, dtype=complex))),))


def circulant_transform(profile: PupilProfile, M: int) -> ModeTransform:
    """4f layer for a pupil profile on an ``M``-mode window."""
    T = circulant_from_samples(sample_pupil(profile, M))
    return ModeTransform(T.matrix, "circulant", (profile,))


def diagonal_transform(phases: DiagonalPhases) -> ModeTransform:
    """Modulator layer ``D[r, r] = exp(-i phi_r)``."""
    D = np.diag(np.exp(-1j * np.asarray(phases.phi)))
    return ModeTransform(D, "diagonal", (phases,))


def compose_8f(pupil1: PupilProfile, diag: DiagonalPhases, pupil2: PupilProfile, M: int) -> ModeTransform:
    """4f - modulator - 4f: ``L1 @ D @ L2``."""
    if diag.M != M:
        raise ValueError(f"modulator has {diag.M} phases for an {M}-mode window")
    return layered_stack([pupil1, diag, pupil2], M)


Layer = Union[PupilProfile, DiagonalPhases]


def layered_stack(layers: Sequence[Layer], M: int) -> ModeTransform:
    """Product of alternating circulant and diagonal layers in traversal order."""
    if not layers:
        raise ValueError("empty layer sequence")
    mats = []
    prev = None
    for layer in layers:
        if isinstance(layer, PupilProfile):
            kind, T = "circulant", circulant_transform(layer, M)
        elif isinstance(layer, DiagonalPhases):
            if layer.M != M:
                raise ValueError(f"modulator has {layer.M} phases for an {M}-mode window")
            kind, T = "diagonal", diagonal_transform(layer)
        else:
            raise TypeError(f"not a layer: {layer!r}")
        if kind == prev:
            raise ValueError(f"two consecutive {kind} layers; the stack must alternate")
        prev = kind
        mats.append(T.matrix)
    if len(mats) == 1:
        return ModeTransform(mats[0], kind, tuple(layers))
    out = mats[0]
    for m in mats[1:]:
        out = out @ m
    return ModeTransform(out, "composite", tuple(layers))
