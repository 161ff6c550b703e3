"""1D paraxial scalar propagation of lattice-mode fields through lens/pupil trains.

Each occupied lattice mode ``l`` gets a Gaussian field centred at ``l * lattice``
on the input plane. The fields are pushed through the element train with the
angular-spectrum method (paraxial transfer function ``exp(-i kx^2 dz / 2k)``),
and the photon-number density is assembled from the one-photon reduced density
matrix::

    I(x, z) = sum_{l, l'} rho[l, l'] u_l(x, z) conj(u_l'(x, z))

which is exact for the intensity of any state, entangled or not.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .evolution import reduced_one_photon_density
from .layers import DiagonalPhases, PupilProfile
from .modes import ModeWindow, PhotonicState

__all__ = [
    "Grid",
    "FreeSpace",
    "ThinLens",
    "Pupil",
    "Modulator",
    "PropagationScene",
    "IntensityMap",
    "ParaxialError",
    "AliasingError",
    "PARAXIAL_LIMIT",
    "gaussian",
    "angular_spectrum_step",
    "thin_lens",
    "four_f",
    "eight_f",
    "propagate_fields",
    "propagate_scene",
    "output_scene",
    "lattice_amplitudes",
    "fringe_visibility",
    "pupil_leakage",
]

PARAXIAL_LIMIT = 0.01
_EDGE_CELLS = 2
_EDGE_FRACTION = 1e-6
# Gaussian spectral radius holding all but ~1e-6 of the power, in units of 1/waist
_GAUSS_K_RADIUS = 4.9


class ParaxialError(ValueError):
    """Scene content leaves the paraxial regime."""


class AliasingError(ValueError):
    """Field energy reached the edge of the periodic computational grid."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``n`` points over ``extent`` meters, centred on the optical axis."""

    n: int = 4096
    extent: float = 3.2e-3

    def __post_init__(self):
        if self.n < 8 or self.extent <= 0:
            raise ValueError(f"bad grid n={self.n} extent={self.extent}")

    @property
    def dx(self) -> float:
        return self.extent / self.n

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.dx

    @property
    def kx(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.n, d=self.dx)


@dataclass(frozen=True)
class FreeSpace:
    dz: float


@dataclass(frozen=True)
class ThinLens:
    f: float


@dataclass(frozen=True)
class Pupil:
    """Periodic phase pupil. With ``kappa_x=None`` the period is matched to the
    lattice for a 4f relay of focal length ``f`` (``kappa_x = k * lattice / f``)."""

    profile: PupilProfile
    f: float | None = None
    kappa_x: float | None = None


@dataclass(frozen=True)
class Modulator:
    """Step-phase modulator on the image lattice: cell ``l`` carries ``phi[index(l)]``,
    extended periodically beyond the window."""

    phases: DiagonalPhases
    window: ModeWindow


Element = Union[FreeSpace, ThinLens, Pupil, Modulator]


def four_f(f: float, pupil: PupilProfile) -> list[Element]:
    return [FreeSpace(f), ThinLens(f), FreeSpace(f), Pupil(pupil, f=f), FreeSpace(f), ThinLens(f), FreeSpace(f)]


def eight_f(f: float, pupil1: PupilProfile, diag: DiagonalPhases, pupil2: PupilProfile, window: ModeWindow) -> list[Element]:
    return four_f(f, pupil1) + [Modulator(diag, window)] + four_f(f, pupil2)


@dataclass(frozen=True)
class PropagationScene:
    """Grid, optics and sources for one propagation run.

    Defaults are the lattice pitch, wavelength and source waist of the
    Hadamard demonstration. ``sources`` maps a mode label to ``(x0, waist)``;
    unlisted labels sit at ``label * lattice`` with the scene waist.
    """

    elements: tuple = ()
    grid: Grid = Grid()
    wavelength: float = 650e-9
    lattice: float = 100e-6
    waist: float = 10e-6
    window: ModeWindow = ModeWindow(16)
    sources: Mapping[int, tuple[float, float]] = field(default_factory=dict)
    planes_per_segment: int = 64

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if self.wavelength <= 0 or self.lattice <= 0 or self.waist <= 0:
            raise ValueError("wavelength, lattice and waist must be positive")
        if self.planes_per_segment < 1:
            raise ValueError("need at least one plane per segment")
        for el in self.elements:
            if isinstance(el, FreeSpace) and el.dz < 0:
                raise ValueError(f"negative propagation distance {el.dz}")
            if isinstance(el, ThinLens) and el.f == 0:
                raise ValueError("lens with zero focal length")
            if isinstance(el, Pupil) and el.f is None and el.kappa_x is None:
                raise ValueError("pupil needs a focal length or an explicit kappa_x")

    @property
    def k(self) -> float:
        return 2 * np.pi / self.wavelength

    def source(self, label: int) -> tuple[float, float]:
        return self.sources.get(label, (label * self.lattice, self.waist))

    def pupil_kappa(self, pupil: Pupil) -> float:
        return pupil.kappa_x if pupil.kappa_x is not None else self.k * self.lattice / pupil.f

    def check(self, labels: Iterable[int]) -> None:
        """Raise if sources fall off the grid or content leaves the paraxial regime."""
        half = self.grid.extent / 2
        kmax = 0.0
        for label in labels:
            x0, w = self.source(label)
            if abs(x0) + 4 * w > half - _EDGE_CELLS * self.grid.dx:
                raise ValueError(f"source for mode {label} at {x0:.3g} m (waist {w:.3g}) is off the grid")
            kmax = max(kmax, _GAUSS_K_RADIUS / w)
        for el in self.elements:
            if isinstance(el, Pupil):
                kmax = max(kmax, el.profile.R * self.pupil_kappa(el))
        ratio = (kmax / self.k) ** 2
        if ratio >= PARAXIAL_LIMIT:
            raise ParaxialError(f"(kx_max/k)^2 = {ratio:.3g} violates the paraxial bound {PARAXIAL_LIMIT}")


def gaussian(x: np.ndarray, x0: float, waist: float) -> np.ndarray:
    """Unit-power Gaussian ``(2/(pi w^2))^(1/4) exp(-(x-x0)^2/w^2)`` on the grid."""
    return (2 / (np.pi * waist**2)) ** 0.25 * np.exp(-((x - x0) ** 2) / waist**2)


def _power(field: np.ndarray, dx: float) -> np.ndarray:
    return np.sum(np.abs(field) ** 2, axis=-1) * dx


def _guard(field: np.ndarray, grid: Grid) -> None:
    total = np.sum(np.abs(field) ** 2, axis=-1)
    edge = np.sum(np.abs(field[..., :_EDGE_CELLS]) ** 2, axis=-1) + np.sum(
        np.abs(field[..., -_EDGE_CELLS:]) ** 2, axis=-1
    )
    bad = edge > _EDGE_FRACTION * np.maximum(total, np.finfo(float).tiny)
    if np.any(bad & (total > 0)):
        frac = float(np.max(edge / np.maximum(total, np.finfo(float).tiny)))
        raise AliasingError(f"{frac:.3g} of the field power sits at the grid edge")


def angular_spectrum_step(field: np.ndarray, dz: float, wavelength: float, grid: Grid) -> np.ndarray:
    """Paraxial free-space step; works on the last axis so mode stacks go in one call."""
    if dz < 0:
        raise ValueError(f"negative propagation distance {dz}")
    field = np.asarray(field, dtype=complex)
    _guard(field, grid)
    if dz == 0:
        return field.copy()
    k = 2 * np.pi / wavelength
    H = np.exp(-1j * grid.kx**2 * dz / (2 * k))
    out = np.fft.ifft(np.fft.fft(field, axis=-1) * H, axis=-1)
    _guard(out, grid)
    return out


def thin_lens(field: np.ndarray, f: float, wavelength: float, grid: Grid) -> np.ndarray:
    if f == 0:
        raise ValueError("lens with zero focal length")
    k = 2 * np.pi / wavelength
    return np.asarray(field, dtype=complex) * np.exp(-1j * k * grid.x**2 / (2 * f))


def _apply(el: Element, U: np.ndarray, scene: PropagationScene) -> np.ndarray:
    g = scene.grid
    if isinstance(el, ThinLens):
        return thin_lens(U, el.f, scene.wavelength, g)
    if isinstance(el, Pupil):
        prof = el.profile
        kappa = scene.pupil_kappa(el)
        n = np.arange(1, prof.R + 1)
        arg = np.outer(g.x, n * kappa)
        phi = np.sin(arg) @ np.asarray(prof.sin) + np.cos(arg) @ np.asarray(prof.cos)
        return U * np.exp(-1j * phi)
    if isinstance(el, Modulator):
        cells = np.rint(g.x / scene.lattice).astype(int)
        idx = (cells + el.window.offset) % el.window.M
        return U * np.exp(-1j * np.asarray(el.phases.phi)[idx])
    raise TypeError(f"unknown element {el!r}")


def propagate_fields(scene: PropagationScene, labels: Sequence[int], on_plane=None) -> tuple[np.ndarray, np.ndarray]:
    """Propagate one source field per label through the scene.

    ``on_plane(z, U)`` is called for every recorded plane with the ``(L, N)``
    field stack. Returns the final stack and the recorded ``z`` positions.
    """
    labels = list(labels)
    scene.check(labels)
    g = scene.grid
    U = np.array([gaussian(g.x, *scene.source(l)) for l in labels], dtype=complex)
    z = 0.0
    zs = [z]
    if on_plane:
        on_plane(z, U)
    for el in scene.elements:
        if isinstance(el, FreeSpace):
            step = el.dz / scene.planes_per_segment
            for _ in range(scene.planes_per_segment):
                U = angular_spectrum_step(U, step, scene.wavelength, g)
                z += step
                zs.append(z)
                if on_plane:
                    on_plane(z, U)
        else:
            U = _apply(el, U, scene)
    return U, np.asarray(zs)


@dataclass(frozen=True, eq=False)
class IntensityMap:
    """Photon-number density ``I[z, x]`` (per meter) with its axes in meters."""

    I: np.ndarray
    z: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        if self.I.shape != (len(self.z), len(self.x)):
            raise ValueError(f"intensity shape {self.I.shape} does not match axes")

    @property
    def power(self) -> np.ndarray:
        """Integrated photon number per plane."""
        return self.I.sum(axis=1) * (self.x[1] - self.x[0])

    def at(self, z: float) -> np.ndarray:
        return self.I[int(np.argmin(np.abs(self.z - z)))]

    def then(self, other: IntensityMap) -> IntensityMap:
        """Append a later segment, shifting its ``z`` to follow this one."""
        if not np.array_equal(self.x, other.x):
            raise ValueError("segments use different grids")
        return IntensityMap(np.vstack([self.I, other.I]), np.concatenate([self.z, self.z[-1] + other.z]), self.x)

    def to_csv(self, path, stride: int = 1) -> None:
        """Rows are z planes, columns x samples; 17 significant digits."""
        xs = self.x[::stride]
        with open(path, "w", newline="\n") as fh:
            fh.write("z_m\\x_m," + ",".join(f"{v:.17g}" for v in xs) + "\n")
            for z, row in zip(self.z, self.I[:, ::stride]):
                fh.write(f"{z:.17g}," + ",".join(f"{v:.17g}" for v in row) + "\n")

    def to_pgm(self, path, stride: int = 1) -> None:
        """8-bit binary PGM, max-normalized; one image row per z plane."""
        img = self.I[:, ::stride]
        peak = img.max()
        scaled = np.zeros_like(img) if peak <= 0 else img / peak
        data = np.clip(np.rint(scaled * 255), 0, 255).astype(np.uint8)
        h, w = data.shape
        Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + data.tobytes())


def _rho_of(state_or_rho, window: ModeWindow) -> np.ndarray:
    if isinstance(state_or_rho, PhotonicState):
        if state_or_rho.window != window:
            raise ValueError("state and scene use different mode windows")
        return reduced_one_photon_density(state_or_rho)
    rho = np.asarray(state_or_rho, dtype=complex)
    if rho.shape != (window.M, window.M):
        raise ValueError(f"density of shape {rho.shape} does not match {window.M} modes")
    return rho


def propagate_scene(scene: PropagationScene, state_or_rho) -> IntensityMap:
    """Intensity map of a Fock state (or a one-photon density) through the scene."""
    rho = _rho_of(state_or_rho, scene.window)
    occupied = [i for i in range(scene.window.M) if abs(rho[i, i]) > 0]
    if not occupied:
        raise ValueError("state has no occupied modes")
    labels = [scene.window.label(i) for i in occupied]
    sub = rho[np.ix_(occupied, occupied)]
    rows = []

    def record(z, U):
        I = np.real(np.einsum("ab,ax,bx->x", sub, U, U.conj()))
        rows.append(np.maximum(I, 0.0))

    _, zs = propagate_fields(scene, labels, record)
    return IntensityMap(np.array(rows), zs, scene.grid.x)


def output_scene(scene: PropagationScene, distance: float) -> PropagationScene:
    """Free-space scene starting on an output lattice plane of ``scene``."""
    return PropagationScene(
        (FreeSpace(distance),),
        scene.grid,
        scene.wavelength,
        scene.lattice,
        scene.waist,
        scene.window,
        scene.sources,
        scene.planes_per_segment,
    )


def lattice_amplitudes(scene: PropagationScene, field: np.ndarray) -> np.ndarray:
    """Overlaps of a field with every lattice-mode Gaussian of the window (index order)."""
    g = scene.grid
    modes = np.array([gaussian(g.x, *scene.source(scene.window.label(i))) for i in range(scene.window.M)])
    return modes.conj() @ field * g.dx


def fringe_visibility(scene: PropagationScene, state_or_rho, pair: tuple[int, int], z: float) -> float:
    """Contrast of the interference term between two lattice modes at plane ``z``.

    Ratio of the largest cross term ``2 Re(rho_ab u_a conj(u_b))`` to the largest
    value it could reach with full coherence, ``2 sqrt(rho_aa rho_bb) |u_a||u_b|``.
    """
    rho = _rho_of(state_or_rho, scene.window)
    a, b = (scene.window.index(l) for l in pair)
    if rho[a, a].real <= 0 or rho[b, b].real <= 0:
        raise ValueError(f"modes {pair} are not both occupied")
    cut = PropagationScene(
        _elements_until(scene.elements, z),
        scene.grid, scene.wavelength, scene.lattice, scene.waist, scene.window, scene.sources, 1,
    )
    U, _ = propagate_fields(cut, list(pair))
    cross = 2 * np.real(rho[a, b] * U[0] * U[1].conj())
    bound = 2 * np.sqrt(rho[a, a].real * rho[b, b].real) * np.abs(U[0]) * np.abs(U[1])
    return float(np.max(np.abs(cross)) / np.max(bound))


def _elements_until(elements: Sequence[Element], z: float) -> tuple:
    out, acc = [], 0.0
    for el in elements:
        if isinstance(el, FreeSpace):
            if acc + el.dz >= z:
                if z - acc > 0:
                    out.append(FreeSpace(z - acc))
                return tuple(out)
            acc += el.dz
        out.append(el)
    return tuple(out)


def pupil_leakage(profile: PupilProfile, M: int, oversample: int = 64) -> float:
    """Power of the physical pupil spectrum outside the ``M`` orders a window can hold.

    The cyclic layer model folds every diffraction order into Z_M; a real
    periodic pupil sends order ``k`` to lattice shift ``k``. The folded model
    is faithful to the optics only when this number is small.
    """
    N = oversample * M
    theta = 2 * np.pi * np.arange(N) / N
    n = np.arange(1, profile.R + 1)
    arg = np.outer(theta, n)
    phi = np.sin(arg) @ np.asarray(profile.sin) + np.cos(arg) @ np.asarray(profile.cos)
    c = np.fft.fft(np.exp(-1j * phi)) / N
    k = np.fft.fftfreq(N, 1 / N)
    lo, hi = -(M // 2), M - M // 2
    inside = (k >= lo) & (k < hi)
    return float(np.sum(np.abs(c[~inside]) ** 2))
