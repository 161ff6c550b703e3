"""Quantum Fourier-optical gate toolkit.

Circulant layers from periodic phase-only 4f pupils, diagonal layers from
lattice phase modulators, few-photon Fock evolution, coincidence
post-selection, gate synthesis and 1D scalar wave propagation.
"""

from .evolution import (
    CoincidenceProjector,
    GateOperator,
    coincidence_project,
    evolve,
    extract_single_qubit_operator,
    extract_two_qubit_operator,
    permanent,
    reduced_one_photon_density,
    transition_amplitude,
)
from .fixtures import load_fixture
from .layers import (
    DiagonalPhases,
    ModeTransform,
    PupilProfile,
    circulant_from_samples,
    circulant_transform,
    compose_8f,
    diagonal_transform,
    fourier_coeffs,
    layered_stack,
    sample_pupil,
)
from .metrics import CNOT, HADAMARD, GateScore, fidelity, success_probability
from .modes import (
    ModeWindow,
    PhotonicState,
    QubitLayout,
    fock_state,
    make_qubit_state,
    mode_intensities,
    product_state,
    single_photon,
)
from .propagation import IntensityMap, PropagationScene, propagate_scene
from .synthesis import GateReport, SynthesisProblem, evaluate_profiles, fit_unitary, objective, synthesize

__version__ = "0.1.0"
