import itertools
import math

import numpy as np
import pytest

from conftest import random_unitary
from published import O_CNOT, T_CNOT, embed_cnot_transform, phase_diff
from qfo.evolution import (
    MAX_PERMANENT_DIM,
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
from qfo.layers import PupilProfile, circulant_transform
from qfo.metrics import CNOT
from qfo.modes import ModeWindow, PhotonicState, QubitLayout, fock_state, make_qubit_state, product_state

S2 = 1 / math.sqrt(2)


def naive_permanent(A):
    n = len(A)
    return sum(math.prod(A[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n)))


def patterns(M, n):
    for combo in itertools.combinations_with_replacement(range(M), n):
        counts = [0] * M
        for m in combo:
            counts[m] += 1
        yield tuple(counts)


def test_permanent_small_cases():
    a, b, c, d = 1 + 2j, -0.5, 3j, 2
    assert permanent(np.array([[a, b], [c, d]])) == pytest.approx(a * d + b * c)
    assert permanent(np.eye(3)) == pytest.approx(1)
    assert permanent(np.zeros((0, 0))) == 1
    assert permanent(np.ones((4, 4))) == pytest.approx(24)


def test_permanent_matches_naive(rng):
    for n in range(1, 7):
        A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        assert abs(permanent(A) - naive_permanent(A)) < 1e-10 * max(1, abs(naive_permanent(A)))


def test_permanent_limits():
    with pytest.raises(ValueError):
        permanent(np.ones((MAX_PERMANENT_DIM + 1,) * 2))
    with pytest.raises(ValueError):
        permanent(np.ones((2, 3)))


def test_single_photon_amplitude_is_row(rng):
    U = random_unitary(5, rng)
    w = ModeWindow(5)
    out = evolve(fock_state(w, [2]), U)
    for l in range(5):
        p = tuple(int(i == l) for i in range(5))
        assert out.amplitude(p) == pytest.approx(U[2, l])
        assert transition_amplitude((0, 0, 1, 0, 0), p, U) == pytest.approx(U[2, l])


def test_identity_transition():
    for p in patterns(4, 2):
        for q in patterns(4, 2):
            assert transition_amplitude(p, q, np.eye(4)) == pytest.approx(float(p == q))
    with pytest.raises(ValueError):
        transition_amplitude((1, 0), (1, 1), np.eye(2))


def test_flat_layer_mirrors_photon():
    w = ModeWindow(16)
    T = circulant_transform(PupilProfile.flat(7), 16)
    out = evolve(fock_state(w, [3]), T)
    assert out.amplitude_at([-3]) == pytest.approx(1)


def test_hong_ou_mandel():
    w = ModeWindow(2, 0)
    BS = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    out = evolve(PhotonicState(w, 2, {(1, 1): 1.0}), BS)
    assert out.amplitude((1, 1)) == pytest.approx(0, abs=1e-15)
    assert out.amplitude((2, 0)) == pytest.approx(S2)
    assert out.amplitude((0, 2)) == pytest.approx(-S2)


@pytest.mark.parametrize("n,M", [(2, 4), (3, 5)])
def test_evolve_matches_permanents(rng, n, M):
    U = random_unitary(M, rng)
    w = ModeWindow(M, 0)
    for pin in patterns(M, n):
        out = evolve(PhotonicState(w, n, {pin: 1.0}), U)
        assert out.norm2 == pytest.approx(1, abs=1e-10)
        for pout in patterns(M, n):
            assert abs(out.amplitude(pout) - transition_amplitude(pin, pout, U)) < 1e-10


def test_evolve_dimension_mismatch():
    with pytest.raises(ValueError):
        evolve(fock_state(ModeWindow(4), [0]), np.eye(3))


@pytest.fixture
def cnot_setup():
    w = ModeWindow(16)
    layout = QubitLayout(w, (0, -1))
    return w, layout, CoincidenceProjector.for_qubits(layout, 0, -1)


def test_projector_keeps_and_drops(cnot_setup):
    w, layout, proj = cnot_setup
    keep = fock_state(w, [1, -1])
    assert coincidence_project(keep, proj).amplitudes == keep.amplitudes
    drop = fock_state(w, [1, 0])
    assert coincidence_project(drop, proj).norm2 == 0
    with pytest.raises(ValueError):
        coincidence_project(fock_state(w, [1]), proj)
    with pytest.raises(ValueError):
        CoincidenceProjector((1, 2), (2, 3))


def test_projector_idempotent_and_contracting(cnot_setup, rng):
    w, layout, proj = cnot_setup
    U = random_unitary(16, rng)
    s = evolve(product_state([make_qubit_state(layout, 0, S2, S2), make_qubit_state(layout, -1, 0, 1)]), U)
    once = coincidence_project(s, proj)
    twice = coincidence_project(once, proj)
    assert once.amplitudes == twice.amplitudes
    assert once.norm2 <= s.norm2 + 1e-12


def test_single_qubit_extraction_identity():
    layout = QubitLayout(ModeWindow(8), (0, 1))
    op = extract_single_qubit_operator(np.eye(8), layout, 1)
    np.testing.assert_array_equal(op.matrix, np.eye(2))
    assert op.basis == ("up", "down")


def test_single_qubit_extraction_is_action(rng):
    """Extracted operator acting on (xi_up, xi_down) equals evolving the photon."""
    w = ModeWindow(8)
    layout = QubitLayout(w, (0,))
    U = random_unitary(8, rng)
    op = extract_single_qubit_operator(U, layout, 0)
    xi_down, xi_up = 0.6, 0.8j
    out = evolve(make_qubit_state(layout, 0, xi_down, xi_up), U)
    got = np.array([out.amplitude_at([1]), out.amplitude_at([0])])
    np.testing.assert_allclose(op.matrix @ np.array([xi_up, xi_down]), got, atol=1e-12)


def test_two_qubit_extraction_identity(cnot_setup):
    w, layout, _ = cnot_setup
    op = extract_two_qubit_operator(np.eye(16), layout, 0, -1)
    np.testing.assert_allclose(op.matrix, np.eye(4), atol=1e-15)
    with pytest.raises(ValueError):
        extract_two_qubit_operator(np.eye(16), layout, 0, 0)


def test_two_qubit_operator_matches_brute_force(cnot_setup, rng):
    w, layout, proj = cnot_setup
    U = random_unitary(16, rng)
    op = extract_two_qubit_operator(U, layout, 0, -1)
    basis = [(1, -1), (1, -2), (0, -1), (0, -2)]
    for b, labels in enumerate(basis):
        out = coincidence_project(evolve(fock_state(w, list(labels)), U), proj)
        got = np.array([out.amplitude_at(list(o)) for o in basis])
        np.testing.assert_allclose(op.matrix[:, b], got, atol=1e-12)


def test_rail_swap_gives_not_on_target(cnot_setup):
    """Swapping the target rails is a linear map, so it yields I x X, never CNOT."""
    w, layout, _ = cnot_setup
    T = np.eye(16)
    a, b = w.index(-1), w.index(-2)
    T[[a, b]] = T[[b, a]]
    O = extract_two_qubit_operator(T, layout, 0, -1).matrix
    np.testing.assert_allclose(O, np.kron(np.eye(2), [[0, 1], [1, 0]]), atol=1e-15)


def test_published_cnot_regression():
    w = ModeWindow(16)
    layout = QubitLayout(w, (0, -1))
    O = extract_two_qubit_operator(embed_cnot_transform(w), layout, 0, -1).matrix
    for a, b in itertools.product(range(4), repeat=2):
        assert abs(abs(O[a, b]) - abs(O_CNOT[a, b])) <= 0.01
        if abs(O_CNOT[a, b]) > 0.05:
            assert phase_diff(O[a, b], O_CNOT[a, b]) <= 0.02
    assert abs(O[2, 3] - 0.331 * np.exp(0.636j)) < 0.01


def test_published_cnot_block_is_symmetric():
    np.testing.assert_array_equal(T_CNOT, T_CNOT.T)


def test_projection_matches_operator_action(rng, cnot_setup):
    w, layout, proj = cnot_setup
    U = random_unitary(16, rng)
    op = extract_two_qubit_operator(U, layout, 0, -1)
    c = np.array([0.6, 0.8j])
    t = np.array([S2, -S2])
    state = product_state([make_qubit_state(layout, 0, c[1], c[0]), make_qubit_state(layout, -1, t[1], t[0])])
    out = coincidence_project(evolve(state, U), proj)
    vec = np.kron(c, t)
    basis = [(1, -1), (1, -2), (0, -1), (0, -2)]
    got = np.array([out.amplitude_at(list(o)) for o in basis])
    np.testing.assert_allclose(op.matrix @ vec, got, atol=1e-10)
    assert out.norm2 == pytest.approx(np.linalg.norm(op.matrix @ vec) ** 2, abs=1e-10)


def test_gate_operator_serialization():
    op = GateOperator(CNOT * np.exp(0.3j), ("up,up", "up,down", "down,up", "down,down"), (0, -1))
    back = GateOperator.from_dict(op.to_dict())
    np.testing.assert_allclose(back.matrix, op.matrix, atol=1e-15)
    assert back.qubits == (0, -1)
    assert "1.000 e^{0.300i}" in op.format()
    with pytest.raises(ValueError):
        GateOperator(np.eye(3), ("up", "down"))


def test_one_photon_density_single(rng):
    w = ModeWindow(8)
    layout = QubitLayout(w, (0,))
    s = make_qubit_state(layout, 0, 0.6, 0.8j)
    xi = np.zeros(8, dtype=complex)
    xi[w.index(0)], xi[w.index(1)] = 0.6, 0.8j
    np.testing.assert_allclose(reduced_one_photon_density(s), np.outer(xi, xi.conj()), atol=1e-15)


def test_one_photon_density_product():
    w = ModeWindow(8)
    layout = QubitLayout(w, (0, -1))
    a = make_qubit_state(layout, 0, S2, S2)
    b = make_qubit_state(layout, -1, 0.6, -0.8)
    rho = reduced_one_photon_density(product_state([a, b]))
    np.testing.assert_allclose(rho, reduced_one_photon_density(a) + reduced_one_photon_density(b), atol=1e-15)


def test_one_photon_density_entangled(rng, cnot_setup):
    w, layout, proj = cnot_setup
    U = random_unitary(16, rng)
    s = product_state([make_qubit_state(layout, 0, S2, S2), make_qubit_state(layout, -1, 0, 1)])
    out = coincidence_project(evolve(s, U), proj)
    rho = reduced_one_photon_density(out)
    np.testing.assert_allclose(rho, rho.conj().T, atol=1e-15)
    assert np.trace(rho).real == pytest.approx(2 * out.norm2, abs=1e-12)
    # doubly occupied modes: <n> on |2> is 2
    rho2 = reduced_one_photon_density(fock_state(w, [3, 3]))
    assert rho2[w.index(3), w.index(3)] == pytest.approx(2)
    with pytest.raises(ValueError):
        reduced_one_photon_density(PhotonicState(w, 0, {(0,) * 16: 1.0}))
