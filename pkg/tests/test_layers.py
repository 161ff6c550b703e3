import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_unitary
from qfo.layers import (
    DiagonalPhases,
    ModeTransform,
    PupilProfile,
    circulant_defect,
    circulant_from_samples,
    circulant_transform,
    compose_8f,
    diagonal_transform,
    fourier_coeffs,
    layered_stack,
    sample_pupil,
)
from qfo.synthesis import fit_unitary


def unimodular(rng, M):
    return np.exp(1j * rng.uniform(-np.pi, np.pi, M))


def inversion(M):
    J = np.zeros((M, M))
    for n in range(M):
        J[n, (-n) % M] = 1
    return J


def test_flat_samples():
    np.testing.assert_array_equal(sample_pupil(PupilProfile.flat(3), 8), np.ones(8))


def test_single_sine_samples():
    prof = PupilProfile((np.pi, 0.0), (0.0, 0.0))
    j = np.arange(8)
    np.testing.assert_allclose(sample_pupil(prof, 8), np.exp(-1j * np.pi * np.sin(2 * np.pi * j / 8)), atol=1e-15)


def test_samples_unimodular():
    prof = PupilProfile((1.3, -2.0, 0.4), (0.7, 3.1, -1.2))
    np.testing.assert_allclose(np.abs(sample_pupil(prof, 16)), 1, atol=1e-15)


def test_nyquist_bound():
    with pytest.raises(ValueError):
        sample_pupil(PupilProfile.flat(4), 8)
    sample_pupil(PupilProfile.flat(4), 9)


def test_coeffs_of_constant():
    P = fourier_coeffs(np.ones(8))
    np.testing.assert_allclose(P, np.eye(8)[0], atol=1e-15)


def test_coeffs_of_negative_ramp():
    M = 8
    d = np.exp(-2j * np.pi * np.arange(M) / M)
    np.testing.assert_allclose(fourier_coeffs(d), np.eye(M)[M - 1], atol=1e-15)


def test_coeffs_reproduce_samples(rng):
    d = unimodular(rng, 12)
    P = fourier_coeffs(d)
    j, k = np.meshgrid(np.arange(12), np.arange(12), indexing="ij")
    np.testing.assert_allclose(np.exp(2j * np.pi * j * k / 12) @ P, d, atol=1e-13)


def test_cyclic_orthogonality_brute_force(rng):
    for M in (3, 6, 16):
        P = fourier_coeffs(unimodular(rng, M))
        for s in range(M):
            corr = sum(P[k] * np.conj(P[(k + s) % M]) for k in range(M))
            assert abs(corr - (s == 0)) < 1e-12


def test_rejects_non_unimodular():
    with pytest.raises(ValueError):
        fourier_coeffs(np.array([1.0, 0.5]))
    with pytest.raises(ValueError):
        circulant_from_samples(np.array([1.0, 1.01, 1.0]))


def test_flat_circulant_is_inversion():
    T = circulant_from_samples(np.ones(8))
    assert T.kind == "circulant"
    np.testing.assert_allclose(T.matrix, inversion(8), atol=1e-15)


def test_negative_ramp_circulant():
    M = 8
    T = circulant_from_samples(np.exp(-2j * np.pi * np.arange(M) / M)).matrix
    for n, r in itertools.product(range(M), repeat=2):
        assert abs(T[n, r] - ((n + r + 1) % M == 0)) < 1e-14


def test_random_circulant_unitary_by_direct_product(rng):
    d = unimodular(rng, 6)
    T = circulant_from_samples(d).matrix
    prod = np.array([[sum(np.conj(T[k, i]) * T[k, j] for k in range(6)) for j in range(6)] for i in range(6)])
    np.testing.assert_allclose(prod, np.eye(6), atol=1e-12)
    assert circulant_defect(T) == 0.0


def test_round_trip_from_coefficients(rng):
    d = unimodular(rng, 10)
    P = fourier_coeffs(d)
    T = circulant_from_samples(d).matrix
    rebuilt = np.array([[P[(n + r) % 10] for r in range(10)] for n in range(10)])
    np.testing.assert_allclose(T, rebuilt, atol=1e-12)


def test_diagonal_layers():
    np.testing.assert_array_equal(diagonal_transform(DiagonalPhases.zeros(5)).matrix, np.eye(5))
    phi = np.zeros(5)
    phi[2] = np.pi
    D = diagonal_transform(DiagonalPhases(phi)).matrix
    np.testing.assert_allclose(np.diag(D), [1, 1, -1, 1, 1], atol=1e-15)
    assert np.all(D[~np.eye(5, dtype=bool)] == 0)


def test_flat_8f_is_identity():
    T = compose_8f(PupilProfile.flat(7), DiagonalPhases.zeros(16), PupilProfile.flat(7), 16)
    assert T.kind == "composite"
    assert np.max(np.abs(T.matrix - np.eye(16))) <= 1e-12


def test_flat_8f_with_modulator_is_reversed_diagonal(rng):
    phi = rng.uniform(-np.pi, np.pi, 8)
    T = compose_8f(PupilProfile.flat(2), DiagonalPhases(phi), PupilProfile.flat(2), 8).matrix
    J = inversion(8)
    expect = J @ np.diag(np.exp(-1j * phi)) @ J
    np.testing.assert_allclose(T, expect, atol=1e-12)
    np.testing.assert_allclose(np.diag(T), np.exp(-1j * phi[(-np.arange(8)) % 8]), atol=1e-12)


def test_stack_matches_8f(rng):
    p1 = PupilProfile(rng.normal(size=3), rng.normal(size=3))
    p2 = PupilProfile(rng.normal(size=3), rng.normal(size=3))
    d = DiagonalPhases(rng.normal(size=8))
    a = layered_stack([p1, d, p2], 8).matrix
    b = circulant_transform(p1, 8).matrix @ diagonal_transform(d).matrix @ circulant_transform(p2, 8).matrix
    np.testing.assert_allclose(a, b, atol=1e-14)
    np.testing.assert_allclose(compose_8f(p1, d, p2, 8).matrix, a, atol=1e-14)


def test_stack_single_flat_pupil():
    np.testing.assert_allclose(layered_stack([PupilProfile.flat(1)], 6).matrix, inversion(6), atol=1e-15)


def test_stack_must_alternate():
    with pytest.raises(ValueError):
        layered_stack([PupilProfile.flat(1), PupilProfile.flat(1)], 4)
    with pytest.raises(ValueError):
        layered_stack([], 4)
    with pytest.raises(ValueError):
        compose_8f(PupilProfile.flat(1), DiagonalPhases.zeros(5), PupilProfile.flat(1), 4)


def test_transform_validation(rng):
    with pytest.raises(ValueError):
        ModeTransform(np.ones((3, 3)), "composite")
    with pytest.raises(ValueError):
        ModeTransform(random_unitary(4, rng), "circulant")
    with pytest.raises(ValueError):
        ModeTransform(random_unitary(4, rng), "diagonal")
    with pytest.raises(ValueError):
        ModeTransform(np.eye(3), "banded")
    T = ModeTransform(np.eye(3), "diagonal")
    with pytest.raises(ValueError):
        T.matrix[0, 0] = 2


def test_profile_json_round_trip():
    p = PupilProfile((0.1, -0.25), (1.5, 2.0), kappa_x=1234.5)
    q = PupilProfile.from_json(p.to_json())
    assert q == p
    assert p.to_dict()["R"] == 2
    with pytest.raises(ValueError):
        PupilProfile.from_dict({"R": 3, "sin": [0], "cos": [0]})
    d = DiagonalPhases((0.5, 1.0))
    assert DiagonalPhases.from_json(d.to_json()) == d


def test_profile_phase_matches_samples():
    p = PupilProfile((0.3, -0.7), (1.1, 0.2))
    x = np.arange(9) / 9  # kappa_x = 2 pi: one period per unit length
    np.testing.assert_allclose(np.exp(-1j * p.phase(x)), sample_pupil(p, 9), atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([4, 8, 16, 32]), st.integers(0, 2**32 - 1))
def test_circulant_property(M, seed):
    d = unimodular(np.random.default_rng(seed), M)
    T = circulant_from_samples(d).matrix
    assert np.max(np.abs(T.conj().T @ T - np.eye(M))) <= 1e-10
    assert circulant_defect(T) <= 1e-12


@pytest.mark.slow
def test_layered_fit_improves_with_depth(rng):
    M = 8
    U = np.eye(M, dtype=complex)
    U[:4, :4] = random_unitary(4, rng)
    errs = [fit_unitary(U, n, restarts=2, seed=1)[2] for n in (1, 3, 5)]
    assert errs[0] > errs[1] > errs[2]
    layers, stack, err = fit_unitary(U, 5, restarts=2, seed=1)
    np.testing.assert_allclose(layered_stack(layers, M).matrix, stack.matrix, atol=1e-14)
    with pytest.raises(ValueError):
        fit_unitary(U, 2)
