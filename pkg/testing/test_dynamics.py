from functools import reduce

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.stats import unitary_group

from conftest import random_observable, sigma
from model.dynamics import (
    PAULI,
    HeisenbergEvolution,
    LocalObservable,
    ProductState,
    SupportError,
    commutator_norm,
    decoupled_drift,
    dynamic_correlation,
    embed,
    expectation,
    haar_average_sample,
    haar_conditional_expectation,
    heisenberg_evolve,
    identity,
    observable_from_config,
    operator_norm,
    partial_trace,
    product_state_from_config,
)
from model.interaction import build_hamiltonian, decouple, tfim
from model.lattice import build_lattice

SX, SY, SZ, EYE = PAULI['x'], PAULI['y'], PAULI['z'], PAULI['i']


def kron_chain(*factors):
    return reduce(np.kron, factors)


def dense_tfim(n, J=1.0, h=1.0):
    """Independent dense construction of the open-chain TFIM Hamiltonian."""
    def site_op(op, k):
        return kron_chain(*[op if j == k else EYE for j in range(n)])
    matrix = sum(J * site_op(SZ, k) @ site_op(SZ, k + 1) for k in range(n - 1))
    return matrix + sum(h * site_op(SX, k) for k in range(n))


def dense_evolve(h, a, t):
    u = expm(-1j * t * h)
    return u.conj().T @ a @ u


""" Embedding and norms """

def test_embed_sigma_z_at_first_site():
    embedded = embed(sigma(0, 'z'), (0, 1))
    np.testing.assert_array_equal(embedded.matrix, np.diag([1, 1, -1, -1]).astype(complex))


def test_embed_second_site_and_identity():
    embedded = embed(sigma(1, 'x'), (0, 1, 2))
    np.testing.assert_array_equal(embedded.matrix, kron_chain(EYE, SX, EYE))
    np.testing.assert_array_equal(embed(identity((0,)), (0, 1, 2)).matrix, np.eye(8))


def test_embed_into_own_support_is_unchanged():
    obs = sigma(3, 'y')
    assert embed(obs, (3,)) is obs


def test_embed_rejects_foreign_support():
    with pytest.raises(SupportError):
        embed(sigma(4, 'z'), (0, 1))


def test_unsorted_support_is_reordered():
    obs = LocalObservable((1, 0), np.kron(SX, SZ))
    assert obs.support == (0, 1)
    np.testing.assert_array_equal(obs.matrix, np.kron(SZ, SX))


def test_operator_norm_examples():
    assert operator_norm(LocalObservable((0,), np.zeros((2, 2)))) == 0.0
    for label in 'xyz':
        assert operator_norm(sigma(0, label)) == pytest.approx(1.0)
    assert operator_norm(LocalObservable((0, 1), 2 * np.kron(SZ, SX))) == pytest.approx(2.0)


""" Evolution """

def test_evolve_at_zero_is_identity_map():
    h = LocalObservable((0,), SZ)
    obs = sigma(0, 'x')
    np.testing.assert_array_equal(heisenberg_evolve(obs, h, 0.0).matrix, SX)


def test_rotation_about_z():
    h = LocalObservable((0,), SZ)
    evolved = heisenberg_evolve(sigma(0, 'x'), h, np.pi / 4)
    np.testing.assert_allclose(evolved.matrix, -SY, atol=1e-12)
    for t in np.linspace(-1, 1, 7):
        evolved = heisenberg_evolve(sigma(0, 'x'), h, t)
        np.testing.assert_allclose(evolved.matrix, np.cos(2 * t) * SX - np.sin(2 * t) * SY, atol=1e-12)


def test_conserved_observable_is_unchanged():
    h = LocalObservable((0,), SZ)
    for t in (0.3, 1.7, -2.2):
        np.testing.assert_allclose(heisenberg_evolve(sigma(0, 'z'), h, t).matrix, SZ, atol=1e-12)


def test_non_hermitian_hamiltonian_is_rejected():
    with pytest.raises(ValueError, match="not Hermitian"):
        HeisenbergEvolution(LocalObservable((0,), SX + 1j * EYE))


def test_commutator_norm_disjoint_at_zero(tfim8, chain8):
    h = build_hamiltonian(tfim8, chain8.vertices)
    assert commutator_norm(sigma(0, 'z'), sigma(7, 'z'), h, 0.0) == 0.0


def test_commutator_norm_uncoupled_qubits():
    h = LocalObservable((0, 1), np.kron(SX, EYE) + np.kron(EYE, SX))
    evolution = HeisenbergEvolution(h)
    for t in np.linspace(0, 3, 7):
        assert commutator_norm(sigma(0, 'z'), sigma(1, 'z'), h, t, evolution) < 1e-12


def test_commutator_norm_matches_dense_oracle():
    lattice = build_lattice('path', [4])
    h = build_hamiltonian(tfim(lattice), lattice.vertices)
    dense = dense_tfim(4)
    np.testing.assert_allclose(h.matrix, dense, atol=1e-14)
    a = kron_chain(SZ, EYE, EYE, EYE)
    b = kron_chain(EYE, EYE, EYE, SZ)
    evolved = dense_evolve(dense, a, 1.0)
    expected = np.linalg.norm(evolved @ b - b @ evolved, 2)
    assert commutator_norm(sigma(0, 'z'), sigma(3, 'z'), h, 1.0) == pytest.approx(expected, abs=1e-10)


def test_algebraic_identities(rng):
    lattice = build_lattice('path', [6])
    volume = lattice.vertices
    evolution = HeisenbergEvolution(build_hamiltonian(tfim(lattice, J=1.0, h=0.7), volume))
    for _ in range(20):
        width = int(rng.integers(1, 3))
        start = int(rng.integers(0, 6 - width + 1))
        a = random_observable(rng, tuple(range(start, start + width)), hermitian=False)
        b = random_observable(rng, (int(rng.integers(0, 6)),), hermitian=False)
        t, s = rng.uniform(-2, 2, size=2)
        evolved_a = evolution.evolve(a, t)
        assert operator_norm(evolved_a) == pytest.approx(operator_norm(a), abs=1e-10)
        ab = embed(a, volume) @ embed(b, volume)
        np.testing.assert_allclose(evolution.evolve(ab, t).matrix,
                                   (evolved_a @ evolution.evolve(b, t)).matrix, atol=1e-10)
        np.testing.assert_allclose(evolution.evolve(evolution.evolve(a, s), t).matrix,
                                   evolution.evolve(a, s + t).matrix, atol=1e-10)


""" Partial traces and Haar averages """

def test_partial_trace_of_product():
    obs = LocalObservable((0, 1), np.kron(SZ + EYE, SX + 2 * EYE))
    reduced = partial_trace(obs, (1,))
    np.testing.assert_allclose(reduced.matrix, 2 * (SX + 2 * EYE))


def test_twirl_fixes_local_observables():
    obs = sigma(0, 'x')
    averaged = haar_conditional_expectation(obs, (0,), (0, 1))
    np.testing.assert_allclose(averaged.matrix, embed(obs, (0, 1)).matrix, atol=1e-14)
    assert averaged.footprint == (0,)


def test_twirl_kills_traceless_complement():
    obs = LocalObservable((0, 1), np.kron(SZ, SZ))
    averaged = haar_conditional_expectation(obs, (0,), (0, 1))
    np.testing.assert_allclose(averaged.matrix, np.zeros((4, 4)), atol=1e-14)


def test_twirl_over_empty_complement_is_identity_map():
    obs = LocalObservable((0, 1), np.kron(SZ, SX))
    np.testing.assert_array_equal(haar_conditional_expectation(obs, (0, 1), (0, 1)).matrix, obs.matrix)


def test_twirl_matches_monte_carlo(rng):
    for seed in range(10):
        obs = random_observable(rng, (0, 1), hermitian=False)
        exact = haar_conditional_expectation(obs, (0,), (0, 1))
        sampled = haar_average_sample(obs, (0,), (0, 1), samples=200, seed=seed)
        assert operator_norm(exact - sampled) <= 0.1


def test_twirl_is_a_projection(rng):
    volume = (0, 1, 2)
    obs = random_observable(rng, volume, hermitian=False)
    averaged = haar_conditional_expectation(obs, (1,), volume)
    twice = haar_conditional_expectation(averaged, (1,), volume)
    np.testing.assert_allclose(twice.matrix, averaged.matrix, atol=1e-10)
    for k in range(50):
        u = unitary_group.rvs(4, random_state=k)
        # unitary on the complement {0, 2}
        full = embed(LocalObservable((0, 2), u), volume)
        np.testing.assert_allclose(full.matrix @ averaged.matrix, averaged.matrix @ full.matrix, atol=1e-10)


""" Product states and correlations """

def test_product_state_validation():
    with pytest.raises(ValueError, match="trace"):
        ProductState({0: 2 * np.eye(2)})
    with pytest.raises(ValueError, match="positive semidefinite"):
        ProductState({0: np.diag([1.5, -0.5])})
    state = ProductState.uniform(range(3), 'maximally_mixed')
    assert expectation(LocalObservable((0, 2), np.kron(SZ, SZ)), state) == pytest.approx(0.0)


def test_config_helpers():
    obs = observable_from_config({'site': [1, 2], 'pauli': 'Z'})
    assert obs.support == ((1, 2),)
    custom = observable_from_config({'support': [0], 'matrix': [0, 1, 1, 0]})
    np.testing.assert_array_equal(custom.matrix, SX)
    state = product_state_from_config({'default': 'up', 'sites': [{'site': 1, 'state': 'down'}]}, [0, 1])
    assert expectation(LocalObservable((0, 1), np.kron(SZ, SZ)), state) == pytest.approx(-1.0)


def test_correlation_at_zero_vanishes(tfim8, chain8):
    h = build_hamiltonian(tfim8, chain8.vertices)
    omega = ProductState.uniform(chain8.vertices, 'up')
    value, modulus = dynamic_correlation(sigma(0, 'x'), sigma(7, 'x'), h, omega, 0.0)
    assert modulus < 1e-12


def test_correlation_uncoupled_blocks():
    lattice = build_lattice('path', [4])
    phi = tfim(lattice)
    split = decouple(phi, lattice, {0}, {3})
    h1 = build_hamiltonian(split.phi1, lattice.vertices)
    omega = ProductState.uniform(lattice.vertices, 'up')
    evolution = HeisenbergEvolution(h1)
    for t in np.linspace(0, 3, 7):
        assert dynamic_correlation(sigma(0, 'z'), sigma(3, 'z'), h1, omega, t, evolution)[1] < 1e-10


def test_correlation_matches_dense_oracle():
    lattice = build_lattice('path', [6])
    h = build_hamiltonian(tfim(lattice), lattice.vertices)
    dense = dense_tfim(6)
    rho = kron_chain(*[np.diag([1.0, 0.0])] * 6)
    a = kron_chain(SZ, *[EYE] * 5)
    b = kron_chain(*[EYE] * 5, SZ)
    ea, eb = dense_evolve(dense, a, 1.0), dense_evolve(dense, b, 1.0)
    expected = np.trace(rho @ ea @ eb) - np.trace(rho @ ea) * np.trace(rho @ eb)
    omega = ProductState.uniform(lattice.vertices, 'up')
    value, modulus = dynamic_correlation(sigma(0, 'z'), sigma(5, 'z'), h, omega, 1.0)
    assert modulus == pytest.approx(abs(expected), abs=1e-10)
    assert value == pytest.approx(expected.real, abs=1e-10)


def test_overlapping_supports_are_rejected(tfim8, chain8):
    h = build_hamiltonian(tfim8, chain8.vertices)
    omega = ProductState.uniform(chain8.vertices)
    with pytest.raises(SupportError):
        dynamic_correlation(sigma(2, 'z'), sigma(2, 'x'), h, omega, 1.0)


def test_decoupled_dynamics_factorize(tfim8, chain8):
    split = decouple(tfim8, chain8, {0}, {7})
    h1 = build_hamiltonian(split.phi1, chain8.vertices)
    evolution = HeisenbergEvolution(h1)
    omega = ProductState.uniform(chain8.vertices, 'up')
    for t in np.linspace(0.3, 3, 10):
        assert dynamic_correlation(sigma(0, 'z'), sigma(7, 'z'), h1, omega, t, evolution)[1] <= 1e-10


def test_dropping_terms_is_bounded_by_crossing_commutators():
    lattice = build_lattice('path', [6])
    phi = tfim(lattice)
    split = decouple(phi, lattice, {0}, {5})
    volume = lattice.vertices
    full = HeisenbergEvolution(build_hamiltonian(phi, volume))
    decoupled = HeisenbergEvolution(build_hamiltonian(split.phi1, volume))
    h2 = build_hamiltonian(split.phi2, volume)
    for t in (0.5, 1.5, -1.0):
        drift, integral = decoupled_drift(sigma(0, 'z'), full, decoupled, h2, t)
        assert drift <= integral + 1e-10
    assert decoupled_drift(sigma(0, 'z'), full, decoupled, h2, 0.0) == (0.0, 0.0)
