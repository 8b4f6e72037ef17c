import numpy as np
import pytest

from handlers.config_handler import parse_config
from models.matrix_model import (HamiltonianTerm, TwoSidedHamiltonian, block_swap, cosine_switch, constant_one,
                                 pathological_experiment, random_experiment)


def frobenius(M, N):
    return np.vdot(M, N)


def test_random_experiment_is_deterministic():
    a, b = random_experiment(7), random_experiment(7)
    np.testing.assert_array_equal(a.U0, b.U0)
    np.testing.assert_array_equal(a.hamiltonian.h0x, b.hamiltonian.h0x)
    assert not np.array_equal(a.U0, random_experiment(8).U0)


def test_random_experiment_parameters():
    experiment = random_experiment(0)
    assert experiment.dims == (40, 40)
    assert (experiment.T, experiment.N) == (5.0, 200)
    assert np.linalg.matrix_rank(experiment.U0) == 1
    assert cosine_switch(0.0) == pytest.approx(1.0)
    assert cosine_switch(0.5) == pytest.approx(0.0, abs=1e-15)
    H1 = experiment.hamiltonian.terms[0].L
    np.testing.assert_array_equal(H1, H1.T)
    assert np.all(np.triu(H1, 2) == 0)
    assert np.all((H1 >= 0) & (H1 <= 1))
    np.testing.assert_allclose(experiment.hamiltonian.terms[1].chi(np.array([0.0, 0.5])), [0.0, 1.0], atol=1e-15)


def test_apply_is_self_adjoint(rng):
    H = random_experiment(3, L=12).hamiltonian
    for t in (0.0, 0.37, 2.9):
        M = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
        N = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
        lhs = frobenius(H.apply(t, M), N)
        rhs = frobenius(M, H.apply(t, N))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))
        energy = frobenius(H.apply(t, M), M)
        assert abs(energy.imag) <= 1e-12 * max(1.0, abs(energy))


def test_identity_hamiltonian_and_trivial_conjugation(rng):
    H = TwoSidedHamiltonian([HamiltonianTerm(constant_one, np.eye(4), np.eye(3))])
    M = rng.normal(size=(4, 3))
    np.testing.assert_allclose(H.apply(1.3, M), M)
    L = rng.normal(size=(4, 4))
    plain = TwoSidedHamiltonian([HamiltonianTerm(constant_one, L, np.eye(3))])
    zero_h0 = TwoSidedHamiltonian([HamiltonianTerm(constant_one, L, np.eye(3))], h0x=np.zeros(4), h0y=np.zeros(3))
    np.testing.assert_allclose(zero_h0.apply(0.8, M), plain.apply(0.8, M))


def test_apply_shape_mismatch():
    H = TwoSidedHamiltonian([HamiltonianTerm(constant_one, np.eye(4), np.eye(3))])
    with pytest.raises(ValueError):
        H.apply(0.0, np.zeros((3, 4)))


def test_node_operator_matches_apply(rng):
    H = random_experiment(1, L=6).hamiltonian
    times = np.linspace(0.0, 1.0, 5)
    Ms = rng.normal(size=(5, 6, 6)) + 1j * rng.normal(size=(5, 6, 6))
    batched = H.node_operator(times).apply(Ms)
    for k, t in enumerate(times):
        np.testing.assert_allclose(batched[k], H.apply(t, Ms[k]), atol=1e-13)


def test_pathological_full_rank_is_diagonal():
    experiment = pathological_experiment(20)
    np.testing.assert_array_equal(experiment.U0, np.diag(np.exp(-np.arange(20.0))))
    assert experiment.T == 2.0 and experiment.N == 200


def test_pathological_truncation_and_noise():
    clean = pathological_experiment(3)
    assert np.linalg.matrix_rank(clean.U0) == 3
    np.testing.assert_allclose(np.diag(clean.U0)[:3], np.exp(-np.arange(3.0)))
    noisy = pathological_experiment(3, noise=1e-4, seed=5)
    delta = noisy.U0 - clean.U0
    assert 0 < np.max(np.abs(delta)) < 1e-3
    np.testing.assert_array_equal(noisy.U0_reference, clean.U0_reference)


def test_pathological_closed_form_solves_equation():
    experiment = pathological_experiment(1)
    H = block_swap(20)
    np.testing.assert_allclose(H @ H, np.eye(20))
    U0 = experiment.U0_reference
    for t in np.linspace(0.0, 2.0, 7):
        U = experiment.exact_solution(t)
        dU = -np.sin(t) * U0 - 1j * np.cos(t) * (H @ U0 @ H)
        residual = 1j * dU - experiment.hamiltonian.apply(t, U)
        assert np.linalg.norm(residual) < 1e-12


def test_pathological_singular_values_permute_at_quarter_period():
    experiment = pathological_experiment(1)
    U = experiment.exact_solution(np.pi / 2)
    np.testing.assert_allclose(np.sort(np.linalg.svd(U, compute_uv=False)),
                               np.sort(np.exp(-np.arange(20.0))), rtol=1e-12)


def test_pathological_invalid_arguments():
    with pytest.raises(ValueError):
        pathological_experiment(0)
    with pytest.raises(ValueError):
        pathological_experiment(21)
    with pytest.raises(ValueError):
        pathological_experiment(2, noise=-1.0)
    with pytest.raises(ValueError):
        pathological_experiment(2, L=7)


def test_to_config_is_accepted_by_parser():
    experiment = pathological_experiment(4, noise=1e-8)
    config = parse_config(experiment.to_config())
    assert config.name == 'als-pathological'
    assert config.ranks == [4]
    assert config.noise_levels == [1e-8]
    assert config.problem['T'] == 2.0
