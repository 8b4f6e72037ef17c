import numpy as np
import pytest

from models.matrix_model import MatrixExperiment, TwoSidedHamiltonian, pathological_experiment, random_experiment
from references.matrix_reference import (ReferenceConfig, best_rank_error, node_errors, rk4_reference,
                                         singular_value_curves)


def test_pathological_matches_closed_form():
    experiment = pathological_experiment(1)
    reference = rk4_reference(experiment, steps=2000)
    exact = np.stack([experiment.exact_solution(t) for t in reference.times])
    assert np.max(np.linalg.norm(reference.values - exact, axis=(1, 2))) < 1e-8
    assert reference.certificate['passed']
    assert reference.certificate['half_steps'] == 1000


def test_rk4_is_fourth_order():
    experiment = pathological_experiment(1)
    config = ReferenceConfig(check_self_convergence=False)
    exact = None
    errors = []
    for steps in (200, 400, 800):
        reference = rk4_reference(experiment, steps=steps, config=config)
        if exact is None:
            exact = np.stack([experiment.exact_solution(t) for t in reference.times])
        errors.append(np.max(np.linalg.norm(reference.values - exact, axis=(1, 2))))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(orders >= 3.7), (errors, orders)


def test_zero_hamiltonian_is_constant(rng):
    U0 = rng.normal(size=(3, 3))
    experiment = MatrixExperiment('zero', TwoSidedHamiltonian.zero(3, 3), U0, 1.0, 5, ranks=[1])
    reference = rk4_reference(experiment)
    for U in reference.values:
        np.testing.assert_allclose(U, U0)


def test_norm_is_conserved():
    experiment = random_experiment(4, T=1.0, N=20, L=10)
    reference = rk4_reference(experiment)
    norms = np.linalg.norm(reference.values, axis=(1, 2))
    np.testing.assert_allclose(norms, np.linalg.norm(experiment.U0), rtol=1e-7)


def test_odd_steps_skip_self_convergence():
    experiment = random_experiment(4, T=1.0, N=4, L=4)
    reference = rk4_reference(experiment, config=ReferenceConfig(steps_per_interval=3))
    assert reference.certificate['half_steps'] is None
    assert reference.certificate['passed'] is False
    with pytest.raises(ValueError):
        rk4_reference(experiment, steps=6)


def test_best_rank_error():
    experiment = pathological_experiment(1, N=10)
    reference = rk4_reference(experiment)
    np.testing.assert_allclose(best_rank_error(reference, 20).errors, 0.0, atol=1e-12)
    for r in (1, 3, 5):
        expected = np.sqrt(np.sum(np.exp(-2.0 * np.arange(r, 20))))
        assert best_rank_error(reference, r).errors[0] == pytest.approx(expected, rel=1e-12)
    curves = np.array([best_rank_error(reference, r).errors for r in range(1, 21)])
    assert np.all(np.diff(curves, axis=0) <= 1e-14)
    with pytest.raises(ValueError):
        best_rank_error(reference, 21)


def test_singular_value_curves():
    random = rk4_reference(random_experiment(0, T=0.5, N=5, L=8))
    values = singular_value_curves(random, 3)
    assert values.shape == (6, 3)
    assert values[0, 0] > 0 and np.all(values[0, 1:] < 1e-12)
    assert np.all(np.diff(values, axis=1) <= 0)

    experiment = pathological_experiment(1, T=np.pi / 2, N=100)
    reference = rk4_reference(experiment)
    curves = singular_value_curves(reference, 20)
    np.testing.assert_allclose(curves[0], np.exp(-np.arange(20.0)), rtol=1e-12)
    np.testing.assert_allclose(np.sort(curves[-1]), np.sort(curves[0]), atol=1e-9)


def test_node_errors():
    experiment = pathological_experiment(1, N=10)
    reference = rk4_reference(experiment)
    curve = node_errors(reference, reference.values)
    assert curve.sup == 0.0
    with pytest.raises(ValueError):
        node_errors(reference, reference.values[:-1])
