import numpy as np
import pytest

from handlers.config_handler import parse_config
from models.gaussian_algebra import parameters_to_batch
from models.wavepacket_model import (WavepacketExperiment, double_hump_experiment, gaussian_potential,
                                     initial_parameters, scattering_3d_experiment)


def test_initial_parameters_one_dimension():
    np.testing.assert_array_equal(initial_parameters([6.0], [-1.0]), [1.0, 0.0, 1.0, 0.0, 6.0, -1.0])


def test_initial_parameters_evaluate_to_initial_condition():
    X = initial_parameters([3.0, 3.0, 0.0], [-0.5, -0.5, 0.0])
    points = np.random.default_rng(2).uniform(-1.0, 5.0, size=(10, 3))
    expected = np.exp(-0.5 * np.sum((points - [3.0, 3.0, 0.0]) ** 2, axis=1)) * np.exp(
        1j * points @ np.array([-0.5, -0.5, 0.0]))
    np.testing.assert_allclose(parameters_to_batch(X[None], 3).evaluate(points)[0], expected, rtol=1e-12)


def test_double_hump_potential_values():
    experiment = double_hump_experiment()
    x = np.linspace(-5.0, 5.0, 11)
    expected = 1.5 * np.exp(-0.5 * (x + 2) ** 2) + np.exp(-0.5 * (x - 2) ** 2)
    total = sum(term.value(x) for term in experiment.potential)
    np.testing.assert_allclose(total, expected, rtol=1e-13)
    assert experiment.dim == 1


def test_scattering_3d_defaults():
    experiment = scattering_3d_experiment()
    assert experiment.dim == 3
    assert np.linalg.norm(experiment.p) == pytest.approx(1.0)
    assert len(experiment.potential) == 1
    assert 'q2' in experiment.layout


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        initial_parameters([0.0, 1.0], [0.0])
    with pytest.raises(ValueError):
        WavepacketExperiment('greedy-1d', [0.0], [0.0], [1.0], [[0.0, 0.0]], 1.0, 10)


def test_potential_terms_are_real_gaussians():
    (term,) = gaussian_potential([2.0], [[1.0]])
    assert term.value(np.array([1.0]))[0] == pytest.approx(2.0)


def test_to_config_is_accepted_by_parser():
    experiment = double_hump_experiment(q=5.0, p=-0.5, T=2.0, N=20)
    raw = experiment.to_config()
    raw['GREEDY_REPORT_TERMS'] = '5'
    raw['GREEDY_DENSITY_TIMES'] = '0,1'
    config = parse_config(raw)
    assert config.problem['Q'] == (5.0,)
    assert config.problem['POTENTIAL_CENTERS'] == ((-2.0,), (2.0,))
    assert config.problem['POTENTIAL_HEIGHTS'] == (1.5, 1.0)
