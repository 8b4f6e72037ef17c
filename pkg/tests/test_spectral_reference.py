import numpy as np
import pytest
from scipy.fft import dstn, idstn

from models.gaussian_algebra import GaussianTerm, free_evolve
from models.wavepacket_model import double_hump_experiment
from references.spectral_reference import (SineGrid, SpectralConfig, SpectralPropagator, coefficient_distance,
                                           evaluate_series, l2_error, project, read_snapshot, strang_step, tail_mass,
                                           write_snapshot)

CENTERED = GaussianTerm(1.0, [0.0], [0.0], [[1.0]], [[0.0]])


def test_grid_geometry():
    grid = SineGrid(2, 10.0, 8)
    assert grid.shape == (8, 8)
    assert grid.points().shape == (64, 2)
    assert grid.dx == pytest.approx(20.0 / 9)
    assert grid.axis[0] == pytest.approx(-10.0 + 20.0 / 9)
    assert grid.eigenvalues()[0, 1] == pytest.approx((np.pi / 20.0) ** 2 + (2 * np.pi / 20.0) ** 2)
    with pytest.raises(ValueError):
        SineGrid(1, 10.0, 1)


def test_project_and_reconstruct():
    grid = SineGrid(1, 30.0, 256)
    coeffs = project(CENTERED, grid)
    np.testing.assert_allclose(grid.to_samples(coeffs), CENTERED.value(grid.axis), atol=1e-8)
    x = np.random.default_rng(0).uniform(-5.0, 5.0, 15)
    np.testing.assert_allclose(evaluate_series(coeffs, grid, x), CENTERED.value(x), atol=1e-8)
    assert np.sum(np.abs(coeffs) ** 2) == pytest.approx(np.sqrt(np.pi), rel=1e-10)
    assert l2_error(coeffs, CENTERED, grid) < 1e-6


def test_projection_error_shrinks_with_modes():
    coarse, fine = SineGrid(1, 30.0, 32), SineGrid(1, 30.0, 64)
    err_coarse = l2_error(project(CENTERED, coarse), CENTERED, coarse)
    err_fine = l2_error(project(CENTERED, fine), CENTERED, fine)
    assert err_coarse > err_fine


def test_free_propagation_is_unitary():
    grid = SineGrid(1, 30.0, 64)
    u = GaussianTerm(1.0, [2.0], [1.0], [[1.0]], [[0.0]])
    propagator = SpectralPropagator(grid, [], 0.01)
    c0 = project(u, grid)
    c = propagator.run(c0, 1.0, 10, 100)
    assert np.sum(np.abs(c) ** 2) == pytest.approx(np.sum(np.abs(c0) ** 2), rel=1e-13)


@pytest.mark.parametrize('t', [0.5, 2.0])
def test_free_propagation_matches_closed_form(t):
    grid = SineGrid(1, 30.0, 512)
    u = GaussianTerm(1.0, [0.5], [-0.8], [[1.0]], [[0.0]])
    c = SpectralPropagator(grid, [], t / 10).run(project(u, grid), t, 1, 10)
    assert l2_error(c, free_evolve(u, t), grid) < 1e-6


def test_strang_step_second_order():
    experiment = double_hump_experiment(q=3.0, p=-1.0, T=1.0, N=1)
    grid = SineGrid(1, 30.0, 256)
    c0 = project(GaussianTerm(1.0, [3.0], [-1.0], [[1.0]], [[0.0]]), grid)
    finals = {steps: SpectralPropagator(grid, experiment.potential, 1.0 / steps).run(c0, 1.0, 1, steps)
              for steps in (20, 40, 80)}
    ratio = np.linalg.norm(finals[20] - finals[40]) / np.linalg.norm(finals[40] - finals[80])
    assert np.log2(ratio) > 1.8
    np.testing.assert_allclose(strang_step(c0, experiment.potential, grid, 0.05),
                               SpectralPropagator(grid, experiment.potential, 0.05).step(c0))


def test_strang_step_is_kinetic_potential_kinetic():
    # 半步動能、整步位能相位、半步動能
    experiment = double_hump_experiment(q=3.0, p=-1.0, T=1.0, N=1)
    grid = SineGrid(1, 30.0, 128)
    h = 0.05
    c0 = project(GaussianTerm(1.0, [3.0], [-1.0], [[1.0]], [[0.0]]), grid)
    half_free = SpectralPropagator(grid, [], h / 2)
    propagator = SpectralPropagator(grid, experiment.potential, h)
    c = half_free.step(c0)
    c = dstn(propagator.potential_phase * idstn(c, type=1, norm='ortho'), type=1, norm='ortho')
    np.testing.assert_allclose(propagator.step(c0), half_free.step(c), atol=1e-12)


def test_run_calls_back_on_nodes():
    grid = SineGrid(1, 10.0, 16)
    seen = []
    SpectralPropagator(grid, [], 0.1).run(project(CENTERED, grid), 1.0, 5, 10,
                                          callback=lambda k, t, c: seen.append((k, t)))
    assert [k for k, _ in seen] == [0, 1, 2, 3, 4, 5]
    assert seen[-1][1] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        SpectralPropagator(grid, [], 0.1).run(project(CENTERED, grid), 1.0, 3, 10)


def test_tail_mass():
    assert tail_mass(CENTERED, 30.0) < 1e-100
    edge = GaussianTerm(1.0, [29.0], [0.0], [[1.0]], [[0.0]])
    assert tail_mass(edge, 30.0) > 1e-3


def test_coefficient_distance():
    rng = np.random.default_rng(3)
    coarse = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    fine = np.zeros((16, 16), dtype=complex)
    fine[:8, :8] = coarse
    assert coefficient_distance(coarse, fine) == pytest.approx(0.0, abs=1e-6)
    fine[10, 3] = 2.0
    assert coefficient_distance(coarse, fine) == pytest.approx(2.0)
    assert coefficient_distance(fine, coarse) == pytest.approx(2.0)


def test_snapshot_file(tmp_path):
    grid = SineGrid(2, 30.0, 4)
    coeffs = np.arange(16).reshape(4, 4) * (1.0 - 0.5j)
    path = tmp_path / 'snapshot.bin'
    write_snapshot(path, coeffs, grid, 0.005, 1.25)
    meta, loaded = read_snapshot(path)
    np.testing.assert_array_equal(loaded, coeffs)
    assert meta['dims'] == '2' and meta['modes'] == '4' and float(meta['t']) == 1.25
    assert path.read_bytes().split(b'\n', 1)[0].startswith(b'dims=2 R=30.0')


def test_config_validation():
    assert SpectralConfig(modes=[32.0]).modes == (32,)
    with pytest.raises(ValueError):
        SpectralConfig(steps=0)
    with pytest.raises(ValueError):
        SpectralConfig(half_width=-1.0)
    assert SpectralConfig(timing_modes=[80.0]).timing_modes == (80,)
    with pytest.raises(ValueError):
        SpectralConfig(timing_modes=(1,))
