import numpy as np
import pytest

from numerics.time_grid import TimeGrid


def test_nodes_and_kronecker_property():
    grid = TimeGrid(2.0, 8)
    assert grid.size == 9
    assert grid.dt == pytest.approx(0.25)
    np.testing.assert_allclose(grid.nodes, np.linspace(0.0, 2.0, 9))
    values = np.array([[grid.hat(k, t) for t in grid.nodes] for k in range(grid.size)])
    np.testing.assert_allclose(values, np.eye(grid.size), atol=1e-15)


def test_partition_of_unity():
    grid = TimeGrid(3.0, 7)
    t = np.linspace(0.0, 3.0, 101)
    total = sum(grid.hat(k, t) for k in range(grid.size))
    np.testing.assert_allclose(total, 1.0, atol=1e-14)


def test_mass_values():
    grid = TimeGrid(5.0, 200)
    dt = grid.dt
    assert grid.mass(3, 3) == pytest.approx(2 * dt / 3)
    assert grid.mass(3, 4) == pytest.approx(dt / 6)
    assert grid.mass(0, 0) == pytest.approx(dt / 3)
    assert grid.mass(200, 200) == pytest.approx(dt / 3)
    assert grid.mass(3, 5) == 0.0


def test_mass_row_sums():
    grid = TimeGrid(1.0, 10)
    rows = grid.dense('mass').sum(axis=1)
    assert rows[0] == pytest.approx(grid.dt / 2)
    assert rows[-1] == pytest.approx(grid.dt / 2)
    np.testing.assert_allclose(rows[1:-1], grid.dt)


def test_stiffness_values_and_kernel():
    grid = TimeGrid(1.0, 10)
    dt = grid.dt
    assert grid.stiffness(4, 4) == pytest.approx(2 / dt)
    assert grid.stiffness(4, 5) == pytest.approx(-1 / dt)
    assert grid.stiffness(0, 0) == pytest.approx(1 / dt)
    assert grid.stiffness(2, 6) == 0.0
    K = grid.dense('stiffness')
    np.testing.assert_allclose(K, K.T)
    np.testing.assert_allclose(K @ np.ones(grid.size), 0.0, atol=1e-12)
    eig = np.linalg.eigvalsh(K)
    assert eig[0] > -1e-10
    assert eig[1] > 1e-6


def test_cross_values():
    grid = TimeGrid(1.0, 10)
    assert grid.cross(4, 4) == 0.0
    assert grid.cross(0, 0) == pytest.approx(-0.5)
    assert grid.cross(10, 10) == pytest.approx(0.5)
    assert grid.cross(4, 5) == pytest.approx(-0.5)
    assert grid.cross(5, 4) == pytest.approx(0.5)
    C = grid.dense('cross')
    # C + Cᵀ 只剩邊界項
    boundary = np.zeros_like(C)
    boundary[0, 0], boundary[-1, -1] = -1.0, 1.0
    np.testing.assert_allclose(C + C.T, boundary, atol=1e-15)


def test_tables_match_quadrature():
    grid = TimeGrid(1.7, 6)
    xg, wg = np.polynomial.legendre.leggauss(5)
    for k in range(grid.size):
        for l in range(grid.size):
            mass = stiff = cross = 0.0
            for j in range(grid.N):
                a, b = j * grid.dt, (j + 1) * grid.dt
                t = 0.5 * (b - a) * xg + 0.5 * (a + b)
                w = 0.5 * (b - a) * wg
                mid = np.full_like(t, 0.5 * (a + b))
                dk, dl = grid.hat_derivative(k, mid), grid.hat_derivative(l, mid)
                mass += np.sum(w * grid.hat(k, t) * grid.hat(l, t))
                stiff += np.sum(w * dk * dl)
                cross += np.sum(w * dk * grid.hat(l, t))
            assert mass == pytest.approx(grid.mass(k, l), abs=1e-13)
            assert stiff == pytest.approx(grid.stiffness(k, l), abs=1e-12)
            assert cross == pytest.approx(grid.cross(k, l), abs=1e-13)


def test_apply_matches_dense(rng):
    grid = TimeGrid(2.0, 5)
    X = rng.normal(size=(grid.size, 3, 2)) + 1j * rng.normal(size=(grid.size, 3, 2))
    for name in ('mass', 'stiffness', 'cross'):
        D = grid.dense(name)
        np.testing.assert_allclose(grid.apply(name, X), np.einsum('kl,lij->kij', D, X), atol=1e-13)
        np.testing.assert_allclose(grid.apply(name, X, transpose=True), np.einsum('lk,lij->kij', D, X), atol=1e-13)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        TimeGrid(0.0, 10)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 1)
    grid = TimeGrid(1.0, 4)
    with pytest.raises(IndexError):
        grid.mass(0, 5)
    with pytest.raises(IndexError):
        grid.hat(-1, 0.0)
    with pytest.raises(ValueError):
        grid.apply('mass', np.zeros(3))
