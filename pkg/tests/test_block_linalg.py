import numpy as np
import pytest

from numerics.block_linalg import (BlockTridiagonal, ConvergenceError, IndefiniteMatrixError, KroneckerPreconditioner,
                                   block_cholesky, pcg, truncated_svd)


def random_pd_blocks(rng, n_blocks, size, complex_=True):
    """對角占優的隨機 Hermitian 正定區塊三對角矩陣"""
    def block():
        M = rng.normal(size=(size, size))
        if complex_:
            M = M + 1j * rng.normal(size=(size, size))
        return M

    diag = []
    for _ in range(n_blocks):
        M = block()
        diag.append(M @ M.conj().T + 4.0 * size * np.eye(size))
    offdiag = [block() for _ in range(n_blocks - 1)]
    return BlockTridiagonal(np.array(diag), np.array(offdiag))


def test_discrete_laplacian_solve():
    n = 12
    M = BlockTridiagonal(np.full((n, 1, 1), 2.0), np.full((n - 1, 1, 1), -1.0))
    b = np.zeros((n, 1))
    b[0, 0] = 1.0
    x = block_cholesky(M).solve(b)
    np.testing.assert_allclose(x[:, 0], np.linalg.solve(M.to_dense(), b[:, 0]), rtol=1e-12)


def test_identity_solve(rng):
    M = BlockTridiagonal(np.tile(np.eye(3), (4, 1, 1)), np.zeros((3, 3, 3)))
    b = rng.normal(size=(4, 3))
    np.testing.assert_allclose(block_cholesky(M).solve(b), b)


def test_random_system_matches_dense(rng):
    M = random_pd_blocks(rng, 10, 6)
    b = rng.normal(size=(10, 6)) + 1j * rng.normal(size=(10, 6))
    x = block_cholesky(M).solve(b)
    expected = np.linalg.solve(M.to_dense(), b.reshape(-1)).reshape(10, 6)
    np.testing.assert_allclose(x, expected, rtol=1e-12, atol=1e-12)


def test_factorization_reconstructs_matrix(rng):
    M = random_pd_blocks(rng, 50, 8)
    L = block_cholesky(M).lower_dense()
    dense = M.to_dense()
    assert np.linalg.norm(L @ L.conj().T - dense) / np.linalg.norm(dense) < 1e-12


def test_matvec_matches_dense(rng):
    M = random_pd_blocks(rng, 5, 3)
    x = rng.normal(size=(5, 3)) + 1j * rng.normal(size=(5, 3))
    np.testing.assert_allclose(M.matvec(x).reshape(-1), M.to_dense() @ x.reshape(-1), atol=1e-12)
    assert M.trace() == pytest.approx(np.real(np.trace(M.to_dense())))


def test_indefinite_pivot_is_reported():
    diag = np.array([np.eye(2), -np.eye(2)])
    M = BlockTridiagonal(diag, np.zeros((1, 2, 2)))
    with pytest.raises(IndefiniteMatrixError) as info:
        block_cholesky(M)
    assert info.value.block_index == 1


def test_shape_validation():
    with pytest.raises(ValueError):
        BlockTridiagonal(np.zeros((3, 2, 2)), np.zeros((3, 2, 2)))


def test_pcg_identity_converges_in_one_iteration(rng):
    b = rng.normal(size=7)
    x, its = pcg(lambda v: v, b, tol=1e-12)
    np.testing.assert_allclose(x, b)
    assert its == 1


def test_pcg_jacobi_preconditioner():
    d = np.arange(1.0, 101.0)
    b = np.ones(100)
    x, its = pcg(lambda v: d * v, b, precond=lambda r: r / d, tol=1e-10)
    np.testing.assert_allclose(x, 1.0 / d, rtol=1e-10)
    assert its <= 3


def test_pcg_exact_preconditioner_one_iteration(rng):
    M = random_pd_blocks(rng, 4, 3)
    factor = block_cholesky(M)
    b = rng.normal(size=(4, 3)) + 1j * rng.normal(size=(4, 3))
    x, its = pcg(M.matvec, b, precond=factor.solve, tol=1e-10)
    assert its == 1
    np.testing.assert_allclose(x, factor.solve(b), atol=1e-10)


def test_pcg_zero_rhs_and_failures():
    x, its = pcg(lambda v: v, np.zeros(3))
    assert its == 0 and not np.any(x)
    with pytest.raises(ConvergenceError):
        pcg(lambda v: -v, np.ones(3))
    d = np.logspace(0, 8, 200)
    with pytest.raises(ConvergenceError) as info:
        pcg(lambda v: d * v, np.ones(200), tol=1e-14, max_iter=2)
    assert info.value.iterations == 2


def test_truncated_svd_tail_sum():
    M = np.diag(np.exp(-np.arange(20.0)))
    U, S, V = truncated_svd(M, 1)
    error = np.linalg.norm(M - U @ np.diag(S) @ V.conj().T)
    assert error == pytest.approx(np.sqrt(np.sum(np.exp(-2.0 * np.arange(1, 20)))), rel=1e-12)
    assert error == pytest.approx(0.395625, abs=1e-5)


def test_truncated_svd_exact_cases(rng):
    x, y = rng.normal(size=6), rng.normal(size=5)
    U, S, V = truncated_svd(np.outer(x, y), 1)
    np.testing.assert_allclose(U @ np.diag(S) @ V.conj().T, np.outer(x, y), atol=1e-12)
    M = rng.normal(size=(6, 5)) + 1j * rng.normal(size=(6, 5))
    U, S, V = truncated_svd(M, 5)
    np.testing.assert_allclose(U @ np.diag(S) @ V.conj().T, M, atol=1e-12)
    assert np.all(np.diff(S) <= 0) and np.all(S >= 0)


def test_truncated_svd_error_property():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        M = rng.normal(size=(8, 6))
        r = int(rng.integers(1, 6))
        U, S, V = truncated_svd(M, r)
        full = np.linalg.svd(M, compute_uv=False)
        error = np.linalg.norm(M - U @ np.diag(S) @ V.conj().T)
        assert error == pytest.approx(np.sqrt(np.sum(full[r:] ** 2)), rel=1e-10, abs=1e-12)


def test_truncated_svd_rank_out_of_range(rng):
    with pytest.raises(ValueError):
        truncated_svd(rng.normal(size=(3, 4)), 4)
    with pytest.raises(ValueError):
        truncated_svd(rng.normal(size=(3, 4)), 0)


def test_kronecker_preconditioner_matches_dense(rng):
    factor = random_pd_blocks(rng, 4, 2)
    P = KroneckerPreconditioner(factor, 3)
    v = rng.normal(size=24) + 1j * rng.normal(size=24)
    dense = P.to_dense()
    np.testing.assert_allclose(P.multiply(v), dense @ v, atol=1e-12)
    np.testing.assert_allclose(P.apply(v), np.linalg.solve(dense, v), atol=1e-12)
