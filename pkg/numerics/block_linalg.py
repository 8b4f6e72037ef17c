"""
共用數值核心：區塊三對角分解、預條件共軛梯度法、截斷 SVD 與 Kronecker 預條件子
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

# 設定日誌
logger = logging.getLogger(__name__)


class IndefiniteMatrixError(np.linalg.LinAlgError):
    """區塊 Cholesky 分解時主元區塊非正定"""

    def __init__(self, block_index, message=None):
        self.block_index = block_index
        super().__init__(message or f"第 {block_index} 個主元區塊非正定")


class ConvergenceError(RuntimeError):
    """共軛梯度法未收斂或出現 NaN"""

    def __init__(self, iterations, residual, message=None):
        self.iterations = iterations
        self.residual = residual
        super().__init__(message or f"共軛梯度法未收斂: 迭代 {iterations} 次, 殘差 {residual:.3e}")


@dataclass
class BlockTridiagonal:
    """
    Hermitian 區塊三對角矩陣

    diag[k] 為第 k 個對角區塊，offdiag[k] 為 (k, k+1) 區塊；
    (k+1, k) 區塊為 offdiag[k] 的共軛轉置。
    """
    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        self.diag = np.asarray(self.diag)
        self.offdiag = np.asarray(self.offdiag)
        if self.diag.ndim != 3 or self.diag.shape[1] != self.diag.shape[2]:
            raise ValueError(f"對角區塊形狀錯誤: {self.diag.shape}")
        expected = (self.diag.shape[0] - 1,) + self.diag.shape[1:]
        if self.offdiag.shape != expected:
            raise ValueError(f"非對角區塊形狀應為 {expected}，實際為 {self.offdiag.shape}")

    @property
    def n_blocks(self):
        return self.diag.shape[0]

    @property
    def block_size(self):
        return self.diag.shape[1]

    @property
    def dim(self):
        return self.n_blocks * self.block_size

    def to_dense(self):
        """組裝成稠密矩陣"""
        n, b = self.n_blocks, self.block_size
        dense = np.zeros((n * b, n * b), dtype=np.result_type(self.diag, self.offdiag))
        for k in range(n):
            dense[k * b:(k + 1) * b, k * b:(k + 1) * b] = self.diag[k]
        for k in range(n - 1):
            dense[k * b:(k + 1) * b, (k + 1) * b:(k + 2) * b] = self.offdiag[k]
            dense[(k + 1) * b:(k + 2) * b, k * b:(k + 1) * b] = self.offdiag[k].conj().T
        return dense

    def matvec(self, x):
        """
        計算 M x

        Args:
            x: 形狀 (n_blocks, block_size) 或 (n_blocks, block_size, m) 的陣列

        Returns:
            ndarray: 與 x 同形狀的結果
        """
        x = np.asarray(x)
        squeeze = x.ndim == 2
        if squeeze:
            x = x[..., None]
        y = self.diag @ x
        y[:-1] += self.offdiag @ x[1:]
        y[1:] += self.offdiag.conj().transpose(0, 2, 1) @ x[:-1]
        return y[..., 0] if squeeze else y

    def trace(self):
        return float(np.real(np.trace(self.diag, axis1=1, axis2=2).sum()))

    def shifted(self, shift):
        """回傳對角加上 shift·I 的新矩陣 (shift 可為純量或每區塊一個值)"""
        shift = np.broadcast_to(np.asarray(shift, dtype=float), (self.n_blocks,))
        eye = np.eye(self.block_size)
        return BlockTridiagonal(self.diag + shift[:, None, None] * eye, self.offdiag.copy())


@dataclass
class BlockFactorization:
    """
    區塊 Cholesky 分解 M = L L^H

    chol[k] 為 L 的第 k 個對角區塊 (下三角)，coupling[k] = L_kk⁻¹ M_{k,k+1}，
    即 L 的 (k+1, k) 區塊的共軛轉置。
    """
    chol: np.ndarray
    coupling: np.ndarray

    @property
    def n_blocks(self):
        return self.chol.shape[0]

    @property
    def block_size(self):
        return self.chol.shape[1]

    def solve(self, b):
        """
        求解 M x = b

        Args:
            b: 形狀 (n_blocks, block_size) 或 (n_blocks, block_size, m) 的右端項

        Returns:
            ndarray: 解 x
        """
        b = np.asarray(b)
        squeeze = b.ndim == 2
        if squeeze:
            b = b[..., None]
        n = self.n_blocks
        dtype = np.result_type(self.chol, b)
        y = np.empty(b.shape, dtype=dtype)
        y[0] = la.solve_triangular(self.chol[0], b[0], lower=True)
        for k in range(n - 1):
            rhs = b[k + 1] - self.coupling[k].conj().T @ y[k]
            y[k + 1] = la.solve_triangular(self.chol[k + 1], rhs, lower=True)
        x = np.empty_like(y)
        x[-1] = la.solve_triangular(self.chol[-1], y[-1], lower=True, trans='C')
        for k in range(n - 2, -1, -1):
            rhs = y[k] - self.coupling[k] @ x[k + 1]
            x[k] = la.solve_triangular(self.chol[k], rhs, lower=True, trans='C')
        return x[..., 0] if squeeze else x

    def lower_dense(self):
        """組裝稠密下三角因子 L"""
        n, b = self.n_blocks, self.block_size
        L = np.zeros((n * b, n * b), dtype=np.result_type(self.chol, self.coupling))
        for k in range(n):
            L[k * b:(k + 1) * b, k * b:(k + 1) * b] = self.chol[k]
        for k in range(n - 1):
            L[(k + 1) * b:(k + 2) * b, k * b:(k + 1) * b] = self.coupling[k].conj().T
        return L


def block_cholesky(M):
    """
    區塊三對角 Hermitian 正定矩陣的區塊 Cholesky 分解，成本 O(n_blocks · block_size³)

    Args:
        M: BlockTridiagonal 矩陣

    Returns:
        BlockFactorization: 分解結果

    Raises:
        IndefiniteMatrixError: 某個主元區塊非正定
    """
    n = M.n_blocks
    dtype = np.result_type(M.diag, M.offdiag, float)
    chol = np.empty(M.diag.shape, dtype=dtype)
    coupling = np.empty(M.offdiag.shape, dtype=dtype)
    pivot = M.diag[0]
    for k in range(n):
        # 主元區塊取 Hermitian 部分以消除捨入誤差
        pivot = 0.5 * (pivot + pivot.conj().T)
        try:
            chol[k] = la.cholesky(pivot, lower=True)
        except la.LinAlgError as e:
            raise IndefiniteMatrixError(k) from e
        if not np.all(np.isfinite(chol[k])):
            raise IndefiniteMatrixError(k)
        if k < n - 1:
            coupling[k] = la.solve_triangular(chol[k], M.offdiag[k], lower=True)
            pivot = M.diag[k + 1] - coupling[k].conj().T @ coupling[k]
    return BlockFactorization(chol, coupling)


def real_inner(x, y):
    """實內積 Re⟨x, y⟩，固定以展平順序累加"""
    return float(np.real(np.vdot(x, y)))


def pcg(apply, b, precond=None, tol=1e-9, max_iter=500, x0=None):
    """
    預條件共軛梯度法，作用於以函數隱式定義的 Hermitian 算子

    複數未知數以實內積 Re⟨·,·⟩ 處理；收斂判準為預條件相對殘差
    sqrt(Re⟨r, M⁻¹r⟩ / Re⟨b, M⁻¹b⟩) ≤ tol。

    Args:
        apply: 線性算子 x ↦ A x
        b: 右端項 (任意形狀陣列)
        precond: 預條件子 r ↦ M⁻¹ r，None 表示不使用
        tol: 相對殘差容許值
        max_iter: 最大迭代次數
        x0: 初始猜測，None 表示零向量

    Returns:
        tuple: (x, iterations)

    Raises:
        ConvergenceError: 超過最大迭代次數、出現 NaN 或算子非正定
    """
    if precond is None:
        precond = _identity
    b = np.asarray(b)
    dtype = np.result_type(b, complex) if np.iscomplexobj(b) else np.result_type(b, float)

    z_b = precond(b)
    norm_b = real_inner(b, z_b)
    if norm_b == 0.0:
        return np.zeros_like(b, dtype=dtype), 0
    if not np.isfinite(norm_b) or norm_b < 0:
        raise ConvergenceError(0, float('nan'), "預條件子非正定或右端項含 NaN")

    if x0 is None:
        x = np.zeros_like(b, dtype=dtype)
        r = b.astype(dtype, copy=True)
        z = z_b
    else:
        x = np.array(x0, dtype=dtype, copy=True)
        r = b - apply(x)
        z = precond(r)
    rz = real_inner(r, z)
    residual = np.sqrt(max(rz, 0.0) / norm_b)
    if residual <= tol:
        return x, 0

    p = z.copy()
    for iteration in range(1, max_iter + 1):
        Ap = apply(p)
        pAp = real_inner(p, Ap)
        if not np.isfinite(pAp) or pAp <= 0.0:
            raise ConvergenceError(iteration, residual, f"第 {iteration} 次迭代偵測到非正定算子 (pAp={pAp})")
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        z = precond(r)
        rz_new = real_inner(r, z)
        if not np.isfinite(rz_new):
            raise ConvergenceError(iteration, float('nan'), f"第 {iteration} 次迭代出現 NaN")
        residual = np.sqrt(max(rz_new, 0.0) / norm_b)
        logger.debug(f"PCG 迭代 {iteration}: 相對殘差 {residual:.3e}")
        if residual <= tol:
            return x, iteration
        p = z + (rz_new / rz) * p
        rz = rz_new

    raise ConvergenceError(max_iter, residual)


def _identity(r):
    return r


def truncated_svd(M, r):
    """
    截斷 SVD：Frobenius 範數下最佳的秩 r 近似

    Args:
        M: 複數矩陣
        r: 秩

    Returns:
        tuple: (U, S, V)，滿足 M ≈ U·diag(S)·V^H，S 非遞增且非負
    """
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError(f"輸入必須為矩陣，實際維度 {M.ndim}")
    if int(r) != r or not 1 <= r <= min(M.shape):
        raise ValueError(f"秩 {r} 超出範圍 [1, {min(M.shape)}]")
    r = int(r)
    U, S, Vh = la.svd(M, full_matrices=False, lapack_driver='gesvd')
    return U[:, :r], S[:r], Vh[:r].conj().T


@dataclass
class KroneckerPreconditioner:
    """
    N_r ⊗ I 形式的預條件子

    向量排列為 (n_blocks, block_size, identity_dim)，展平後正好對應
    np.kron(N_r, I) 的索引。
    """
    factor: BlockTridiagonal
    identity_dim: int
    _factorization: BlockFactorization = field(default=None, init=False, repr=False)

    def factorize(self):
        """分解 N_r，每個線性問題只需一次"""
        if self._factorization is None:
            self._factorization = block_cholesky(self.factor)
        return self._factorization

    @property
    def shape(self):
        return (self.factor.n_blocks, self.factor.block_size, self.identity_dim)

    def apply(self, v):
        """
        計算 (N_r ⊗ I)⁻¹ v

        Args:
            v: 形狀 (n_blocks, block_size, identity_dim) 或展平的向量

        Returns:
            ndarray: 與 v 同形狀的結果
        """
        v = np.asarray(v)
        flat = v.ndim == 1
        x = self.factorize().solve(v.reshape(self.shape))
        return x.reshape(-1) if flat else x

    def multiply(self, v):
        """計算 (N_r ⊗ I) v"""
        v = np.asarray(v)
        flat = v.ndim == 1
        y = self.factor.matvec(v.reshape(self.shape))
        return y.reshape(-1) if flat else y

    def to_dense(self):
        return np.kron(self.factor.to_dense(), np.eye(self.identity_dim))
