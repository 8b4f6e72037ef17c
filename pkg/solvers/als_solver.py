"""
時空交替最小平方法 (ALS)：在秩 r 的時空矩陣集合上最小化離散泛函 F_N
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from numerics.block_linalg import (BlockTridiagonal, IndefiniteMatrixError, KroneckerPreconditioner,
                                   pcg, truncated_svd)
from numerics.time_grid import TimeGrid

# 設定日誌
logger = logging.getLogger(__name__)


@dataclass
class ALSConfig:
    """ALS 求解參數 (全部寫入 run.json)"""
    sweeps: int = 20
    cg_tol: float = 1e-9
    cg_max_iter: int = 500
    rel_decrease_tol: float = 1e-8
    # 'mass' 為 ‖A₀‖² + T‖Σζ_k A_k B_kᵀ‖²；'h1' 另加 T‖Σζ'_k A_k B_kᵀ‖²
    preconditioner: str = 'h1'
    regularization: float = 1e-12

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError(f"sweeps 必須 >= 1: {self.sweeps}")
        if self.preconditioner not in ('mass', 'h1'):
            raise ValueError(f"未知的預條件子: {self.preconditioner}")


@dataclass
class SpaceTimeLowRank:
    """
    w(t) = Σ_k ζ_k(t) A_k B_kᵀ

    A 形狀 (N+1, L_x, r)，B 形狀 (N+1, L_y, r)。
    """
    grid: TimeGrid
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=complex)
        self.B = np.asarray(self.B, dtype=complex)
        n = self.grid.size
        if self.A.shape[0] != n or self.B.shape[0] != n:
            raise ValueError(f"因子序列長度必須為 {n}")
        if self.A.shape[2] != self.B.shape[2]:
            raise ValueError(f"A、B 的秩不一致: {self.A.shape[2]} 與 {self.B.shape[2]}")

    @property
    def rank(self):
        return self.A.shape[2]

    def products(self):
        """節點值 A_k B_kᵀ，形狀 (N+1, L_x, L_y)"""
        return self.A @ np.swapaxes(self.B, 1, 2)

    def value(self, t):
        W = self.products()
        weights = np.array([self.grid.hat(k, t) for k in range(self.grid.size)])
        return np.tensordot(weights, W, axes=1)

    def copy(self):
        return SpaceTimeLowRank(self.grid, self.A.copy(), self.B.copy())

    @classmethod
    def from_svd(cls, grid, U0, r):
        """以 U₀ 的秩 r 截斷 SVD 複製到所有節點"""
        U, S, V = truncated_svd(U0, r)
        A = np.broadcast_to(U * S, (grid.size,) + U.shape).copy()
        B = np.broadcast_to(np.conj(V), (grid.size,) + V.shape).copy()
        return cls(grid, A, B)


@dataclass
class HalfStepRecord:
    """每個半步的紀錄"""
    sweep: int
    half: str
    F_N: float
    cg_iterations: int


@dataclass
class ALSProblem:
    """把實驗、時間網格與節點上的 Hamiltonian 綁在一起，避免重複計算"""
    experiment: object
    grid: TimeGrid = None
    operator: object = field(default=None, repr=False)

    def __post_init__(self):
        if self.grid is None:
            self.grid = TimeGrid(self.experiment.T, self.experiment.N)
        if self.operator is None:
            self.operator = self.experiment.hamiltonian.node_operator(self.grid.nodes)

    @property
    def U0(self):
        return self.experiment.U0


def _as_problem(problem):
    return problem if isinstance(problem, ALSProblem) else ALSProblem(problem)


def _residual_parts(W, problem):
    """α_k = iW_k、β_k = −𝕳_k W_k"""
    return 1j * W, -problem.operator.apply(W)


def _space_time_form(alpha, beta, grid):
    """Σ_kl S_kl⟨α_k,α_l⟩ + C_kl⟨α_k,β_l⟩ + C_lk⟨β_k,α_l⟩ + M_kl⟨β_k,β_l⟩"""
    total = np.vdot(alpha, grid.apply('stiffness', alpha))
    total += np.vdot(alpha, grid.apply('cross', beta))
    total += np.vdot(beta, grid.apply('cross', alpha, transpose=True))
    total += np.vdot(beta, grid.apply('mass', beta))
    return float(np.real(total))


def eval_FN(w, experiment):
    """
    離散泛函 F_N(w) = ‖w(0) − U₀‖² + T∫‖Σ_k iζ'_k W_k − Σ_k ζ_k 𝕳(t_k, W_k)‖² dt

    時間積分以帽函數積分表精確展開。

    Args:
        w: SpaceTimeLowRank
        experiment: MatrixExperiment 或 ALSProblem

    Returns:
        float: F_N (非負)
    """
    problem = _as_problem(experiment)
    W = w.products()
    if W.shape[1:] != problem.U0.shape:
        raise ValueError(f"節點矩陣形狀 {W.shape[1:]} 與初始條件 {problem.U0.shape} 不符")
    alpha, beta = _residual_parts(W, problem)
    initial = float(np.linalg.norm(W[0] - problem.U0) ** 2)
    return max(initial + problem.grid.T * _space_time_form(alpha, beta, problem.grid), 0.0)


def normal_operator(W, problem):
    """
    二次型 ∫‖R‖² 對 W 的 Hermitian 算子：Z_k = −i(Rα)_k − 𝕳_k (Rβ)_k

    (Rα)_k = Σ_l S_kl α_l + C_kl β_l，(Rβ)_k = Σ_l C_lk α_l + M_kl β_l
    """
    grid = problem.grid
    alpha, beta = _residual_parts(W, problem)
    r_alpha = grid.apply('stiffness', alpha) + grid.apply('cross', beta)
    r_beta = grid.apply('cross', alpha, transpose=True) + grid.apply('mass', beta)
    return -1j * r_alpha - problem.operator.apply(r_beta)


@dataclass
class HalfStepSystem:
    """
    一個半步的線性系統：apply(X) = rhs，X 為自由因子序列

    which 為 'A' 或 'B'；自由因子以 (N+1, L, r) 陣列表示。
    """
    which: str
    apply: object
    rhs: np.ndarray
    preconditioner: KroneckerPreconditioner
    x0: np.ndarray

    def precondition(self, R):
        # N_r ⊗ I 作用於堆疊的 X_kᵀ
        Rt = np.swapaxes(R, 1, 2)
        return np.swapaxes(self.preconditioner.apply(Rt), 1, 2)


def _preconditioner_factor(F, problem, config):
    """
    由固定因子 F 組出 N_r：(k, l) 區塊 = δ_k0δ_l0 F_0^H F_0 + T c_kl F_k^H F_l
    """
    grid = problem.grid
    diag_m, off_m, _ = grid.band('mass')
    diag_c, off_c = diag_m.copy(), off_m.copy()
    if config.preconditioner == 'h1':
        diag_s, off_s, _ = grid.band('stiffness')
        diag_c = diag_c + diag_s
        off_c = off_c + off_s
    Fh = np.conj(np.swapaxes(F, 1, 2))
    gram_diag = Fh @ F
    gram_off = Fh[:-1] @ F[1:]
    diag = grid.T * diag_c[:, None, None] * gram_diag
    diag[0] += gram_diag[0]
    offdiag = grid.T * off_c[:, None, None] * gram_off
    return BlockTridiagonal(diag, offdiag)


def _factorized_preconditioner(F, identity_dim, problem, config):
    factor = _preconditioner_factor(F, problem, config)
    preconditioner = KroneckerPreconditioner(factor, identity_dim)
    try:
        preconditioner.factorize()
    except IndefiniteMatrixError as e:
        traces = np.real(np.trace(factor.diag, axis1=1, axis2=2))
        shift = config.regularization * np.maximum(traces, np.finfo(float).tiny)
        logger.warning(f"預條件子第 {e.block_index} 個區塊非正定，對角加上 {config.regularization:g}·trace 正則化")
        preconditioner = KroneckerPreconditioner(factor.shifted(shift), identity_dim)
        preconditioner.factorize()
    return preconditioner


def half_step_system(which, w, experiment, config=None):
    """
    組出 A 步或 B 步的線性系統 (不組稠密矩陣)

    Args:
        which: 'A' (固定 B) 或 'B' (固定 A)
        w: 目前的 SpaceTimeLowRank
        experiment: MatrixExperiment 或 ALSProblem
        config: ALSConfig

    Returns:
        HalfStepSystem: 線性系統
    """
    config = config or ALSConfig()
    problem = _as_problem(experiment)
    T = problem.grid.T
    A, B = w.A, w.B

    if which == 'A':
        def apply(X):
            W = X @ np.swapaxes(B, 1, 2)
            out = T * (normal_operator(W, problem) @ np.conj(B))
            out[0] += W[0] @ np.conj(B[0])
            return out

        rhs = np.zeros(A.shape, dtype=complex)
        rhs[0] = problem.U0 @ np.conj(B[0])
        preconditioner = _factorized_preconditioner(B, A.shape[1], problem, config)
        x0 = A
    elif which == 'B':
        def apply(X):
            W = A @ np.swapaxes(X, 1, 2)
            Z = normal_operator(W, problem)
            out = T * (np.swapaxes(Z, 1, 2) @ np.conj(A))
            out[0] += W[0].T @ np.conj(A[0])
            return out

        rhs = np.zeros(B.shape, dtype=complex)
        rhs[0] = problem.U0.T @ np.conj(A[0])
        preconditioner = _factorized_preconditioner(A, B.shape[1], problem, config)
        x0 = B
    else:
        raise ValueError(f"半步必須為 'A' 或 'B': {which}")
    return HalfStepSystem(which, apply, rhs, preconditioner, x0)


def _orthonormalize(fixed, free):
    """
    固定因子逐節點 QR：fixed_k = Q_k R_k ⇒ fixed_k ← Q_k、free_k ← free_k R_kᵀ

    乘積 free_k fixed_kᵀ 不變。
    """
    Q, R = np.linalg.qr(fixed)
    return Q, free @ np.swapaxes(R, 1, 2)


def _solve_half_step(which, w, problem, config):
    if which == 'A':
        B, A = _orthonormalize(w.B, w.A)
        w = SpaceTimeLowRank(problem.grid, A, B)
    else:
        A, B = _orthonormalize(w.A, w.B)
        w = SpaceTimeLowRank(problem.grid, A, B)
    system = half_step_system(which, w, problem, config)
    X, iterations = pcg(system.apply, system.rhs, system.precondition,
                        tol=config.cg_tol, max_iter=config.cg_max_iter, x0=system.x0)
    if which == 'A':
        return SpaceTimeLowRank(problem.grid, X, w.B), iterations
    return SpaceTimeLowRank(problem.grid, w.A, X), iterations


def solve_half_step_A(w, experiment, config=None):
    """
    固定 (B_k)，求 F_N 對 (A_k) 的精確最小值

    Returns:
        tuple: (新的 SpaceTimeLowRank, CG 迭代次數)

    Raises:
        ConvergenceError: CG 未收斂
    """
    return _solve_half_step('A', w, _as_problem(experiment), config or ALSConfig())


def solve_half_step_B(w, experiment, config=None):
    """固定 (A_k)，求 F_N 對 (B_k) 的精確最小值"""
    return _solve_half_step('B', w, _as_problem(experiment), config or ALSConfig())


def als(experiment, r, sweeps=None, init=None, config=None):
    """
    交替最小平方法：每個 sweep 先解 A 步再解 B 步

    Args:
        experiment: MatrixExperiment 或 ALSProblem
        r: 秩
        sweeps: sweep 次數上限，None 使用 config.sweeps
        init: 初始 SpaceTimeLowRank，None 時以 U₀ 的截斷 SVD 初始化
        config: ALSConfig

    Returns:
        tuple: (SpaceTimeLowRank, list[HalfStepRecord])
    """
    config = config or ALSConfig()
    problem = _as_problem(experiment)
    sweeps = config.sweeps if sweeps is None else sweeps
    if sweeps < 1:
        raise ValueError(f"sweeps 必須 >= 1: {sweeps}")

    w = init.copy() if init is not None else SpaceTimeLowRank.from_svd(problem.grid, problem.U0, r)
    if w.rank != r:
        raise ValueError(f"初始值的秩 {w.rank} 與要求的秩 {r} 不符")

    history = []
    F_sweep = eval_FN(w, problem)
    logger.info(f"ALS 開始: r={r}, 初始 F_N={F_sweep:.6e}")
    for sweep in range(1, sweeps + 1):
        for which in ('A', 'B'):
            w, iterations = _solve_half_step(which, w, problem, config)
            F = eval_FN(w, problem)
            history.append(HalfStepRecord(sweep, which, F, iterations))
            logger.debug(f"ALS sweep {sweep} {which} 步: F_N={F:.6e}, CG 迭代 {iterations} 次")
        decrease = F_sweep - F
        logger.info(f"ALS sweep {sweep}: F_N={F:.6e}")
        if decrease <= config.rel_decrease_tol * max(F_sweep, np.finfo(float).tiny):
            logger.info(f"ALS 於第 {sweep} 個 sweep 停止 (相對下降量低於 {config.rel_decrease_tol:g})")
            break
        F_sweep = F
    return w, history
