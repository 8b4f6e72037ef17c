"""
Dirac–Frenkel 投影分裂積分器 (KSL)：秩 r 矩陣的二階對稱分裂
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from numerics.block_linalg import truncated_svd
from numerics.time_grid import TimeGrid

# 設定日誌
logger = logging.getLogger(__name__)


@dataclass
class KSLConfig:
    """KSL 參數 (寫入 run.json)"""
    # 每個子步 ODE 的 RK4 內部步數
    substeps: int = 4
    # 每個 ALS 時間區間內的 KSL 步數
    steps_per_interval: int = 1

    def __post_init__(self):
        if self.substeps < 1 or self.steps_per_interval < 1:
            raise ValueError("substeps 與 steps_per_interval 必須 >= 1")


@dataclass
class LowRankState:
    """
    Y = U S V^H，U、V 的行向量正交

    實數資料時即為 U S Vᵀ。
    """
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        self.U = np.asarray(self.U, dtype=complex)
        self.S = np.asarray(self.S, dtype=complex)
        self.V = np.asarray(self.V, dtype=complex)
        r = self.S.shape[0]
        if self.S.shape != (r, r) or self.U.shape[1] != r or self.V.shape[1] != r:
            raise ValueError(f"因子形狀不一致: U{self.U.shape}, S{self.S.shape}, V{self.V.shape}")

    @property
    def rank(self):
        return self.S.shape[0]

    def to_dense(self):
        return self.U @ self.S @ self.V.conj().T

    def orthonormality_defect(self):
        """max(‖U^H U − I‖, ‖V^H V − I‖)"""
        eye = np.eye(self.rank)
        return max(np.linalg.norm(self.U.conj().T @ self.U - eye),
                   np.linalg.norm(self.V.conj().T @ self.V - eye))

    @classmethod
    def from_matrix(cls, M, r):
        """以截斷 SVD 建立秩 r 狀態"""
        U, S, V = truncated_svd(M, r)
        return cls(U, np.diag(S), V)


def qr_positive(K):
    """
    經濟型 QR，R 的對角線調整為非負實數

    Returns:
        tuple: (Q, R)
    """
    Q, R = la.qr(K, mode='economic')
    d = np.diag(R)
    magnitude = np.abs(d)
    phase = np.where(magnitude > 0, d / np.where(magnitude > 0, magnitude, 1.0), 1.0)
    return Q * phase[None, :], np.conj(phase)[:, None] * R


def _rk4(f, y, t0, t1, substeps):
    """以 substeps 個等距 RK4 步積分 y' = f(t, y)"""
    h = (t1 - t0) / substeps
    for i in range(substeps):
        t = t0 + i * h
        k1 = f(t, y)
        k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = f(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def ksl_step(state, hamiltonian, t, h, substeps=4):
    """
    一個二階對稱 KSL 步：半 K 步、半 S 步、整 L 步、半 S 步、半 K 步

    右端項 F(t, Y) = −i𝕳(t, Y)。

    Args:
        state: LowRankState
        hamiltonian: TwoSidedHamiltonian
        t: 起始時間
        h: 步長
        substeps: 子步 RK4 步數

    Returns:
        LowRankState: 時間 t + h 的狀態
    """
    if not h > 0:
        raise ValueError(f"步長必須為正: {h}")

    def F(tau, Y):
        return -1j * hamiltonian.apply(tau, Y)

    U0, S0, V0 = state.U, state.S, state.V
    t_half = t + 0.5 * h

    # K 步 (前半)
    K = _rk4(lambda tau, K: F(tau, K @ V0.conj().T) @ V0, U0 @ S0, t, t_half, substeps)
    U1, S_hat = qr_positive(K)
    # S 步 (前半，倒退)
    S1 = _rk4(lambda tau, S: -(U1.conj().T @ F(tau, U1 @ S @ V0.conj().T) @ V0),
              S_hat, t, t_half, substeps)
    # L 步 (整步)
    L = _rk4(lambda tau, L: F(tau, U1 @ L.conj().T).conj().T @ U1, V0 @ S1.conj().T, t, t + h, substeps)
    V2, L_hat = qr_positive(L)
    # S 步 (後半，倒退)
    S2 = _rk4(lambda tau, S: -(U1.conj().T @ F(tau, U1 @ S @ V2.conj().T) @ V2),
              L_hat.conj().T, t_half, t + h, substeps)
    # K 步 (後半)
    K = _rk4(lambda tau, K: F(tau, K @ V2.conj().T) @ V2, U1 @ S2, t_half, t + h, substeps)
    U2, S3 = qr_positive(K)
    return LowRankState(U2, S3, V2)


@dataclass
class KSLTrajectory:
    """KSL 在 ALS 時間節點上的紀錄"""
    times: np.ndarray
    states: list = field(repr=False)
    rank: int = 0
    steps: int = 0

    def dense(self):
        """節點上的稠密矩陣，形狀 (n_nodes, L_x, L_y)"""
        return np.stack([s.to_dense() for s in self.states])


def propagate(experiment, r, steps=None, config=None):
    """
    以 KSL 在 [0, T] 上傳播秩 r 近似，並在 ALS 的時間節點上紀錄

    Args:
        experiment: MatrixExperiment
        r: 秩
        steps: 總步數，須為 N 的倍數；None 時為 N·steps_per_interval
        config: KSLConfig

    Returns:
        KSLTrajectory: 節點紀錄
    """
    config = config or KSLConfig()
    grid = TimeGrid(experiment.T, experiment.N)
    steps = grid.N * config.steps_per_interval if steps is None else int(steps)
    if steps < 1:
        raise ValueError(f"步數必須 >= 1: {steps}")
    if steps % grid.N != 0:
        raise ValueError(f"步數 {steps} 必須是時間區間數 {grid.N} 的倍數，才能在相同節點上比較")
    per_node = steps // grid.N
    h = grid.T / steps

    state = LowRankState.from_matrix(experiment.U0, r)
    states = [state]
    for step in range(1, steps + 1):
        state = ksl_step(state, experiment.hamiltonian, (step - 1) * h, h, config.substeps)
        if step % per_node == 0:
            states.append(state)
    logger.info(f"KSL 完成: r={r}, {steps} 步, 末端正交性誤差 {state.orthonormality_defect():.2e}")
    return KSLTrajectory(grid.nodes.copy(), states, rank=r, steps=steps)
