"""
矩陣實驗的參考解：稠密 RK4 傳播、截斷 SVD 最佳秩 r 誤差與奇異值曲線
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from numerics.time_grid import TimeGrid

# 設定日誌
logger = logging.getLogger(__name__)


@dataclass
class ReferenceConfig:
    """參考解參數 (寫入 run.json)"""
    # 每個時間區間的 RK4 步數；預設為比較網格的 10 倍
    steps_per_interval: int = 10
    self_convergence_tol: float = 1e-6
    check_self_convergence: bool = True

    def __post_init__(self):
        if self.steps_per_interval < 1:
            raise ValueError(f"steps_per_interval 必須 >= 1: {self.steps_per_interval}")


@dataclass
class ReferenceTrajectory:
    """
    節點上的稠密參考解

    certificate 紀錄自我收斂檢查：步數減半時 sup-node 差異是否低於容許值。
    """
    times: np.ndarray
    values: np.ndarray = field(repr=False)
    steps: int = 0
    certificate: dict = field(default_factory=dict)

    def at(self, k):
        return self.values[k]


@dataclass
class ErrorCurve:
    """逐節點 Frobenius 誤差"""
    times: np.ndarray
    errors: np.ndarray

    @property
    def sup(self):
        return float(np.max(self.errors))


def _rk4_dense(hamiltonian, U0, T, steps, record_every):
    h = T / steps
    U = np.array(U0, dtype=complex)
    out = [U.copy()]

    def F(t, M):
        return -1j * hamiltonian.apply(t, M)

    for step in range(steps):
        t = step * h
        k1 = F(t, U)
        k2 = F(t + 0.5 * h, U + 0.5 * h * k1)
        k3 = F(t + 0.5 * h, U + 0.5 * h * k2)
        k4 = F(t + h, U + h * k3)
        U = U + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (step + 1) % record_every == 0:
            out.append(U.copy())
    return np.stack(out)


def rk4_reference(experiment, steps=None, config=None):
    """
    以古典 RK4 傳播完整矩陣方程 i∂tU = 𝕳(t, U)，在比較網格的節點上紀錄

    Args:
        experiment: MatrixExperiment (從 U0_reference 出發)
        steps: 總步數，須為 N 的倍數；None 時為 N·steps_per_interval
        config: ReferenceConfig

    Returns:
        ReferenceTrajectory: 節點上的稠密解與自我收斂證明
    """
    config = config or ReferenceConfig()
    grid = TimeGrid(experiment.T, experiment.N)
    steps = grid.N * config.steps_per_interval if steps is None else int(steps)
    if steps < 1 or steps % grid.N != 0:
        raise ValueError(f"步數 {steps} 必須是時間區間數 {grid.N} 的正整數倍")
    per_node = steps // grid.N
    values = _rk4_dense(experiment.hamiltonian, experiment.U0_reference, grid.T, steps, per_node)

    certificate = {'steps': steps, 'tolerance': config.self_convergence_tol}
    if config.check_self_convergence and per_node % 2 == 0:
        coarse = _rk4_dense(experiment.hamiltonian, experiment.U0_reference, grid.T, steps // 2, per_node // 2)
        difference = float(np.max(np.linalg.norm(values - coarse, axis=(1, 2))))
        certificate.update(half_steps=steps // 2, difference=difference,
                           passed=difference < config.self_convergence_tol)
        if not certificate['passed']:
            logger.warning(f"RK4 參考解自我收斂檢查失敗: 步數減半差異 {difference:.3e} >= {config.self_convergence_tol:g}")
    else:
        # 步數無法減半仍落在節點上時不做檢查
        certificate.update(half_steps=None, difference=None, passed=not config.check_self_convergence)
        if config.check_self_convergence:
            logger.warning(f"每個區間 {per_node} 步無法減半，略過自我收斂檢查")
    logger.info(f"RK4 參考解完成: {steps} 步")
    return ReferenceTrajectory(grid.nodes.copy(), values, steps=steps, certificate=certificate)


def node_errors(reference, values):
    """
    逐節點誤差 ‖values_k − U(t_k)‖_F

    Args:
        reference: ReferenceTrajectory
        values: 形狀 (n_nodes, L_x, L_y) 的近似解

    Returns:
        ErrorCurve: 誤差曲線
    """
    values = np.asarray(values)
    if values.shape != reference.values.shape:
        raise ValueError(f"近似解形狀 {values.shape} 與參考解 {reference.values.shape} 不符")
    return ErrorCurve(reference.times, np.linalg.norm(values - reference.values, axis=(1, 2)))


def best_rank_error(trajectory, r):
    """
    逐節點最佳秩 r 近似誤差 (截斷 SVD 的尾端奇異值)

    Args:
        trajectory: ReferenceTrajectory
        r: 秩

    Returns:
        ErrorCurve: 誤差曲線，sup 為各節點的最大值
    """
    Lx, Ly = trajectory.values.shape[1:]
    if int(r) != r or not 1 <= r <= min(Lx, Ly):
        raise ValueError(f"秩 {r} 超出範圍 [1, {min(Lx, Ly)}]")
    r = int(r)
    errors = np.array([np.sqrt(np.sum(la.svdvals(U)[r:] ** 2)) for U in trajectory.values])
    return ErrorCurve(trajectory.times, errors)


def singular_value_curves(trajectory, count):
    """
    逐節點前 count 個奇異值

    Returns:
        ndarray: 形狀 (n_nodes, count)，每列非遞增
    """
    Lx, Ly = trajectory.values.shape[1:]
    if not 1 <= count <= min(Lx, Ly):
        raise ValueError(f"count {count} 超出範圍 [1, {min(Lx, Ly)}]")
    return np.stack([la.svdvals(U)[:count] for U in trajectory.values])
