"""
波包散射實驗：高斯初始條件與高斯和位能
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from models.gaussian_algebra import GaussianTerm, parameter_count, parameter_layout, parameter_slices

# 設定日誌
logger = logging.getLogger(__name__)


def initial_parameters(q, p):
    """
    u₀(x) = exp(−½|x−q|²)·exp(ip·x) 的 γ 參數 [1, 0, A = I, B = 0, q, p]

    Args:
        q: 中心 (長度 d)
        p: 動量 (長度 d)

    Returns:
        ndarray: 長度 parameter_count(d) 的參數向量
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    d = q.shape[0]
    if p.shape != (d,):
        raise ValueError(f"動量維度 {p.shape} 與中心維度 {d} 不符")
    sl = parameter_slices(d)
    rows, cols = np.triu_indices(d)
    X = np.zeros(parameter_count(d))
    X[0] = 1.0
    X[sl['A']] = (rows == cols).astype(float)
    X[sl['q']] = q
    X[sl['p']] = p
    return X


def gaussian_potential(heights, centers):
    """
    V(x) = Σ_j h_j exp(−½|x−c_j|²)

    Args:
        heights: 各項高度
        centers: 各項中心，形狀 (J, d)

    Returns:
        list: GaussianTerm 列表
    """
    heights = np.atleast_1d(np.asarray(heights, dtype=float))
    centers = np.asarray(centers, dtype=float).reshape(len(heights), -1)
    d = centers.shape[1]
    return [GaussianTerm(h, c, np.zeros(d), np.eye(d), np.zeros((d, d)))
            for h, c in zip(heights, centers)]


@dataclass
class WavepacketExperiment:
    """波包實驗設定：初始條件、位能與時間網格"""
    name: str
    q: np.ndarray
    p: np.ndarray
    heights: np.ndarray
    centers: np.ndarray
    T: float
    N: int
    u0_parameters: np.ndarray = field(init=False, repr=False)
    potential: list = field(init=False, repr=False)

    def __post_init__(self):
        self.q = np.atleast_1d(np.asarray(self.q, dtype=float))
        self.p = np.atleast_1d(np.asarray(self.p, dtype=float))
        self.heights = np.atleast_1d(np.asarray(self.heights, dtype=float))
        self.centers = np.asarray(self.centers, dtype=float).reshape(len(self.heights), -1)
        if self.centers.size and self.centers.shape[1] != self.dim:
            raise ValueError(f"位能中心維度 {self.centers.shape[1]} 與初始條件維度 {self.dim} 不符")
        if not self.T > 0 or self.N < 1:
            raise ValueError(f"無效的時間網格: T={self.T}, N={self.N}")
        self.u0_parameters = initial_parameters(self.q, self.p)
        self.potential = gaussian_potential(self.heights, self.centers) if len(self.heights) else []

    @property
    def dim(self):
        return self.q.shape[0]

    @property
    def layout(self):
        return parameter_layout(self.dim)

    def problem(self):
        """建立交互作用表象中的 GaussianProblem"""
        from solvers.greedy_solver import GaussianProblem
        return GaussianProblem.from_parameters(self.u0_parameters, self.potential, self.T, self.N)

    def to_config(self):
        """序列化為設定檔鍵值 (與 handlers.config_handler 的格式一致)"""
        return {
            'EXPERIMENT': self.name,
            'PROBLEM_T': repr(float(self.T)),
            'PROBLEM_N': str(self.N),
            'PROBLEM_Q': " ".join(repr(float(v)) for v in self.q),
            'PROBLEM_P': " ".join(repr(float(v)) for v in self.p),
            'PROBLEM_POTENTIAL_HEIGHTS': ",".join(repr(float(h)) for h in self.heights),
            'PROBLEM_POTENTIAL_CENTERS': ",".join(" ".join(repr(float(v)) for v in c) for c in self.centers),
        }


def double_hump_experiment(q=6.0, p=-1.0, T=5.0, N=100):
    """一維雙峰位能散射：V(x) = 1.5e^{−(x+2)²/2} + e^{−(x−2)²/2}"""
    logger.info(f"建立一維雙峰散射實驗: q={q}, p={p}, T={T}, N={N}")
    return WavepacketExperiment('greedy-1d', [q], [p], [1.5, 1.0], [[-2.0], [2.0]], T, N)


def scattering_3d_experiment(q=(3.0, 3.0, 0.0), p=(-np.sqrt(0.5), -np.sqrt(0.5), 0.0), T=5.0, N=100):
    """三維散射：V(x) = e^{−|x|²/2}"""
    logger.info(f"建立三維散射實驗: q={tuple(q)}, p={tuple(p)}, T={T}, N={N}")
    return WavepacketExperiment('greedy-3d', q, p, [1.0], [[0.0, 0.0, 0.0]], T, N)
