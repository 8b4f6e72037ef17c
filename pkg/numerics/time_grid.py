"""
時間網格模組：[0, T] 上的均勻 P1 帽函數與其兩兩積分表
"""
import logging
from dataclasses import dataclass, field

import numpy as np

# 設定日誌
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeGrid:
    """
    [0, T] 上 N 個區間的均勻帽函數基底

    三張積分表 (mass、stiffness、cross) 以帶寬 1 的帶狀形式儲存：
    diag[k] = 表(k, k)，upper[k] = 表(k, k+1)，lower[k] = 表(k+1, k)。
    """
    T: float
    N: int
    _tables: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"終止時間必須為正數: T={self.T}")
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"區間數必須為 >= 2 的整數: N={self.N}")
        object.__setattr__(self, 'N', int(self.N))
        object.__setattr__(self, 'T', float(self.T))
        object.__setattr__(self, '_tables', _build_tables(self.N, self.dt))

    @property
    def dt(self):
        return self.T / self.N

    @property
    def size(self):
        """節點數 N+1"""
        return self.N + 1

    @property
    def nodes(self):
        return np.arange(self.N + 1) * self.dt

    def node(self, k):
        self._check_index(k)
        return k * self.T / self.N

    def hat(self, k, t):
        """
        計算帽函數 ζ_k 在時間 t 的值

        Args:
            k: 節點索引
            t: 時間 (純量或陣列)

        Returns:
            ndarray: ζ_k(t)
        """
        self._check_index(k)
        t = np.asarray(t, dtype=float)
        return np.clip(1.0 - np.abs(t / self.dt - k), 0.0, None)

    def hat_derivative(self, k, t):
        """ζ'_k(t)，在節點上取右導數 (最後一個節點取左導數)"""
        self._check_index(k)
        s = np.asarray(t, dtype=float) / self.dt
        left = (s >= k - 1) & (s < k)
        right = (s >= k) & (s < k + 1)
        if k == self.N:
            left = left | (s == k)
        return np.where(left, 1.0 / self.dt, 0.0) + np.where(right, -1.0 / self.dt, 0.0)

    def mass(self, k, l):
        """∫₀ᵀ ζ_k ζ_l dt"""
        return self._lookup('mass', k, l)

    def stiffness(self, k, l):
        """∫₀ᵀ ζ'_k ζ'_l dt"""
        return self._lookup('stiffness', k, l)

    def cross(self, k, l):
        """∫₀ᵀ ζ'_k ζ_l dt"""
        return self._lookup('cross', k, l)

    def band(self, name):
        """
        取得帶狀積分表

        Args:
            name: 'mass'、'stiffness' 或 'cross'

        Returns:
            tuple: (diag, upper, lower) 三個陣列
        """
        return self._tables[name]

    def dense(self, name):
        """以 (N+1)×(N+1) 稠密矩陣形式回傳積分表，供測試與小型問題使用"""
        diag, upper, lower = self._tables[name]
        return np.diag(diag) + np.diag(upper, 1) + np.diag(lower, -1)

    def apply(self, name, X, transpose=False):
        """
        以積分表作用於節點序列：Y_k = Σ_l table(k, l) X_l

        Args:
            name: 積分表名稱
            X: 第一軸長度為 N+1 的陣列
            transpose: 為 True 時改用 table(l, k)

        Returns:
            ndarray: 與 X 同形狀的結果
        """
        diag, upper, lower = self._tables[name]
        if transpose:
            upper, lower = lower, upper
        X = np.asarray(X)
        if X.shape[0] != self.N + 1:
            raise ValueError(f"第一軸長度 {X.shape[0]} 與節點數 {self.N + 1} 不符")
        shape = (-1,) + (1,) * (X.ndim - 1)
        Y = diag.reshape(shape) * X
        Y[:-1] += upper.reshape(shape) * X[1:]
        Y[1:] += lower.reshape(shape) * X[:-1]
        return Y

    def _lookup(self, name, k, l):
        self._check_index(k)
        self._check_index(l)
        diag, upper, lower = self._tables[name]
        if k == l:
            return float(diag[k])
        if l == k + 1:
            return float(upper[k])
        if k == l + 1:
            return float(lower[l])
        return 0.0

    def _check_index(self, k):
        if not 0 <= k <= self.N:
            raise IndexError(f"節點索引 {k} 超出範圍 [0, {self.N}]")


def _build_tables(N, dt):
    """建立三張帶狀積分表"""
    ones = np.ones(N + 1)
    off = np.ones(N)

    mass_diag = ones * (2.0 * dt / 3.0)
    mass_diag[[0, -1]] = dt / 3.0
    mass_off = off * (dt / 6.0)

    stiff_diag = ones * (2.0 / dt)
    stiff_diag[[0, -1]] = 1.0 / dt
    stiff_off = off * (-1.0 / dt)

    # ∫ζ'_k ζ_k = ½(ζ_k(T)² − ζ_k(0)²)
    cross_diag = np.zeros(N + 1)
    cross_diag[0] = -0.5
    cross_diag[-1] = 0.5

    tables = {
        'mass': (mass_diag, mass_off, mass_off.copy()),
        'stiffness': (stiff_diag, stiff_off, stiff_off.copy()),
        'cross': (cross_diag, off * -0.5, off * 0.5),
    }
    logger.debug(f"建立時間網格積分表: N={N}, dt={dt}")
    return tables
