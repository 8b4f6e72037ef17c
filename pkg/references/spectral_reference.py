"""
波包實驗的參考解：Dirichlet 正弦基底上的 Strang 分裂

基底為 (−R, R)^d 上 sin(kπ(x+R)/2R) 的張量積，係數以 L² 正規化基底表示，
因此 ‖ψ‖² = Σ|c|²。配置點為標準 DST-I 網格 x_j = −R + 2Rj/(n+1)。
"""
import logging
import string
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dstn, idstn
from scipy.special import erfc

from models.gaussian_algebra import GaussianBatch, as_batch, pair_inner

# 設定日誌
logger = logging.getLogger(__name__)

# 盒外質量的警告門檻
TAIL_TOLERANCE = 1e-10


@dataclass
class SpectralConfig:
    """頻譜參考解參數 (寫入 run.json)"""
    half_width: float = 30.0
    modes: tuple = (32, 64)
    reference_modes: int = 64
    # [0, T] 上的總步數，預設 h = T/1000
    steps: int = 1000
    # 誤差曲線每隔幾個節點取樣一次
    record_every: int = 1
    # 只量測計算時間的額外解析度 (不與參考解比較)
    timing_modes: tuple = ()

    def __post_init__(self):
        self.modes = tuple(int(n) for n in self.modes)
        self.timing_modes = tuple(int(n) for n in self.timing_modes)
        if not self.half_width > 0:
            raise ValueError(f"盒子半寬必須為正: {self.half_width}")
        if self.steps < 1 or self.record_every < 1 or any(n < 2 for n in self.modes + self.timing_modes) or self.reference_modes < 2:
            raise ValueError("步數與模態數必須為正")


@dataclass(frozen=True)
class SineGrid:
    """d 維正弦基底：每個方向 n 個模態，盒子 (−R, R)^d"""
    dim: int
    R: float
    n: int

    def __post_init__(self):
        if self.dim < 1 or self.n < 2 or not self.R > 0:
            raise ValueError(f"無效的正弦網格: dim={self.dim}, R={self.R}, n={self.n}")

    @property
    def dx(self):
        return 2.0 * self.R / (self.n + 1)

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def axis(self):
        """一維配置點"""
        return -self.R + self.dx * np.arange(1, self.n + 1)

    def points(self):
        """所有配置點，形狀 (n^d, d)，C 順序"""
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing='ij')
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def eigenvalues(self):
        """−Δ 在基底上的特徵值 Σ_a (k_a π / 2R)²"""
        k2 = (np.arange(1, self.n + 1) * np.pi / (2.0 * self.R)) ** 2
        total = np.zeros(self.shape)
        for a in range(self.dim):
            shape = [1] * self.dim
            shape[a] = self.n
            total = total + k2.reshape(shape)
        return total

    def to_coefficients(self, samples):
        return self.dx ** (self.dim / 2.0) * dstn(samples, type=1, norm='ortho')

    def to_samples(self, coeffs):
        return self.dx ** (-self.dim / 2.0) * idstn(coeffs, type=1, norm='ortho')


def _potential_samples(potential, grid):
    if potential is None or (isinstance(potential, list) and not potential):
        return np.zeros(grid.shape)
    if isinstance(potential, list):
        batch = GaussianBatch.concatenate([as_batch(v) for v in potential])
    else:
        batch = as_batch(potential)
    return np.real(batch.evaluate_sum(grid.points())).reshape(grid.shape)


@dataclass
class SpectralPropagator:
    """
    e^{ih(Δ−V)} ≈ e^{i(h/2)Δ} e^{−ihV} e^{i(h/2)Δ}

    兩個相位因子在建構時預先計算。
    """
    grid: SineGrid
    potential: object
    h: float
    kinetic_half: np.ndarray = field(init=False, repr=False)
    potential_phase: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"步長必須為正: {self.h}")
        self.kinetic_half = np.exp(-0.5j * self.h * self.grid.eigenvalues())
        self.potential_phase = np.exp(-1j * self.h * _potential_samples(self.potential, self.grid))

    def step(self, coeffs):
        """一個 Strang 步 (每個因子都是相位，故為么正)"""
        c = self.kinetic_half * coeffs
        c = dstn(self.potential_phase * idstn(c, type=1, norm='ortho'), type=1, norm='ortho')
        return self.kinetic_half * c

    def run(self, coeffs, T, N, steps, callback=None):
        """
        在 [0, T] 上傳播，於每個節點 t_k = kT/N 呼叫 callback(k, t_k, coeffs)

        Args:
            coeffs: 初始係數
            T: 終止時間
            N: 時間區間數
            steps: 總步數，須為 N 的倍數
            callback: 節點回呼

        Returns:
            ndarray: 時間 T 的係數
        """
        if steps % N != 0:
            raise ValueError(f"步數 {steps} 必須是區間數 {N} 的倍數")
        per_node = steps // N
        c = np.array(coeffs, dtype=complex)
        if callback is not None:
            callback(0, 0.0, c)
        for step in range(1, steps + 1):
            c = self.step(c)
            if callback is not None and step % per_node == 0:
                callback(step // per_node, step * T / steps, c)
        return c


def strang_step(coeffs, potential, grid, h):
    """單步 Strang 分裂 (每次重新計算相位；長時間傳播請用 SpectralPropagator)"""
    return SpectralPropagator(grid, potential, h).step(coeffs)


def tail_mass(u, R):
    """
    盒外 L² 質量的上界 (Σ_j ‖g_j·1_{盒外}‖)²

    每項 |g_j|² 為精度 2A、平均 A⁻¹Re b 的高斯，逐軸以 erfc 估計兩側尾端。
    """
    batch = as_batch(u).values()
    norms = batch.norms()
    A = np.real(batch.Q)
    mean = np.linalg.solve(A, np.real(batch.b)[..., None])[..., 0]
    sigma = np.sqrt(np.diagonal(np.linalg.inv(2.0 * A), axis1=-2, axis2=-1))
    outside = 0.5 * (erfc((R - mean) / (np.sqrt(2.0) * sigma)) + erfc((R + mean) / (np.sqrt(2.0) * sigma)))
    fraction = np.minimum(outside.sum(axis=-1), 1.0)
    return float(np.sum(norms * np.sqrt(fraction)) ** 2)


def project(u, grid, check_tail=True):
    """
    由配置點取樣並以快速正弦轉換投影到基底

    Args:
        u: GaussianTerm、GaussianSum 或 GaussianBatch
        grid: SineGrid
        check_tail: 是否檢查盒外質量

    Returns:
        ndarray: 形狀 (n,)*d 的係數
    """
    if check_tail:
        mass = tail_mass(u, grid.R)
        if mass > TAIL_TOLERANCE:
            logger.warning(f"波包在盒外的質量 {mass:.3e} 超過 {TAIL_TOLERANCE:g}，盒子可能太小")
    samples = as_batch(u).evaluate_sum(grid.points()).reshape(grid.shape)
    return grid.to_coefficients(samples)


def l2_error(coeffs, u, grid):
    """
    ‖ψ − u‖，ψ 由係數給定、u 為波包和

    ‖ψ‖² 與 ⟨ψ, u⟩ 以 Parseval 在係數空間計算，‖u‖² 使用解析值。
    """
    U = as_batch(u)
    projected = project(U, grid, check_tail=False)
    norm_u = float(np.real(np.sum(pair_inner(U[:, None], U[None, :]))))
    value = np.sum(np.abs(coeffs) ** 2) - 2.0 * np.real(np.vdot(coeffs, projected)) + norm_u
    return float(np.sqrt(max(value, 0.0)))


def coefficient_distance(coarse, fine):
    """
    兩個不同解析度的解之差的 L² 範數

    相同 R 的基底函數與 n 無關，粗網格係數對應細網格的前 n 個模態。
    """
    n = coarse.shape[0]
    if fine.shape[0] < n:
        coarse, fine = fine, coarse
        n = coarse.shape[0]
    head = fine[(slice(0, n),) * fine.ndim]
    tail = np.sum(np.abs(fine) ** 2) - np.sum(np.abs(head) ** 2)
    return float(np.sqrt(np.sum(np.abs(coarse - head) ** 2) + max(tail, 0.0)))


def evaluate_series(coeffs, grid, points):
    """
    在任意點上計算正弦級數 Σ_k c_k Π_a φ_{k_a}(x_a)，φ_k(x) = R^{−1/2} sin(kπ(x+R)/2R)

    Args:
        coeffs: 形狀 (n,)*d 的係數
        grid: SineGrid
        points: 形狀 (npts, d) 的點 (1 維時可為 (npts,))

    Returns:
        ndarray: 各點的值
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    k = np.arange(1, grid.n + 1)
    basis = [np.sin(np.outer(points[:, a] + grid.R, k) * np.pi / (2.0 * grid.R)) / np.sqrt(grid.R)
             for a in range(grid.dim)]
    letters = string.ascii_lowercase[:grid.dim]
    subscripts = ",".join(f"z{l}" for l in letters) + "," + letters + "->z"
    return np.einsum(subscripts, *basis, coeffs)


def snapshot_header(grid, h, t):
    return f"dims={grid.dim} R={grid.R!r} h={h!r} t={t!r} modes={grid.n} dtype=complex128 byteorder=little\n"


def write_snapshot(path, coeffs, grid, h, t):
    """寫入一行 ASCII 標頭加上小端序 complex128 係數 (C 順序)"""
    with open(path, 'wb') as f:
        f.write(snapshot_header(grid, h, t).encode('ascii'))
        f.write(np.ascontiguousarray(coeffs, dtype='<c16').tobytes())


def read_snapshot(path):
    """
    讀回係數快照

    Returns:
        tuple: (header dict, 係數陣列)
    """
    with open(path, 'rb') as f:
        header = f.readline().decode('ascii').split()
        data = f.read()
    meta = dict(item.split('=', 1) for item in header)
    d, n = int(meta['dims']), int(meta['modes'])
    coeffs = np.frombuffer(data, dtype='<c16').reshape((n,) * d)
    return meta, coeffs.copy()
