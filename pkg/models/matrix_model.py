"""
矩陣值薛丁格方程模型：雙側 Hamiltonian 與兩個矩陣實驗
"""
import logging
from dataclasses import dataclass, field

import numpy as np

# 設定日誌
logger = logging.getLogger(__name__)

# 實驗使用的亂數產生器名稱，寫入 run.json
RNG_NAME = 'numpy.random.PCG64'


def constant_one(t):
    return 1.0


def cosine_switch(t):
    """χ(t) = (1 + cos 2πt) / 2"""
    return 0.5 * (1.0 + np.cos(2.0 * np.pi * t))


def cosine_switch_complement(t):
    """1 − χ(t)"""
    return 1.0 - cosine_switch(t)


@dataclass(frozen=True)
class HamiltonianTerm:
    """單一項 χ(t)·L M R"""
    chi: object
    L: np.ndarray
    R: np.ndarray


@dataclass
class TwoSidedHamiltonian:
    """
    時間相依的雙側算子 M ↦ Σ_j χ_j(t)·(e^{itH₀x} L_j e^{−itH₀x}) M (e^{itH₀y} R_j e^{−itH₀y})

    H₀x、H₀y 為對角矩陣，以向量儲存；共軛作用逐元素計算
    L[a, b]·e^{it(d_a − d_b)}，不需矩陣指數。
    """
    terms: list
    h0x: np.ndarray = None
    h0y: np.ndarray = None

    def __post_init__(self):
        if not self.terms:
            raise ValueError("Hamiltonian 至少需要一項")
        Lx = self.terms[0].L.shape[0]
        Ly = self.terms[0].R.shape[0]
        for term in self.terms:
            if term.L.shape != (Lx, Lx) or term.R.shape != (Ly, Ly):
                raise ValueError("各項的 L、R 形狀必須一致")
        if self.h0x is not None:
            self.h0x = np.asarray(self.h0x, dtype=float)
        if self.h0y is not None:
            self.h0y = np.asarray(self.h0y, dtype=float)

    @property
    def dims(self):
        return self.terms[0].L.shape[0], self.terms[0].R.shape[0]

    @classmethod
    def zero(cls, Lx, Ly):
        """恆為零的算子"""
        return cls([HamiltonianTerm(constant_one, np.zeros((Lx, Lx)), np.zeros((Ly, Ly)))])

    @classmethod
    def left_only(cls, L, Ly, chi=constant_one):
        """只作用在左側的算子 M ↦ χ(t) L M"""
        return cls([HamiltonianTerm(chi, np.asarray(L), np.eye(Ly))])

    def conjugated(self, t):
        """
        計算時間 t 的各項係數與共軛後的矩陣

        Returns:
            list: [(χ_j(t), L_j(t), R_j(t)), ...]
        """
        out = []
        for term in self.terms:
            L = _conjugate(term.L, self.h0x, t)
            R = _conjugate(term.R, self.h0y, t)
            out.append((float(term.chi(t)), L, R))
        return out

    def apply(self, t, M):
        """
        計算 𝕳(t, M)

        Args:
            t: 時間
            M: L_x×L_y 矩陣，或前置批次軸的矩陣堆疊

        Returns:
            ndarray: 與 M 同形狀
        """
        M = np.asarray(M)
        Lx, Ly = self.dims
        if M.shape[-2:] != (Lx, Ly):
            raise ValueError(f"矩陣形狀 {M.shape[-2:]} 與算子維度 {(Lx, Ly)} 不符")
        out = np.zeros(M.shape, dtype=np.result_type(M, complex))
        for chi, L, R in self.conjugated(t):
            if chi != 0.0:
                out += chi * (L @ M @ R)
        return out

    def node_operator(self, times):
        """預先計算多個時間點的共軛矩陣，供整條時間網格批次套用"""
        return NodeOperator(self, np.asarray(times, dtype=float))


@dataclass
class NodeOperator:
    """
    Hamiltonian 在一組時間節點上的批次形式：(𝕳_k M_k)_k

    coeffs 形狀 (n_terms, n_nodes)；left、right 形狀 (n_terms, n_nodes, L, L)。
    """
    hamiltonian: TwoSidedHamiltonian
    times: np.ndarray
    coeffs: np.ndarray = field(init=False, repr=False)
    left: np.ndarray = field(init=False, repr=False)
    right: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        H = self.hamiltonian
        self.coeffs = np.array([[float(term.chi(t)) for t in self.times] for term in H.terms])
        self.left = np.stack([
            np.stack([_conjugate(term.L, H.h0x, t) for t in self.times]) for term in H.terms])
        self.right = np.stack([
            np.stack([_conjugate(term.R, H.h0y, t) for t in self.times]) for term in H.terms])

    def apply(self, Ms):
        """
        逐節點套用：out_k = Σ_j χ_j(t_k) L_j(t_k) M_k R_j(t_k)

        Args:
            Ms: 形狀 (n_nodes, L_x, L_y)

        Returns:
            ndarray: 同形狀
        """
        Ms = np.asarray(Ms)
        out = np.zeros(Ms.shape, dtype=np.result_type(Ms, complex))
        for j in range(len(self.coeffs)):
            out += self.coeffs[j][:, None, None] * (self.left[j] @ Ms @ self.right[j])
        return out


def _conjugate(L, h0, t):
    if h0 is None:
        return np.asarray(L, dtype=complex)
    phase = np.exp(1j * t * h0)
    return phase[:, None] * L * np.conj(phase)[None, :]


@dataclass
class MatrixExperiment:
    """
    矩陣實驗設定

    U0 是求解器使用的初始條件 (可能已截斷並加入雜訊)；
    U0_reference 是參考解使用的完整初始條件。
    """
    name: str
    hamiltonian: TwoSidedHamiltonian
    U0: np.ndarray
    T: float
    N: int
    ranks: list
    seed: int = 0
    noise: float = 0.0
    U0_factors: tuple = None
    U0_reference: np.ndarray = None
    closed_form: object = field(default=None, repr=False)

    def __post_init__(self):
        self.U0 = np.asarray(self.U0, dtype=complex)
        if self.U0_reference is None:
            self.U0_reference = self.U0
        Lx, Ly = self.hamiltonian.dims
        if self.U0.shape != (Lx, Ly):
            raise ValueError(f"初始條件形狀 {self.U0.shape} 與算子維度 {(Lx, Ly)} 不符")
        if not self.ranks or any(not 1 <= r <= min(Lx, Ly) for r in self.ranks):
            raise ValueError(f"秩列表 {self.ranks} 超出範圍 [1, {min(Lx, Ly)}]")

    @property
    def dims(self):
        return self.hamiltonian.dims

    def exact_solution(self, t):
        """有閉式解時回傳 U(t)，否則為 None"""
        if self.closed_form is None:
            return None
        return self.closed_form(t)

    def to_config(self):
        """序列化為設定檔鍵值 (與 handlers.config_handler 的格式一致)"""
        return {
            'EXPERIMENT': self.name,
            'SEED': str(self.seed),
            'PROBLEM_T': repr(float(self.T)),
            'PROBLEM_N': str(self.N),
            'ALS_RANKS': ",".join(str(r) for r in self.ranks),
            'DF_NOISE': repr(float(self.noise)),
        }


def _symmetric_tridiagonal(rng, L):
    diag = rng.uniform(0.0, 1.0, L)
    off = rng.uniform(0.0, 1.0, L - 1)
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def random_experiment(seed, T=5.0, N=200, L=40, ranks=None):
    """
    隨機矩陣實驗

    亂數抽取順序固定為：H₀x、H₁x、H₂x、H₀y、H₁y、H₂y、X₀、Y₀，
    全部來自 uniform[0, 1]。

    Args:
        seed: 亂數種子
        T: 終止時間
        N: 時間區間數
        L: 矩陣維度 L_x = L_y

    Returns:
        MatrixExperiment: 實驗設定
    """
    rng = np.random.default_rng(seed)
    h0x = rng.uniform(0.0, 1.0, L)
    h1x = _symmetric_tridiagonal(rng, L)
    h2x = _symmetric_tridiagonal(rng, L)
    h0y = rng.uniform(0.0, 1.0, L)
    h1y = _symmetric_tridiagonal(rng, L)
    h2y = _symmetric_tridiagonal(rng, L)
    X0 = rng.uniform(0.0, 1.0, (L, 1))
    Y0 = rng.uniform(0.0, 1.0, (L, 1))

    hamiltonian = TwoSidedHamiltonian(
        [HamiltonianTerm(cosine_switch, h1x, h1y),
         HamiltonianTerm(cosine_switch_complement, h2x, h2y)],
        h0x=h0x, h0y=h0y)
    logger.info(f"建立隨機矩陣實驗: L={L}, T={T}, N={N}, seed={seed}")
    return MatrixExperiment(
        name='als-random', hamiltonian=hamiltonian, U0=X0 @ Y0.T, T=T, N=N,
        ranks=list(ranks) if ranks is not None else list(range(1, 11)),
        seed=seed, U0_factors=(X0.astype(complex), Y0.astype(complex)))


def block_swap(L):
    """[[0, I], [I, 0]]"""
    half = L // 2
    H = np.zeros((L, L))
    H[:half, half:] = np.eye(half)
    H[half:, :half] = np.eye(half)
    return H


def pathological_experiment(r, noise=0.0, seed=0, L=20, T=2.0, N=200):
    """
    病態實驗：i∂tU = H_x U H_y，右端項完全落在切空間的正交補

    求解器的初始條件為 U_{0,x}U_{0,y}ᵀ，U_{0,x} = [D_r; 0]、U_{0,y} = [I_r; 0]，
    兩個因子各加上 uniform[0, ε] 雜訊；參考解從完整的 U₀ = diag(1, e⁻¹, …) 出發。

    Args:
        r: 秩
        noise: 雜訊幅度 ε
        seed: 雜訊的亂數種子

    Returns:
        MatrixExperiment: 實驗設定
    """
    if L % 2 != 0:
        raise ValueError(f"L 必須為偶數: {L}")
    if int(r) != r or not 1 <= r <= L:
        raise ValueError(f"秩 {r} 超出範圍 [1, {L}]")
    if noise < 0:
        raise ValueError(f"雜訊幅度必須非負: {noise}")
    r = int(r)
    H = block_swap(L)
    decay = np.exp(-np.arange(L, dtype=float))
    U0_full = np.diag(decay).astype(complex)

    U0x = np.zeros((L, r))
    U0x[:r, :r] = np.diag(decay[:r])
    U0y = np.zeros((L, r))
    U0y[:r, :r] = np.eye(r)
    if noise > 0:
        rng = np.random.default_rng(seed)
        U0x = U0x + rng.uniform(0.0, noise, (L, r))
        U0y = U0y + rng.uniform(0.0, noise, (L, r))

    def closed_form(t):
        # H² = I ⇒ U(t) = cos t·U₀ − i sin t·H U₀ H
        return np.cos(t) * U0_full - 1j * np.sin(t) * (H @ U0_full @ H)

    hamiltonian = TwoSidedHamiltonian([HamiltonianTerm(constant_one, H, H)])
    return MatrixExperiment(
        name='als-pathological', hamiltonian=hamiltonian, U0=U0x @ U0y.T, T=T, N=N,
        ranks=[r], seed=seed, noise=float(noise),
        U0_factors=(U0x.astype(complex), U0y.astype(complex)),
        U0_reference=U0_full, closed_form=closed_form)
