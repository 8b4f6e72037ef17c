"""
時空高斯波包的貪婪求解器

在交互作用表象中求解 i∂tφ = e^{−itΔ} V e^{itΔ} φ：每次以度量預條件的下降法
最佳化一個時空波包 Γ(X)(t) = Σ_k ζ_k(t) γ(X_k)，再把它加入已知部分。
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from models.gaussian_algebra import (GaussianBatch, GaussianDomainError, as_batch,
                                     batch_to_parameters, evolve_batch, multiply_batches, pair_inner,
                                     parameter_count, parameter_slices, parameters_to_batch)
from numerics import dual
from numerics.block_linalg import BlockTridiagonal, IndefiniteMatrixError, block_cholesky
from numerics.time_grid import TimeGrid

# 設定日誌
logger = logging.getLogger(__name__)

# 黃金分割比例
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class GreedyConfig:
    """貪婪演算法參數 (寫入 run.json)"""
    max_terms: int = 30
    # F ≤ eps_stop 時停止
    eps_stop: float = 0.0
    max_iter: int = 200
    # ε_lim = eps_lim_factor·(1 + F(X_init))
    eps_lim_factor: float = 1e-10
    # 'metric' 使用 H̃(X)，'identity' 為一般梯度下降
    preconditioner: str = 'metric'
    regularization: float = 1e-10
    regularization_retries: int = 5
    alpha_max: float = 2.0
    line_search_tol: float = 1e-4
    max_halvings: int = 40
    min_width: float = 1e-8
    init_amplitude: float = 0.1
    max_retries: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.max_terms < 1:
            raise ValueError(f"max_terms 必須 >= 1: {self.max_terms}")
        if self.preconditioner not in ('metric', 'identity'):
            raise ValueError(f"未知的預條件子: {self.preconditioner}")
        if not self.alpha_max > 0:
            raise ValueError(f"alpha_max 必須為正: {self.alpha_max}")


@dataclass
class GaussianProblem:
    """
    交互作用表象中的波包問題

    u0 為初始條件 (GaussianTerm、GaussianSum 或批次)；potential 為純高斯項
    的列表 (GaussianTerm)，空列表代表 V ≡ 0。
    """
    u0: object
    potential: list
    grid: TimeGrid
    u0_parameters: np.ndarray = None
    u0_batch: GaussianBatch = field(init=False, repr=False)
    potential_batch: GaussianBatch = field(init=False, repr=False)

    def __post_init__(self):
        self.u0_batch = as_batch(self.u0)
        self.potential = list(self.potential)
        d = self.u0_batch.dim
        if self.potential:
            self.potential_batch = GaussianBatch.concatenate([as_batch(v) for v in self.potential])
            if self.potential_batch.dim != d or self.potential_batch.poly is not None:
                raise ValueError("位能必須是與初始條件同維度的純高斯和")
        else:
            self.potential_batch = None
        if self.u0_parameters is None and self.u0_batch.size == 1 and self.u0_batch.poly is None:
            self.u0_parameters = batch_to_parameters(self.u0_batch)[0]
        if self.u0_parameters is not None:
            self.u0_parameters = np.asarray(self.u0_parameters, dtype=float)

    @classmethod
    def from_parameters(cls, u0_parameters, potential, T, N):
        """以 γ 參數給定初始條件"""
        u0_parameters = np.asarray(u0_parameters, dtype=float)
        d = _dim_from_count(u0_parameters.shape[-1])
        return cls(parameters_to_batch(u0_parameters[None], d), potential, TimeGrid(T, N), u0_parameters)

    @property
    def dim(self):
        return self.u0_batch.dim

    @property
    def n_params(self):
        return parameter_count(self.dim)

    @property
    def u0_norm2(self):
        U = self.u0_batch
        return float(np.real(np.sum(pair_inner(U[:, None], U[None, :]))))

    def extended(self, X):
        """
        每個節點的擴充批次 E_k = [g_k, e^{−it_kΔ} V_j e^{it_kΔ} g_k (各 j)]

        殘差為 Σ_k ζ'_k Σ_p a_p E_k[p] + ζ_k Σ_p c_p E_k[p]，
        a = (i, 0, …)、c = (0, −1, …)。

        Args:
            X: 形狀 (N+1, m) 的參數，可為 Dual

        Returns:
            tuple: (E 形狀 (N+1, 1+J) 的批次, a, c)
        """
        g = parameters_to_batch(X, self.dim)
        if self.potential_batch is None:
            E = g[:, None]
            J = 0
        else:
            J = self.potential_batch.size
            times = self.grid.nodes[:, None]
            forward = evolve_batch(g, self.grid.nodes)
            products = multiply_batches(forward[:, None], self.potential_batch[None, :])
            back = evolve_batch(products, -times)
            E = GaussianBatch.concatenate([g[:, None], back], axis=1)
        a = np.zeros(1 + J, dtype=complex)
        c = np.zeros(1 + J, dtype=complex)
        a[0] = 1j
        c[1:] = -1.0
        return E, a, c

    def potential_value(self, points):
        """V 在點集上的值 (實數)"""
        points = np.asarray(points, dtype=float)
        if self.potential_batch is None:
            return np.zeros(points.shape[0])
        return np.real(self.potential_batch.evaluate_sum(points))


def _dim_from_count(m):
    for d in range(1, 8):
        if parameter_count(d) == m:
            return d
    raise ValueError(f"參數長度 {m} 不對應任何維度")


@dataclass
class SpaceTimeGaussian:
    """Γ(X)(t) = Σ_k ζ_k(t) γ(X_k)，X 形狀 (N+1, m)"""
    grid: TimeGrid
    X: np.ndarray
    dim: int = 1

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.shape != (self.grid.size, parameter_count(self.dim)):
            raise ValueError(f"參數形狀 {self.X.shape} 與時間網格或維度不符")

    def node_batch(self):
        return parameters_to_batch(self.X, self.dim)

    def evaluate(self, t, points):
        """在時間 t 與點集上計算 Γ(X)(t)"""
        weights = np.array([self.grid.hat(k, t) for k in range(self.grid.size)])
        values = self.node_batch().evaluate(points)
        return weights @ values


@dataclass
class GreedyState:
    """
    貪婪演算法的狀態

    pieces 為所有已接受項的擴充批次 (N+1, P')，係數 piece_a、piece_c；
    等同於累積的右端項 f = −Σ_j (i∂t − H) G_j，只附加、不壓縮。
    """
    problem: GaussianProblem
    terms: list = field(default_factory=list)
    pieces: GaussianBatch = field(default=None, repr=False)
    piece_a: np.ndarray = field(default=None, repr=False)
    piece_c: np.ndarray = field(default=None, repr=False)
    initial_pieces: GaussianBatch = field(default=None, repr=False)
    F_initial: float = None
    history: list = field(default_factory=list)
    stopped_reason: str = None

    def __post_init__(self):
        if self.F_initial is None:
            self.F_initial = self.problem.u0_norm2

    @property
    def n_terms(self):
        return len(self.terms)

    @property
    def F(self):
        """目前的殘差 F"""
        return self.history[-1] if self.history else self.F_initial

    def add_term(self, X, F):
        """接受一個新項並更新已知部分"""
        X = np.asarray(X, dtype=float)
        E, a, c = self.problem.extended(X)
        g0 = E[0:1, 0]
        if self.pieces is None:
            self.pieces, self.piece_a, self.piece_c = E, a, c
            self.initial_pieces = g0
        else:
            self.pieces = GaussianBatch.concatenate([self.pieces, E], axis=1)
            self.piece_a = np.concatenate([self.piece_a, a])
            self.piece_c = np.concatenate([self.piece_c, c])
            self.initial_pieces = GaussianBatch.concatenate([self.initial_pieces, g0])
        self.terms.append(X)
        self.history.append(float(F))

    def spacetime_terms(self):
        return [SpaceTimeGaussian(self.problem.grid, X, self.problem.dim) for X in self.terms]

    def to_dict(self):
        """檢查點格式 (浮點數以 JSON 精確往返)"""
        grid = self.problem.grid
        return {
            'version': 1,
            'dim': self.problem.dim,
            'T': grid.T,
            'N': grid.N,
            'terms': [X.tolist() for X in self.terms],
            'F_initial': self.F_initial,
            'history': list(self.history),
            'stopped_reason': self.stopped_reason,
        }

    @classmethod
    def from_dict(cls, data, problem):
        """由檢查點還原；問題的維度與時間網格必須一致"""
        grid = problem.grid
        if (data['dim'], float(data['T']), int(data['N'])) != (problem.dim, grid.T, grid.N):
            raise ValueError("檢查點的維度或時間網格與目前的問題不符")
        if len(data['terms']) != len(data['history']):
            raise ValueError("檢查點的項數與殘差紀錄長度不一致")
        state = cls(problem, F_initial=float(data['F_initial']))
        for X, F in zip(data['terms'], data['history']):
            state.add_term(np.array(X, dtype=float), F)
        state.stopped_reason = data.get('stopped_reason')
        return state


@dataclass
class OptimizationResult:
    """單項最佳化結果"""
    X: np.ndarray
    F: float
    F_init: float
    iterations: int
    converged: bool
    line_search_failed: bool = False
    eps: float = None
    history: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# 泛函 F 與梯度
# ---------------------------------------------------------------------------

def _band_tables(grid, offset):
    """(S, C_kl, C_lk, M)，左節點 k、右節點 k+offset"""
    S_d, S_u, S_l = grid.band('stiffness')
    C_d, C_u, C_l = grid.band('cross')
    M_d, M_u, M_l = grid.band('mass')
    if offset == 0:
        return S_d, C_d, C_d, M_d
    if offset == 1:
        return S_u, C_u, C_l, M_u
    return S_l, C_l, C_u, M_l


def _pair_weights(aL, cL, aR, cR, tables):
    S, Ckl, Clk, M = (np.asarray(x)[:, None, None] for x in tables)
    aL, cL = np.conj(aL), np.conj(cL)
    return (S * np.outer(aL, aR) + Ckl * np.outer(aL, cR)
            + Clk * np.outer(cL, aR) + M * np.outer(cL, cR))


def _band_sum(left, right, coeffs_left, coeffs_right, grid, offset):
    """
    Σ_pq W_kl[p, q]⟨left_k[p], right_l[q]⟩，對每個節點配對 (k, k+offset) 回傳一個值

    left、right 已依 offset 對齊 (長度相同)。
    """
    weights = _pair_weights(*coeffs_left, *coeffs_right, _band_tables(grid, offset))
    grams = pair_inner(left[:, :, None], right[:, None, :])
    return (grams * weights).sum(axis=(1, 2))


def _shift(batch, offset, side):
    """依 offset 取出左側 (side='L') 或右側 (side='R') 的節點切片"""
    if offset == 0:
        return batch
    if (offset == 1) == (side == 'L'):
        return batch[:-1]
    return batch[1:]


def _pad(batch, before, after):
    return batch.map(lambda x: dual.pad_directions(x, before, after))


def _real_tangent(x, n_dir):
    return np.real(dual.tangent(x, n_dir))


def min_width(X, d):
    """各節點寬度實部 A 的最小特徵值"""
    return float(np.min(parameters_to_batch(np.asarray(X, dtype=float), d).min_width_eigenvalue()))


def _evaluate(X, problem, state, gradient):
    grid = problem.grid
    T = grid.T
    d = problem.dim
    m = problem.n_params
    X = np.asarray(X, dtype=float)
    if X.shape != (grid.size, m):
        raise ValueError(f"參數形狀應為 {(grid.size, m)}，實際為 {X.shape}")
    if not min_width(X, d) > 0:
        raise GaussianDomainError("寬度參數必須為正定")

    E, a, c = problem.extended(dual.seed(X) if gradient else X)
    coeffs = (a, c)

    # 初始條件項 ‖g₀‖² − 2Re⟨r₀, g₀⟩，r₀ = u₀ − Σ 已知項的 g₀
    g0 = E[0:1, 0]
    initial = pair_inner(g0, g0).sum() - 2.0 * pair_inner(problem.u0_batch, g0).sum()
    if state is not None and state.initial_pieces is not None:
        initial = initial + 2.0 * pair_inner(state.initial_pieces, g0).sum()

    diag = _band_sum(E, E, coeffs, coeffs, grid, 0)
    if gradient:
        upper = _band_sum(_pad(E[:-1], 0, m), _pad(E[1:], m, 0), coeffs, coeffs, grid, 1)
    else:
        upper = _band_sum(E[:-1], E[1:], coeffs, coeffs, grid, 1)

    cross = {}
    if state is not None and state.pieces is not None:
        known = (state.piece_a, state.piece_c)
        for offset in (0, 1, -1):
            cross[offset] = _band_sum(_shift(state.pieces, offset, 'L'), _shift(E, offset, 'R'),
                                      known, coeffs, grid, offset)

    F_const = state.F if state is not None else problem.u0_norm2
    F = (F_const + float(np.real(dual.value(initial)))
         + T * float(np.real(np.sum(dual.value(diag))) + 2.0 * np.real(np.sum(dual.value(upper))))
         + 2.0 * T * sum(float(np.real(np.sum(dual.value(v)))) for v in cross.values()))
    if not gradient:
        return F, None

    grad = np.zeros((grid.size, m))
    grad[0] += _real_tangent(initial, m)
    grad += T * _real_tangent(diag, m).T
    upper_tan = _real_tangent(upper, 2 * m)
    grad[:-1] += 2.0 * T * upper_tan[:m].T
    grad[1:] += 2.0 * T * upper_tan[m:].T
    if cross:
        grad += 2.0 * T * _real_tangent(cross[0], m).T
        grad[1:] += 2.0 * T * _real_tangent(cross[1], m).T
        grad[:-1] += 2.0 * T * _real_tangent(cross[-1], m).T
    return F, grad


def eval_F(X, problem, state=None):
    """
    離散泛函 F(X) = ‖Σ_j G_j(0) + g₀ − u₀‖² + T‖Σ_j R_j + R(X)‖²_{L²(I×ℝ^d)}

    R(X) = Σ_k (iζ'_k − ζ_k H(t_k)) γ(X_k)；已知項 G_j 的部分由 state 累積，
    時間積分以帽函數積分表精確展開。

    Args:
        X: 形狀 (N+1, m) 的參數
        problem: GaussianProblem
        state: GreedyState，None 表示尚無已知項

    Returns:
        float: F(X)

    Raises:
        GaussianDomainError: 寬度參數非正定
    """
    return _evaluate(X, problem, state, gradient=False)[0]


def grad_F(X, problem, state=None):
    """
    以前向模式對偶數計算 ∇F(X)

    每個節點的 m 個參數共用同一組方向；相鄰節點配對時左右兩側的方向分開補零，
    因此一次掃描即得到所有節點的梯度。

    Returns:
        ndarray: 形狀 (N+1, m) 的梯度
    """
    return _evaluate(X, problem, state, gradient=True)[1]


def value_and_grad(X, problem, state=None):
    """同時回傳 (F, ∇F)"""
    return _evaluate(X, problem, state, gradient=True)


def eval_F_total(state):
    """
    由所有已接受項從頭計算 F (與逐項累加的值互為檢查)

    Returns:
        float: F(Σ_j G_j)
    """
    problem = state.problem
    if state.pieces is None:
        return problem.u0_norm2
    grid = problem.grid
    coeffs = (state.piece_a, state.piece_c)
    g0 = state.initial_pieces
    u0 = problem.u0_batch
    initial = (np.sum(pair_inner(g0[:, None], g0[None, :]))
               - 2.0 * np.real(np.sum(pair_inner(u0[:, None], g0[None, :])))
               + problem.u0_norm2)
    diag = _band_sum(state.pieces, state.pieces, coeffs, coeffs, grid, 0)
    upper = _band_sum(state.pieces[:-1], state.pieces[1:], coeffs, coeffs, grid, 1)
    quad = np.real(np.sum(diag)) + 2.0 * np.real(np.sum(upper))
    return float(np.real(initial) + grid.T * quad)


# ---------------------------------------------------------------------------
# 度量 H̃(X)
# ---------------------------------------------------------------------------

def _tangent_polynomials(X, problem):
    """
    ∂_i g_k = P_i(x)·exp(−½xᵀQx + bᵀx + c)，P_i = ρ_i + β_iᵀx − ½xᵀΛ_i x

    Returns:
        tuple: (單位振幅批次, ρ (N+1, m), β (N+1, m, d), Λ (N+1, m, d, d))
    """
    m = problem.n_params
    g = parameters_to_batch(dual.seed(np.asarray(X, dtype=float)), problem.dim)
    amp = dual.value(g.amp)
    rho = dual.tangent(g.amp, m) + amp * dual.tangent(g.c, m)
    beta = amp[None, :, None] * dual.tangent(g.b, m)
    Lam = amp[None, :, None, None] * dual.tangent(g.Q, m)
    unit = GaussianBatch(np.ones_like(amp), dual.value(g.c), dual.value(g.b), dual.value(g.Q))
    return unit, rho.T, np.swapaxes(beta, 0, 1), np.swapaxes(Lam, 0, 1)


def _pair_metric(unit_L, unit_R, poly_L, poly_R):
    """⟨∂_i g_L, ∂_j g_R⟩ 的閉式動差公式，回傳形狀 (n, m, m)"""
    rho_L, beta_L, Lam_L = (np.conj(x) for x in poly_L)
    rho_R, beta_R, Lam_R = poly_R
    Z = pair_inner(unit_L, unit_R)
    M = np.conj(unit_L.Q) + unit_R.Q
    Sigma = np.linalg.inv(M)
    mu = np.einsum('nab,nb->na', Sigma, np.conj(unit_L.b) + unit_R.b)

    def recenter(rho, beta, Lam):
        c0 = (rho + np.einsum('nia,na->ni', beta, mu)
              - 0.5 * np.einsum('na,niab,nb->ni', mu, Lam, mu))
        b0 = beta - np.einsum('niab,nb->nia', Lam, mu)
        return c0, b0, np.einsum('niab,nbc->niac', Lam, Sigma)

    c1, b1, L1S = recenter(rho_L, beta_L, Lam_L)
    c2, b2, L2S = recenter(rho_R, beta_R, Lam_R)
    t1 = np.trace(L1S, axis1=-2, axis2=-1)
    t2 = np.trace(L2S, axis1=-2, axis2=-1)
    E = (c1[:, :, None] * c2[:, None, :]
         - 0.5 * c1[:, :, None] * t2[:, None, :]
         - 0.5 * t1[:, :, None] * c2[:, None, :]
         + np.einsum('nia,nab,njb->nij', b1, Sigma, b2)
         + 0.25 * (t1[:, :, None] * t2[:, None, :] + 2.0 * np.einsum('niab,njba->nij', L1S, L2S)))
    return Z[:, None, None] * E


def metric(X, problem):
    """
    H̃(X) = Re ∂_{X₁}∂_{X₂} G(X, X)，G(X₁, X₂) = ⟨Γ(X₁)(0), Γ(X₂)(0)⟩ + T⟨i∂tΓ(X₁), i∂tΓ(X₂)⟩

    只有 (k, k) 與 (k, k±1) 區塊非零。

    Args:
        X: 形狀 (N+1, m) 的參數
        problem: GaussianProblem

    Returns:
        BlockTridiagonal: m×m 區塊的實對稱半正定矩陣
    """
    grid = problem.grid
    unit, rho, beta, Lam = _tangent_polynomials(X, problem)
    S_d, S_u, _ = grid.band('stiffness')

    w_diag = grid.T * S_d
    w_diag[0] += 1.0
    diag = np.real(w_diag[:, None, None] * _pair_metric(unit, unit, (rho, beta, Lam), (rho, beta, Lam)))
    off = np.real(grid.T * S_u[:, None, None] * _pair_metric(
        unit[:-1], unit[1:], (rho[:-1], beta[:-1], Lam[:-1]), (rho[1:], beta[1:], Lam[1:])))
    diag = 0.5 * (diag + np.swapaxes(diag, 1, 2))
    return BlockTridiagonal(diag, off)


def metric_form(X1, X2, problem):
    """
    G(X₁, X₂) = ⟨g₀(X₁), g₀(X₂)⟩ + T Σ_kl S_kl ⟨g_k(X₁), g_l(X₂)⟩

    H̃ 為其實部的混合二階導數；供測試以差分檢查。
    """
    grid = problem.grid
    g1 = parameters_to_batch(np.asarray(X1, dtype=float), problem.dim)
    g2 = parameters_to_batch(np.asarray(X2, dtype=float), problem.dim)
    S_d, S_u, S_l = grid.band('stiffness')
    total = pair_inner(g1[0:1], g2[0:1]).sum()
    total += grid.T * np.sum(S_d * pair_inner(g1, g2))
    total += grid.T * np.sum(S_u * pair_inner(g1[:-1], g2[1:]))
    total += grid.T * np.sum(S_l * pair_inner(g1[1:], g2[:-1]))
    return complex(total)


# ---------------------------------------------------------------------------
# 單項最佳化 (度量預條件下降 + 線搜尋)
# ---------------------------------------------------------------------------

def _search_direction(X, grad, problem, config):
    if config.preconditioner == 'identity':
        return grad.copy()
    H = metric(X, problem)
    lam = config.regularization * max(H.trace(), np.finfo(float).tiny) / H.dim
    for attempt in range(config.regularization_retries + 1):
        try:
            return block_cholesky(H.shifted(lam)).solve(grad)
        except IndefiniteMatrixError as e:
            logger.warning(f"度量矩陣第 {e.block_index} 個區塊分解失敗，正則化 λ={lam:.3e} 放大 100 倍重試")
            lam *= 100.0
    raise IndefiniteMatrixError(-1, "度量矩陣正則化後仍無法分解")


def _line_function(X, Y, problem, state, config):
    d = problem.dim

    def phi(alpha):
        Xa = X - alpha * Y
        if not min_width(Xa, d) > config.min_width:
            return np.inf
        try:
            F = eval_F(Xa, problem, state)
        except (GaussianDomainError, np.linalg.LinAlgError):
            return np.inf
        return F if np.isfinite(F) else np.inf

    return phi


def _line_search(X, Y, F0, problem, state, config):
    """
    α ∈ [0, α_max] 上的黃金分割搜尋，記錄最佳點；
    失敗時從 α = 1 起連續減半

    Returns:
        tuple: (α, F(X − αY))，找不到下降點時 α 為 None
    """
    phi = _line_function(X, Y, problem, state, config)
    a, b = 0.0, config.alpha_max
    c = b - GOLDEN * (b - a)
    e = a + GOLDEN * (b - a)
    fc, fe = phi(c), phi(e)
    best_alpha, best_F = (c, fc) if fc <= fe else (e, fe)
    while b - a > config.line_search_tol * config.alpha_max:
        if fc <= fe:
            b, e, fe = e, c, fc
            c = b - GOLDEN * (b - a)
            fc = phi(c)
            if fc < best_F:
                best_alpha, best_F = c, fc
        else:
            a, c, fc = c, e, fe
            e = a + GOLDEN * (b - a)
            fe = phi(e)
            if fe < best_F:
                best_alpha, best_F = e, fe
    if best_F < F0:
        return best_alpha, best_F

    alpha = 1.0
    for _ in range(config.max_halvings):
        F = phi(alpha)
        if F < F0:
            return alpha, F
        alpha *= 0.5
    return None, F0


def optimize_term(problem, init, state=None, config=None):
    """
    單一時空波包的最佳化：X ← X − α·H̃(X)⁻¹∇F(X)，直到 ε = Y·∇F ≤ ε_lim

    Args:
        problem: GaussianProblem
        init: 初始參數 (N+1, m)
        state: GreedyState (已知項)
        config: GreedyConfig

    Returns:
        OptimizationResult: 最佳化結果；線搜尋失敗時 line_search_failed 為 True
    """
    config = config or GreedyConfig()
    X = np.array(init, dtype=float)
    F, grad = value_and_grad(X, problem, state)
    F_init = F
    eps_lim = config.eps_lim_factor * (1.0 + abs(F_init))
    history = [F]
    converged = failed = False
    eps = None
    iterations = 0
    for iterations in range(config.max_iter + 1):
        Y = _search_direction(X, grad, problem, config)
        eps = float(np.sum(Y * grad))
        if eps <= eps_lim:
            converged = True
            break
        if iterations == config.max_iter:
            break
        alpha, F_new = _line_search(X, Y, F, problem, state, config)
        if alpha is None:
            failed = True
            logger.warning(f"線搜尋失敗 (迭代 {iterations}, F={F:.6e})，保留目前參數")
            break
        X = X - alpha * Y
        F, grad = value_and_grad(X, problem, state)
        history.append(F)
        logger.debug(f"最佳化迭代 {iterations + 1}: α={alpha:.4g}, F={F:.6e}, ε={eps:.3e}")
    return OptimizationResult(X, F, F_init, iterations, converged, failed, eps, history)


# ---------------------------------------------------------------------------
# 貪婪外迴圈
# ---------------------------------------------------------------------------

def initial_guess(state, config=None):
    """
    新項的初始參數

    第一項每個節點都取 u₀ 的參數；之後每個節點取已知項中範數最大的
    H 像 (e^{−itΔ}V e^{itΔ}g) 並把振幅縮為 init_amplitude 倍。
    """
    config = config or GreedyConfig()
    problem = state.problem
    n = problem.grid.size
    if state.pieces is None:
        if problem.u0_parameters is None:
            raise ValueError("初始條件不是單一純高斯，無法作為第一項的初始值")
        return np.tile(problem.u0_parameters, (n, 1))
    columns = np.flatnonzero(state.piece_c != 0)
    if columns.size == 0:
        columns = np.arange(state.piece_a.size)
    norms = state.pieces[:, columns].norms()
    dominant = columns[np.argmax(norms, axis=1)]
    X = batch_to_parameters(state.pieces[np.arange(n), dominant])
    X[:, 0:2] *= config.init_amplitude
    return X


def _perturbed(X, d, rng):
    """沿所有節點一致地擾動中心、動量與相位"""
    sl = parameter_slices(d)
    X = X.copy()
    X[:, sl['q']] += rng.normal(0.0, 0.5, d)
    X[:, sl['p']] += rng.normal(0.0, 0.25, d)
    phase = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
    amp = (X[:, 0] + 1j * X[:, 1]) * phase
    X[:, 0], X[:, 1] = amp.real, amp.imag
    return X


def greedy(problem, max_terms=None, eps_stop=None, config=None, state=None):
    """
    貪婪演算法：逐項最小化 F(Σ_j G_j + G)

    Args:
        problem: GaussianProblem
        max_terms: 項數上限，None 使用 config.max_terms
        eps_stop: F 的停止門檻，None 使用 config.eps_stop
        config: GreedyConfig
        state: 續算用的 GreedyState

    Returns:
        GreedyState: stopped_reason 為 'max_terms'、'tolerance' 或 'no_decrease'
    """
    config = config or GreedyConfig()
    max_terms = config.max_terms if max_terms is None else max_terms
    eps_stop = config.eps_stop if eps_stop is None else eps_stop
    if max_terms < 1:
        raise ValueError(f"max_terms 必須 >= 1: {max_terms}")
    state = state or GreedyState(problem)
    d = problem.dim
    logger.info(f"貪婪演算法開始: 已有 {state.n_terms} 項, F={state.F:.6e}")

    state.stopped_reason = 'max_terms'
    while state.n_terms < max_terms:
        if state.F <= eps_stop:
            state.stopped_reason = 'tolerance'
            break
        term_index = state.n_terms
        base = initial_guess(state, config)
        accepted = None
        for attempt in range(config.max_retries + 1):
            init = base if attempt == 0 else _perturbed(
                base, d, np.random.default_rng([config.seed, term_index, attempt]))
            try:
                result = optimize_term(problem, init, state, config)
            except (GaussianDomainError, np.linalg.LinAlgError) as e:
                logger.warning(f"第 {term_index + 1} 項第 {attempt + 1} 次嘗試失敗: {str(e)}")
                continue
            if result.F < state.F - 1e-12 * (1.0 + state.F):
                accepted = result
                break
            logger.warning(f"第 {term_index + 1} 項第 {attempt + 1} 次嘗試沒有使 F 下降，重新初始化")
        if accepted is None:
            state.stopped_reason = 'no_decrease'
            logger.warning(f"第 {term_index + 1} 項在 {config.max_retries} 次重試後仍無下降，停止")
            break
        state.add_term(accepted.X, accepted.F)
        logger.info(f"第 {state.n_terms} 項: F={accepted.F:.6e} (迭代 {accepted.iterations} 次)")
    else:
        if state.F <= eps_stop:
            state.stopped_reason = 'tolerance'
    return state


# ---------------------------------------------------------------------------
# 物理表象
# ---------------------------------------------------------------------------

def node_terms(state, n_terms=None):
    """各節點前 n_terms 項的 γ(X_k)，形狀 (N+1, n_terms)；None 表示全部"""
    n_terms = state.n_terms if n_terms is None else int(n_terms)
    if not 1 <= n_terms <= state.n_terms:
        raise ValueError(f"項數 {n_terms} 超出範圍 [1, {state.n_terms}]")
    return parameters_to_batch(np.stack(state.terms[:n_terms], axis=1), state.problem.dim)


def reconstruct_physical(state, n_terms=None):
    """
    物理表象的節點解 ψ(t_k) = e^{it_kΔ} Σ_j g^j_k (只取前 n_terms 項)

    Returns:
        GaussianBatch: 形狀 (N+1, n_terms)，第 k 列之和為 ψ(t_k)
    """
    return evolve_batch(node_terms(state, n_terms), state.problem.grid.nodes[:, None])


def node_norms(state, n_terms=None):
    """各節點的 ‖ψ(t_k)‖"""
    psi = reconstruct_physical(state, n_terms)
    grams = pair_inner(psi[:, :, None], psi[:, None, :])
    return np.sqrt(np.maximum(np.real(grams.sum(axis=(1, 2))), 0.0))


def density(state, k, points, n_terms=None):
    """節點 k 的機率密度 |ψ(t_k, x)|²"""
    psi = evolve_batch(node_terms(state, n_terms)[k], state.problem.grid.nodes[k])
    return np.abs(psi.evaluate_sum(points)) ** 2
