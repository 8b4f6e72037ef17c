"""
多項式複高斯波包的閉式運算

批次的標準形式 (GaussianBatch)：
    amp · P(x) · exp(−½ xᵀQx + bᵀx + c)
其中 Q = A + iB (A 對稱正定、B 對稱)，c 為複數對數常數。
amp、c、b、Q 可以是 ndarray 或對偶數 (numerics.dual.Dual)；含多項式的運算只接受 ndarray。
"""
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve

from numerics import dual

# 設定日誌
logger = logging.getLogger(__name__)

# 每個方向的多項式次數上限
DEFAULT_DEGREE_CAP = 4


class GaussianDomainError(ValueError):
    """寬度矩陣實部非正定，或多項式次數超過上限"""


def parameter_count(d):
    """d 維波包的實參數個數：振幅 2、A 與 B 各 d(d+1)/2、q 與 p 各 d"""
    return 2 + d * (d + 1) + 2 * d


def parameter_slices(d):
    """
    參數向量各欄位的切片

    Returns:
        dict: 'amp'、'A'、'B'、'q'、'p' 對應的 slice
    """
    n_tri = d * (d + 1) // 2
    start_B = 2 + n_tri
    start_q = start_B + n_tri
    return {
        'amp': slice(0, 2),
        'A': slice(2, start_B),
        'B': slice(start_B, start_q),
        'q': slice(start_q, start_q + d),
        'p': slice(start_q + d, start_q + 2 * d),
    }


def parameter_layout(d):
    """參數排列的文字描述，寫入 run.json"""
    upper = [f"{i}{j}" for i, j in zip(*np.triu_indices(d))]
    names = ['Re a', 'Im a']
    names += [f"A{ij}" for ij in upper]
    names += [f"B{ij}" for ij in upper]
    names += [f"q{i}" for i in range(d)]
    names += [f"p{i}" for i in range(d)]
    return "γ(v)(x) = (v0+i·v1)·exp(−½(x−q)ᵀ(A+iB)(x−q))·exp(i·p·x); v = [" + ", ".join(names) + "]"


def _symmetric_basis(d):
    """上三角參數到對稱矩陣 (展平) 的線性映射，形狀 (d(d+1)/2, d·d)"""
    rows, cols = np.triu_indices(d)
    basis = np.zeros((len(rows), d * d))
    for t, (i, j) in enumerate(zip(rows, cols)):
        basis[t, i * d + j] = 1.0
        basis[t, j * d + i] = 1.0
    return basis


# ---------------------------------------------------------------------------
# 多項式工具 (係數陣列以多重指標索引，形狀 (ν₁+1, …, ν_d+1))
# ---------------------------------------------------------------------------

def poly_from_dict(coefficients, d):
    """
    由 {多重指標: 係數} 建立係數陣列

    Args:
        coefficients: dict，鍵為長度 d 的整數 tuple
        d: 維度

    Returns:
        ndarray: 係數陣列；空 dict 代表常數 1
    """
    if not coefficients:
        return np.ones((1,) * d, dtype=complex)
    shape = tuple(max(idx[a] for idx in coefficients) + 1 for a in range(d))
    P = np.zeros(shape, dtype=complex)
    for idx, coef in coefficients.items():
        if len(idx) != d:
            raise ValueError(f"多重指標 {idx} 的長度與維度 {d} 不符")
        P[tuple(idx)] += coef
    return P


def _trim(P):
    """去除各軸尾端全為零的切片"""
    P = np.asarray(P)
    for axis in range(P.ndim):
        while P.shape[axis] > 1:
            last = np.take(P, P.shape[axis] - 1, axis=axis)
            if np.any(last != 0):
                break
            P = np.take(P, np.arange(P.shape[axis] - 1), axis=axis)
    return P


def _check_cap(P, cap):
    if cap is not None and max(P.shape) - 1 > cap:
        raise GaussianDomainError(f"多項式次數 {max(P.shape) - 1} 超過上限 {cap}")
    return P


def _pad_to(P, shape):
    widths = [(0, s - n) for n, s in zip(P.shape, shape)]
    return np.pad(P, widths)


def _poly_mul(P1, P2):
    return _trim(convolve(P1, P2, method='direct'))


def _poly_times_x(P, a):
    widths = [(0, 0)] * P.ndim
    widths[a] = (1, 0)
    return np.pad(P, widths)


def _poly_derivative(P, a):
    if P.shape[a] == 1:
        return np.zeros_like(P)
    powers = np.arange(1, P.shape[a]).reshape([-1 if ax == a else 1 for ax in range(P.ndim)])
    D = np.take(P, np.arange(1, P.shape[a]), axis=a) * powers
    return D


def _poly_add(P1, P2):
    shape = tuple(max(n1, n2) for n1, n2 in zip(P1.shape, P2.shape))
    return _pad_to(P1, shape) + _pad_to(P2, shape)


def _poly_evaluate(P, points):
    """在點集 points (npts, d) 上計算多項式值"""
    total = np.zeros(points.shape[0], dtype=complex)
    for idx in zip(*np.nonzero(P)):
        total += P[idx] * np.prod(points ** np.asarray(idx), axis=1)
    return total


def gaussian_moments(mu, Sigma, shape):
    """
    複高斯測度的動差表 E[x^α]，α 逐軸小於 shape

    使用遞迴 E[x^{β+e_a}] = μ_a E[x^β] + Σ_b Σ_ab β_b E[x^{β−e_b}]。

    Args:
        mu: 平均值 (d,)
        Sigma: 共變異數 (d, d)，可為複數對稱矩陣
        shape: 動差表形狀

    Returns:
        ndarray: 動差表
    """
    d = len(mu)
    moments = np.zeros(shape, dtype=complex)
    indices = sorted(itertools.product(*[range(n) for n in shape]), key=sum)
    for alpha in indices:
        if sum(alpha) == 0:
            moments[alpha] = 1.0
            continue
        a = next(ax for ax in range(d) if alpha[ax] > 0)
        beta = list(alpha)
        beta[a] -= 1
        value = mu[a] * moments[tuple(beta)]
        for b in range(d):
            if beta[b] > 0:
                lower = list(beta)
                lower[b] -= 1
                value += Sigma[a, b] * beta[b] * moments[tuple(lower)]
        moments[alpha] = value
    return moments


# ---------------------------------------------------------------------------
# 標準形式批次
# ---------------------------------------------------------------------------

@dataclass
class GaussianBatch:
    """
    高斯波包批次 (標準形式)

    amp、c 的形狀為前置形狀 S；b 為 S+(d,)；Q 為 S+(d, d)；
    poly 為 None (全為純高斯) 或 S+(ν₁+1, …, ν_d+1) 的係數陣列。
    """
    amp: object
    c: object
    b: object
    Q: object
    poly: np.ndarray = None

    @property
    def dim(self):
        return dual.value(self.Q).shape[-1]

    @property
    def shape(self):
        return dual.value(self.amp).shape

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def is_dual(self):
        return any(dual.is_dual(x) for x in (self.amp, self.c, self.b, self.Q))

    def __getitem__(self, index):
        if not isinstance(index, tuple):
            index = (index,)
        poly = None if self.poly is None else self.poly[index]
        return GaussianBatch(self.amp[index], self.c[index], self.b[index], self.Q[index], poly)

    def map(self, fn):
        """對 amp、c、b、Q 四個欄位套用同一函數"""
        return GaussianBatch(fn(self.amp), fn(self.c), fn(self.b), fn(self.Q), self.poly)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        d = self.dim
        shape = tuple(shape)
        poly = None
        if self.poly is not None:
            poly = self.poly.reshape(shape + self.poly.shape[len(self.shape):])
        return GaussianBatch(self.amp.reshape(shape), self.c.reshape(shape),
                             self.b.reshape(shape + (d,)), self.Q.reshape(shape + (d, d)), poly)

    def flatten(self):
        return self.reshape((self.size,))

    def scaled(self, factor):
        return GaussianBatch(self.amp * factor, self.c, self.b, self.Q, self.poly)

    def values(self):
        """去除對偶部分"""
        return GaussianBatch(dual.value(self.amp), dual.value(self.c), dual.value(self.b),
                             dual.value(self.Q), self.poly)

    def min_width_eigenvalue(self):
        """各元素寬度實部 A 的最小特徵值"""
        A = np.real(dual.value(self.Q))
        A = 0.5 * (A + np.swapaxes(A, -1, -2))
        return np.linalg.eigvalsh(A)[..., 0]

    def evaluate(self, points):
        """
        在點集上計算各元素的值

        Args:
            points: 形狀 (npts, d) 的實數點集 (1 維時可為 (npts,))

        Returns:
            ndarray: 形狀 shape+(npts,)
        """
        batch = self.values()
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        flat = batch.flatten()
        out = np.empty((flat.size, points.shape[0]), dtype=complex)
        for n in range(flat.size):
            quad = np.einsum('pi,ij,pj->p', points, flat.Q[n], points)
            exponent = -0.5 * quad + points @ flat.b[n] + flat.c[n]
            out[n] = flat.amp[n] * np.exp(exponent)
            if flat.poly is not None:
                out[n] *= _poly_evaluate(flat.poly[n], points)
        return out.reshape(batch.shape + (points.shape[0],))

    def evaluate_sum(self, points):
        """所有元素之和在點集上的值 (逐項累加，節省記憶體)"""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        flat = self.values().flatten()
        total = np.zeros(points.shape[0], dtype=complex)
        for n in range(flat.size):
            total += flat[n:n + 1].evaluate(points)[0]
        return total

    def norms(self):
        """各元素的 L² 範數"""
        return np.sqrt(np.maximum(np.real(pair_inner(self.values(), self.values())), 0.0))

    @classmethod
    def concatenate(cls, batches, axis=0):
        """沿前置軸串接批次；若有任一批次含多項式，其餘補為常數 1"""
        if any(b.poly is not None for b in batches):
            d = batches[0].dim
            polys = []
            for b in batches:
                p = b.poly if b.poly is not None else np.ones(b.shape + (1,) * d, dtype=complex)
                polys.append(p)
            pshape = tuple(max(p.shape[-d + a] for p in polys) for a in range(d))
            polys = [np.pad(p, [(0, 0)] * (p.ndim - d) + [(0, s - p.shape[-d + a]) for a, s in enumerate(pshape)])
                     for p in polys]
            poly = np.concatenate(polys, axis=axis)
        else:
            poly = None
        return cls(dual.concatenate([b.amp for b in batches], axis),
                   dual.concatenate([b.c for b in batches], axis),
                   dual.concatenate([b.b for b in batches], axis),
                   dual.concatenate([b.Q for b in batches], axis),
                   poly)


# ---------------------------------------------------------------------------
# 物理參數形式的單一波包與波包和
# ---------------------------------------------------------------------------

@dataclass
class GaussianTerm:
    """
    a · P(x) · exp(−½(x−q)ᵀQ(x−q)) · exp(i p·(x−q))，Q = A + iB

    poly 為係數陣列 (見 poly_from_dict) 或 None (常數 1)。
    """
    a: complex
    q: np.ndarray
    p: np.ndarray
    A: np.ndarray
    B: np.ndarray
    poly: np.ndarray = None
    degree_cap: int = field(default=DEFAULT_DEGREE_CAP, repr=False)

    def __post_init__(self):
        self.q = np.atleast_1d(np.asarray(self.q, dtype=float))
        d = self.q.shape[0]
        self.p = np.atleast_1d(np.asarray(self.p, dtype=float))
        self.A = np.asarray(self.A, dtype=float).reshape(d, d)
        self.B = np.asarray(self.B, dtype=float).reshape(d, d)
        self.a = complex(self.a)
        if self.p.shape != (d,):
            raise ValueError(f"動量維度 {self.p.shape} 與中心維度 {d} 不符")
        if not np.allclose(self.A, self.A.T) or not np.allclose(self.B, self.B.T):
            raise GaussianDomainError("寬度矩陣 A、B 必須對稱")
        smallest = np.linalg.eigvalsh(self.A)[0]
        if not smallest > 0:
            raise GaussianDomainError(f"寬度矩陣 A 非正定 (最小特徵值 {smallest:.3e})")
        if isinstance(self.poly, dict):
            self.poly = poly_from_dict(self.poly, d)
        if self.poly is not None:
            poly = np.asarray(self.poly, dtype=complex)
            if poly.ndim != d:
                raise ValueError(f"多項式係數陣列維度 {poly.ndim} 與空間維度 {d} 不符")
            self.poly = _check_cap(_trim(poly), self.degree_cap)

    @property
    def dim(self):
        return self.q.shape[0]

    @property
    def Q(self):
        return self.A + 1j * self.B

    def to_batch(self):
        """轉為長度 1 的標準形式批次"""
        Q = self.Q
        Qq = Q @ self.q
        b = Qq + 1j * self.p
        c = -0.5 * self.q @ Qq - 1j * self.p @ self.q
        poly = None if self.poly is None else self.poly[None]
        return GaussianBatch(np.array([self.a]), np.array([c]), b[None], Q[None], poly)

    @classmethod
    def from_batch(cls, batch, degree_cap=DEFAULT_DEGREE_CAP):
        """由長度 1 的標準形式批次還原物理參數"""
        batch = batch.values().flatten()
        if batch.size != 1:
            raise ValueError(f"只能由單一元素批次建立，實際 {batch.size} 個")
        Q, b = batch.Q[0], batch.b[0]
        A, B = Q.real, Q.imag
        q = np.linalg.solve(A, b.real)
        p = b.imag - B @ q
        a = batch.amp[0] * np.exp(batch.c[0] + 0.5 * q @ Q @ q + 1j * p @ q)
        poly = None if batch.poly is None else batch.poly[0]
        return cls(a, q, p, 0.5 * (A + A.T), 0.5 * (B + B.T), poly, degree_cap)

    def value(self, x):
        return self.to_batch().evaluate(x)[0]


@dataclass
class GaussianSum:
    """同維度波包之和"""
    terms: list

    def __post_init__(self):
        self.terms = list(self.terms)
        if self.terms and len({t.dim for t in self.terms}) != 1:
            raise ValueError("波包和中的各項維度必須相同")

    @property
    def dim(self):
        return self.terms[0].dim

    def to_batch(self):
        return GaussianBatch.concatenate([t.to_batch() for t in self.terms])

    def value(self, x):
        return self.to_batch().evaluate_sum(x)


def as_batch(u):
    """GaussianTerm、GaussianSum 或 GaussianBatch 統一轉為一維批次"""
    if isinstance(u, GaussianBatch):
        return u.flatten() if len(u.shape) != 1 else u
    if isinstance(u, (GaussianTerm, GaussianSum)):
        return u.to_batch()
    raise TypeError(f"無法轉換為高斯批次: {type(u).__name__}")


# ---------------------------------------------------------------------------
# 代數運算
# ---------------------------------------------------------------------------

def _broadcast_poly(batch, shape, d):
    if batch.poly is None:
        return None
    lead = batch.shape
    return np.broadcast_to(batch.poly, shape + batch.poly.shape[len(lead):])


def pair_inner(U, V):
    """
    逐元素內積 ⟨U, V⟩_{L²}，前置形狀依 numpy 規則廣播，對 U 共軛線性

    Args:
        U: GaussianBatch
        V: GaussianBatch

    Returns:
        ndarray 或 Dual: 廣播後形狀的複數內積

    Raises:
        GaussianDomainError: 合併後的二次型實部非正定
    """
    d = U.dim
    if V.dim != d:
        raise ValueError(f"維度不符: {d} 與 {V.dim}")
    M = dual.conj(U.Q) + V.Q
    beta = dual.conj(U.b) + V.b
    Minv = dual.inv(M)
    mu = (Minv @ beta[..., None])[..., 0]
    quad = (beta[..., None, :] @ mu[..., None])[..., 0, 0]
    prefactor = (2.0 * np.pi) ** (d / 2.0) * dual.inv_sqrt_det(M)
    base = dual.conj(U.amp) * V.amp * prefactor * dual.exp(dual.conj(U.c) + V.c + 0.5 * quad)
    if U.poly is None and V.poly is None:
        return base
    if dual.is_dual(base):
        raise TypeError("含多項式的內積不支援對偶數")

    shape = base.shape
    Pu = _broadcast_poly(U, shape, d)
    Pv = _broadcast_poly(V, shape, d)
    mu_b = np.broadcast_to(mu, shape + (d,))
    Sigma_b = np.broadcast_to(Minv, shape + (d, d))
    expectation = np.empty(shape, dtype=complex)
    one = np.ones((1,) * d, dtype=complex)
    for idx in np.ndindex(*shape):
        pu = one if Pu is None else Pu[idx]
        pv = one if Pv is None else Pv[idx]
        R = convolve(np.conj(pu), pv, method='direct')
        moments = gaussian_moments(mu_b[idx], Sigma_b[idx], R.shape)
        expectation[idx] = np.sum(R * moments)
    return base * expectation


def inner(u, v):
    """
    ⟨u, v⟩_{L²(ℝ^d)}，u、v 可為 GaussianTerm、GaussianSum 或 GaussianBatch

    Returns:
        complex: 內積 (u 為共軛線性的一側)；輸入帶對偶數時回傳 Dual 純量
    """
    U, V = as_batch(u), as_batch(v)
    grams = pair_inner(U[:, None], V[None, :])
    if dual.is_dual(grams):
        return grams.sum()
    return complex(np.sum(grams))


def gram(u, v):
    """Gram 矩陣 G[i, j] = ⟨u_i, v_j⟩"""
    U, V = as_batch(u), as_batch(v)
    return pair_inner(U[:, None], V[None, :])


def multiply_batches(U, V, degree_cap=DEFAULT_DEGREE_CAP):
    """逐元素點乘積，前置形狀廣播；寬度相加、多項式相乘"""
    if U.dim != V.dim:
        raise ValueError(f"維度不符: {U.dim} 與 {V.dim}")
    amp = U.amp * V.amp
    product = GaussianBatch(amp, U.c + V.c, U.b + V.b, U.Q + V.Q)
    if U.poly is None and V.poly is None:
        return product
    if product.is_dual:
        raise TypeError("含多項式的乘積不支援對偶數")
    d = U.dim
    shape = dual.value(amp).shape
    Pu = _broadcast_poly(U, shape, d)
    Pv = _broadcast_poly(V, shape, d)
    one = np.ones((1,) * d, dtype=complex)
    polys = []
    for idx in np.ndindex(*shape):
        pu = one if Pu is None else Pu[idx]
        pv = one if Pv is None else Pv[idx]
        polys.append(_check_cap(_poly_mul(pu, pv), degree_cap))
    product.poly = _stack_polys(polys, shape, d)
    return product


def _stack_polys(polys, shape, d):
    pshape = tuple(max(p.shape[a] for p in polys) for a in range(d)) if polys else (1,) * d
    stacked = np.stack([_pad_to(p, pshape) for p in polys]) if polys else np.ones((0,) + pshape, dtype=complex)
    return stacked.reshape(shape + pshape)


def multiply(u, v, degree_cap=DEFAULT_DEGREE_CAP):
    """
    兩個波包的點乘積

    Args:
        u, v: GaussianTerm 或 GaussianBatch

    Returns:
        與輸入同型別的乘積 (兩者皆為 GaussianTerm 時回傳 GaussianTerm)
    """
    if isinstance(u, GaussianTerm) and isinstance(v, GaussianTerm):
        product = multiply_batches(u.to_batch(), v.to_batch(), degree_cap)
        return GaussianTerm.from_batch(product, degree_cap)
    return multiply_batches(as_batch(u), as_batch(v), degree_cap)


def evolve_batch(U, s, degree_cap=DEFAULT_DEGREE_CAP):
    """
    自由傳播 e^{isΔ} (H₀ = −Δ)，s 可逐元素不同

    寬度 Q ↦ Q(I + 2isQ)⁻¹，線性項 b ↦ (I + 2isQ)⁻¹b，
    常數 c ↦ c + is·bᵀ(I + 2isQ)⁻¹b，振幅乘上 det(I + 2isQ)^{−1/2} (主值)。
    多項式經 x_a ↦ x_a + 2is∂_a 的共軛作用轉換，次數不變。

    Args:
        U: GaussianBatch
        s: 傳播時間，可廣播至 U.shape

    Returns:
        GaussianBatch: 傳播後的批次
    """
    d = U.dim
    s = np.asarray(s, dtype=float)
    s_mat = np.broadcast_to(s, U.shape)[..., None, None]
    system = np.eye(d) + 2j * s_mat * U.Q
    K = dual.inv(system)
    Q_t = U.Q @ K
    Kb = (K @ U.b[..., None])[..., 0]
    bKb = (U.b[..., None, :] @ Kb[..., None])[..., 0, 0]
    c_t = U.c + 1j * np.broadcast_to(s, U.shape) * bKb
    amp_t = U.amp * dual.inv_sqrt_det(system)
    evolved = GaussianBatch(amp_t, c_t, Kb, Q_t)
    if U.poly is None:
        return evolved
    if evolved.is_dual:
        raise TypeError("含多項式的自由傳播不支援對偶數")

    s_b = np.broadcast_to(s, U.shape)
    polys = []
    for idx in np.ndindex(*U.shape):
        polys.append(_check_cap(
            _evolve_poly(U.poly[idx], s_b[idx], K[idx], Kb[idx]), degree_cap))
    evolved.poly = _stack_polys(polys, U.shape, d)
    return evolved


def _evolve_poly(P, s, K, Kb):
    """
    計算 e^{isΔ}(P·g) = P(x + 2is∂)(g_t) 的多項式部分

    (x_a + 2is∂_a)(R·g_t) = [(Kx)_a R + 2is·(Kb)_a R + 2is ∂_a R]·g_t
    """
    d = P.ndim
    result = np.zeros((1,) * d, dtype=complex)

    def apply_direction(R, a):
        out = 2j * s * Kb[a] * R
        out = _poly_add(out, 2j * s * _poly_derivative(R, a))
        for c_dir in range(d):
            if K[a, c_dir] != 0:
                out = _poly_add(out, K[a, c_dir] * _poly_times_x(R, c_dir))
        return out

    for alpha in zip(*np.nonzero(P)):
        R = np.ones((1,) * d, dtype=complex)
        for a in range(d):
            for _ in range(alpha[a]):
                R = apply_direction(R, a)
        result = _poly_add(result, P[alpha] * R)
    return _trim(result)


def free_evolve(u, t, sign=1, degree_cap=DEFAULT_DEGREE_CAP):
    """
    e^{±itΔ} u 的閉式傳播

    Args:
        u: GaussianTerm、GaussianSum 或 GaussianBatch
        t: 時間
        sign: +1 或 −1

    Returns:
        與輸入同型別的傳播結果
    """
    if sign not in (1, -1):
        raise ValueError(f"sign 必須為 +1 或 −1: {sign}")
    s = sign * float(t)
    if isinstance(u, GaussianTerm):
        return GaussianTerm.from_batch(evolve_batch(u.to_batch(), s, degree_cap), degree_cap)
    if isinstance(u, GaussianSum):
        return GaussianSum([free_evolve(term, t, sign, degree_cap) for term in u.terms])
    return evolve_batch(u, s, degree_cap)


# ---------------------------------------------------------------------------
# 參數化 γ 與對偶數提升
# ---------------------------------------------------------------------------

def parameters_to_batch(X, d):
    """
    參數向量轉為標準形式批次，支援對偶數

    γ(v)(x) = (v0 + i v1)·exp(−½(x−q)ᵀ(A+iB)(x−q))·exp(i p·x)
    對應 b = Qq + ip、c = −½qᵀQq。

    Args:
        X: 形狀 (..., m) 的參數陣列或 Dual
        d: 空間維度

    Returns:
        GaussianBatch: 前置形狀為 X 去掉最後一軸
    """
    m = parameter_count(d)
    if dual.value(X).shape[-1] != m:
        raise ValueError(f"參數長度應為 {m}，實際為 {dual.value(X).shape[-1]}")
    sl = parameter_slices(d)
    lead = dual.value(X).shape[:-1]
    basis = _symmetric_basis(d)
    amp = X[..., 0] + 1j * X[..., 1]
    A = (X[..., sl['A']] @ basis).reshape(lead + (d, d))
    B = (X[..., sl['B']] @ basis).reshape(lead + (d, d))
    Q = A + 1j * B
    q = X[..., sl['q']]
    p = X[..., sl['p']]
    Qq = (Q @ q[..., None])[..., 0]
    b = Qq + 1j * p
    c = -0.5 * (q[..., None, :] @ Qq[..., None])[..., 0, 0]
    return GaussianBatch(amp, c, b, Q)


def batch_to_parameters(batch):
    """
    標準形式批次 (純高斯) 轉回參數向量

    Returns:
        ndarray: 形狀 batch.shape+(m,)
    """
    batch = batch.values()
    d = batch.dim
    Q, b = batch.Q, batch.b
    A, B = Q.real, Q.imag
    q = np.linalg.solve(A, b.real[..., None])[..., 0]
    p = b.imag - (B @ q[..., None])[..., 0]
    qQq = (q[..., None, :] @ Q @ q[..., None])[..., 0, 0]
    a = batch.amp * np.exp(batch.c + 0.5 * qQq)
    rows, cols = np.triu_indices(d)
    sl = parameter_slices(d)
    X = np.empty(batch.shape + (parameter_count(d),))
    X[..., 0] = a.real
    X[..., 1] = a.imag
    X[..., sl['A']] = A[..., rows, cols]
    X[..., sl['B']] = B[..., rows, cols]
    X[..., sl['q']] = q
    X[..., sl['p']] = p
    return X


def term_to_parameters(term):
    """GaussianTerm (純高斯) 轉為 γ 參數向量"""
    if term.poly is not None and _trim(term.poly).size > 1:
        raise GaussianDomainError("參數化只適用於純高斯")
    return batch_to_parameters(term.to_batch())[0]


def dual_lift(u, direction):
    """
    將波包提升為對偶數批次，對單一參數方向播種

    Args:
        u: GaussianTerm (純高斯) 或參數向量
        direction: γ 參數排列中的索引，或長度 m 的方向向量

    Returns:
        GaussianBatch: 長度 1、帶一個切方向的對偶數批次；
        之後的 inner、multiply_batches、evolve_batch 皆會傳遞導數
    """
    if isinstance(u, GaussianTerm):
        params = term_to_parameters(u)
        d = u.dim
    else:
        params = np.asarray(u, dtype=float)
        d = next(k for k in range(1, 8) if parameter_count(k) == params.shape[-1])
    m = params.shape[-1]
    seed = np.zeros(m)
    if np.isscalar(direction) or np.ndim(direction) == 0:
        seed[int(direction)] = 1.0
    else:
        seed[:] = direction
    X = dual.Dual(params[None], seed[None, None, :])
    return parameters_to_batch(X, d)
