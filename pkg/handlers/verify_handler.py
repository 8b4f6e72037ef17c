"""
驗證模組：以獨立的數值方法檢查各模組 (積分表、高斯內積、自由傳播、梯度、度量、區塊求解、泛函、單調性)
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from models.gaussian_algebra import GaussianTerm, free_evolve, inner, pair_inner, parameter_slices
from models.matrix_model import HamiltonianTerm, MatrixExperiment, TwoSidedHamiltonian, pathological_experiment
from models.wavepacket_model import gaussian_potential, initial_parameters
from numerics.block_linalg import BlockTridiagonal, block_cholesky, pcg
from numerics.time_grid import TimeGrid
from references.matrix_reference import ReferenceConfig, rk4_reference
from references.spectral_reference import SineGrid, SpectralPropagator, l2_error, project
from solvers.als_solver import ALSConfig, SpaceTimeLowRank, als, eval_FN
from solvers.greedy_solver import GaussianProblem, GreedyConfig, eval_F, grad_F, metric, optimize_term

# 設定日誌
logger = logging.getLogger(__name__)


@dataclass
class Check:
    """單一檢查：value 必須不超過 tolerance"""
    description: str
    value: float
    tolerance: float

    @property
    def passed(self):
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)


@dataclass
class SuiteResult:
    name: str
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(check.passed for check in self.checks)

    def add(self, description, value, tolerance):
        self.checks.append(Check(description, float(value), float(tolerance)))

    def to_dict(self):
        return {
            'suite': self.name,
            'passed': self.passed,
            'checks': [{'description': c.description, 'value': c.value, 'tolerance': c.tolerance,
                        'passed': c.passed} for c in self.checks],
        }


# ---------------------------------------------------------------------------
# 隨機資料
# ---------------------------------------------------------------------------

def random_term(rng, d, degree=0):
    """寬度實部特徵值落在 [0.5, 2.5] 的隨機波包，可附加隨機多項式"""
    M = rng.normal(size=(d, d))
    Qo, _ = np.linalg.qr(M)
    A = Qo @ np.diag(rng.uniform(0.5, 2.5, d)) @ Qo.T
    Bm = rng.normal(scale=0.5, size=(d, d))
    poly = None
    if degree > 0:
        poly = {tuple(idx): complex(rng.normal(), rng.normal())
                for idx in np.ndindex(*([degree + 1] * d)) if sum(idx) <= degree}
    return GaussianTerm(complex(rng.normal(), rng.normal()), rng.uniform(-2.0, 2.0, d),
                        rng.uniform(-2.0, 2.0, d), 0.5 * (A + A.T), 0.5 * (Bm + Bm.T), poly)


def small_wavepacket_problem(d=1, N=4, T=1.0, with_potential=True):
    """供驗證與測試使用的小型波包問題"""
    q = np.full(d, 1.0)
    p = np.full(d, -0.5)
    potential = gaussian_potential([1.0], [np.zeros(d)]) if with_potential else []
    return GaussianProblem.from_parameters(initial_parameters(q, p), potential, T, N)


def random_parameters(problem, rng, scale=0.1):
    """在 u₀ 參數附近隨機擾動的時空參數 (寬度維持正定)"""
    X = np.tile(problem.u0_parameters, (problem.grid.size, 1))
    X = X + scale * rng.normal(size=X.shape)
    sl = parameter_slices(problem.dim)
    X[:, sl['A']] = np.tile(problem.u0_parameters[sl['A']], (problem.grid.size, 1)) * rng.uniform(
        0.8, 1.2, (problem.grid.size, 1))
    return X


def small_matrix_experiment(rng, L=6, T=1.0, N=10):
    """兩項、帶 H₀ 共軛的小型隨機矩陣實驗"""
    def hermitian(n):
        M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        return 0.5 * (M + M.conj().T)

    hamiltonian = TwoSidedHamiltonian(
        [HamiltonianTerm(lambda t: 1.0, hermitian(L), hermitian(L)),
         HamiltonianTerm(lambda t: np.cos(t), hermitian(L), np.eye(L))],
        h0x=rng.uniform(0.0, 1.0, L), h0y=rng.uniform(0.0, 1.0, L))
    U0 = rng.normal(size=(L, 2)) @ rng.normal(size=(2, L))
    return MatrixExperiment('verify', hamiltonian, U0, T, N, ranks=[1, 2])


# ---------------------------------------------------------------------------
# 各驗證項目
# ---------------------------------------------------------------------------

def suite_hat_integrals(rng):
    """帽函數積分表 vs 逐區間 Gauss-Legendre 積分"""
    result = SuiteResult('hat-integrals')
    xg, wg = np.polynomial.legendre.leggauss(4)
    for T, N in [(1.0, 2), (5.0, 200), (float(rng.uniform(0.5, 3.0)), int(rng.integers(3, 40)))]:
        grid = TimeGrid(T, N)
        worst = 0.0
        for k in range(grid.size):
            for l in range(max(0, k - 1), min(grid.size, k + 2)):
                quad = {'mass': 0.0, 'stiffness': 0.0, 'cross': 0.0}
                for j in range(max(0, max(k, l) - 1), min(N - 1, min(k, l)) + 1):
                    a, b = j * grid.dt, (j + 1) * grid.dt
                    t = 0.5 * (b - a) * xg + 0.5 * (a + b)
                    w = 0.5 * (b - a) * wg
                    # 區間內部的導數與端點慣例無關
                    dk = grid.hat_derivative(k, np.full_like(t, 0.5 * (a + b)))
                    dl = grid.hat_derivative(l, np.full_like(t, 0.5 * (a + b)))
                    quad['mass'] += np.sum(w * grid.hat(k, t) * grid.hat(l, t))
                    quad['stiffness'] += np.sum(w * dk * dl)
                    quad['cross'] += np.sum(w * dk * grid.hat(l, t))
                worst = max(worst,
                            abs(quad['mass'] - grid.mass(k, l)) / max(1.0, abs(grid.mass(k, l))),
                            abs(quad['stiffness'] - grid.stiffness(k, l)) / max(1.0, abs(grid.stiffness(k, l))),
                            abs(quad['cross'] - grid.cross(k, l)))
        result.add(f"T={T:.4g}, N={N} 積分表最大誤差", worst, 1e-13)
    return result


def _quad_inner(u, v):
    center = 0.5 * (u.q[0] + v.q[0])

    def part(fn):
        return integrate.quad(lambda x: fn(np.conj(u.value(np.array([x]))[0]) * v.value(np.array([x]))[0]),
                              center - 20.0, center + 20.0, limit=400, epsabs=1e-15, epsrel=1e-13)[0]

    return part(np.real) + 1j * part(np.imag)


def _trapezoid_inner(u, v, half_width=12.0, h=0.03):
    axis = np.arange(-half_width, half_width + h / 2, h)
    X, Y = np.meshgrid(axis, axis, indexing='ij')
    points = np.stack([X.ravel(), Y.ravel()], axis=1)
    return np.sum(np.conj(u.value(points)) * v.value(points)) * h * h


def suite_gaussian_overlaps(rng, cases=100):
    """高斯內積閉式解 vs 數值積分 (一維 quad、二維梯形法)"""
    result = SuiteResult('gaussian-overlaps')
    worst_1d = worst_2d = 0.0
    for case in range(cases):
        if case % 5 == 4:
            u, v = random_term(rng, 2, degree=1), random_term(rng, 2, degree=1)
            exact, numeric = inner(u, v), _trapezoid_inner(u, v)
            scale = np.sqrt(abs(inner(u, u)) * abs(inner(v, v)))
            worst_2d = max(worst_2d, abs(exact - numeric) / scale)
        else:
            u, v = random_term(rng, 1, degree=case % 3), random_term(rng, 1, degree=(case + 1) % 3)
            exact, numeric = inner(u, v), _quad_inner(u, v)
            scale = np.sqrt(abs(inner(u, u)) * abs(inner(v, v)))
            worst_1d = max(worst_1d, abs(exact - numeric) / scale)
    result.add("一維內積相對誤差", worst_1d, 1e-10)
    result.add("二維內積相對誤差", worst_2d, 1e-10)
    return result


def suite_free_evolution(rng, cases=20):
    """自由傳播的么正性，以及與無位能頻譜傳播的比較"""
    result = SuiteResult('free-evolution')
    worst_norm = 0.0
    for _ in range(cases):
        u = random_term(rng, int(rng.integers(1, 4)), degree=int(rng.integers(0, 3)))
        t = float(rng.uniform(-3.0, 3.0))
        norm0 = np.real(inner(u, u))
        evolved = free_evolve(u, t)
        worst_norm = max(worst_norm, abs(np.real(inner(evolved, evolved)) - norm0) / norm0)
    result.add("‖e^{itΔ}u‖ 相對變化", worst_norm, 1e-12)

    grid = SineGrid(1, 30.0, 512)
    worst_spec = 0.0
    for _ in range(5):
        u = GaussianTerm(1.0, [rng.uniform(-2.0, 2.0)], [rng.uniform(-1.5, 1.5)], [[rng.uniform(0.7, 1.5)]], [[0.0]])
        t = float(rng.uniform(0.5, 2.0))
        propagator = SpectralPropagator(grid, [], t / 10)
        c = propagator.run(project(u, grid), t, 1, 10)
        worst_spec = max(worst_spec, l2_error(c, free_evolve(u, t), grid))
    result.add("自由傳播 vs 頻譜傳播 L² 誤差", worst_spec, 1e-6)
    return result


def suite_gradient(rng, cases=50):
    """grad_F vs 中央差分 (隨機方向的方向導數)"""
    result = SuiteResult('gradient')
    problem = small_wavepacket_problem(d=1, N=4)
    worst = 0.0
    eps = 1e-6
    for _ in range(cases):
        X = random_parameters(problem, rng)
        V = rng.normal(size=X.shape)
        directional = np.sum(grad_F(X, problem) * V)
        fd = (eval_F(X + eps * V, problem) - eval_F(X - eps * V, problem)) / (2.0 * eps)
        worst = max(worst, abs(directional - fd) / max(1.0, abs(fd)))
    result.add("方向導數相對誤差", worst, 1e-5)
    return result


def suite_metric(rng, cases=10):
    """H̃(X) 的最小特徵值 ≥ −1e-10·‖H̃‖"""
    result = SuiteResult('metric')
    worst = -np.inf
    for d in (1, 2):
        problem = small_wavepacket_problem(d=d, N=4)
        for _ in range(cases):
            H = metric(random_parameters(problem, rng), problem).to_dense()
            eigenvalues = np.linalg.eigvalsh(0.5 * (H + H.T))
            worst = max(worst, -eigenvalues[0] / np.linalg.norm(H, 2))
    result.add("−λ_min(H̃)/‖H̃‖", worst, 1e-10)
    return result


def suite_block_solves(rng):
    """區塊 Cholesky 與 PCG vs 稠密求解"""
    result = SuiteResult('block-solves')
    n, b = 12, 5
    diag = rng.normal(size=(n, b, b)) + 1j * rng.normal(size=(n, b, b))
    diag = np.einsum('kij,klj->kil', diag, diag.conj()) + 4.0 * b * np.eye(b)
    offdiag = rng.normal(size=(n - 1, b, b)) + 1j * rng.normal(size=(n - 1, b, b))
    M = BlockTridiagonal(diag, offdiag)
    dense = M.to_dense()
    rhs = rng.normal(size=(n, b)) + 1j * rng.normal(size=(n, b))
    exact = np.linalg.solve(dense, rhs.reshape(-1)).reshape(n, b)
    x = block_cholesky(M).solve(rhs)
    result.add("區塊 Cholesky 相對誤差", np.linalg.norm(x - exact) / np.linalg.norm(exact), 1e-10)
    y, _ = pcg(M.matvec, rhs, tol=1e-12, max_iter=500)
    result.add("PCG 相對誤差", np.linalg.norm(y - exact) / np.linalg.norm(exact), 1e-10)
    return result


def _FN_quadrature(w, experiment, points=4):
    grid = TimeGrid(experiment.T, experiment.N)
    W = w.products()
    HW = np.stack([experiment.hamiltonian.apply(t, W[k]) for k, t in enumerate(grid.nodes)])
    xg, wg = np.polynomial.legendre.leggauss(points)
    total = 0.0
    for j in range(grid.N):
        a, b = grid.nodes[j], grid.nodes[j + 1]
        for x, weight in zip(xg, wg):
            t = 0.5 * (b - a) * x + 0.5 * (a + b)
            s = (t - a) / (b - a)
            residual = 1j * (W[j + 1] - W[j]) / grid.dt - ((1.0 - s) * HW[j] + s * HW[j + 1])
            total += 0.5 * (b - a) * weight * np.linalg.norm(residual) ** 2
    return np.linalg.norm(W[0] - experiment.U0) ** 2 + grid.T * total


def _F_quadrature(X, problem, points=4):
    grid = problem.grid
    E, a, c = problem.extended(X)
    u0 = problem.u0_batch
    g0 = E[0:1, 0]
    initial = (np.sum(pair_inner(g0[:, None], g0[None, :])) - 2.0 * np.real(np.sum(pair_inner(u0[:, None], g0[None, :])))
               + problem.u0_norm2)
    xg, wg = np.polynomial.legendre.leggauss(points)
    total = 0.0
    for j in range(grid.N):
        left, right = grid.nodes[j], grid.nodes[j + 1]
        pieces = E[j:j + 2].flatten()
        for x, weight in zip(xg, wg):
            t = 0.5 * (right - left) * x + 0.5 * (left + right)
            s = (t - left) / grid.dt
            coeffs = np.concatenate([-a / grid.dt + (1.0 - s) * c, a / grid.dt + s * c])
            G = pair_inner(pieces[:, None], pieces[None, :])
            total += 0.5 * (right - left) * weight * np.real(np.conj(coeffs) @ G @ coeffs)
    return float(np.real(initial) + grid.T * total)


def suite_functionals(rng):
    """F_N 與 F(X) vs 時間方向的 Gauss-Legendre 積分"""
    result = SuiteResult('functional-quadrature')
    experiment = small_matrix_experiment(rng)
    grid = TimeGrid(experiment.T, experiment.N)
    L = experiment.dims[0]
    w = SpaceTimeLowRank(grid, rng.normal(size=(grid.size, L, 2)) + 1j * rng.normal(size=(grid.size, L, 2)),
                         rng.normal(size=(grid.size, L, 2)))
    exact, quad = eval_FN(w, experiment), _FN_quadrature(w, experiment)
    result.add("F_N 相對誤差", abs(exact - quad) / max(1.0, abs(quad)), 1e-8)

    problem = small_wavepacket_problem(d=1, N=5)
    X = random_parameters(problem, rng)
    exact, quad = eval_F(X, problem), _F_quadrature(X, problem)
    result.add("F(X) 相對誤差", abs(exact - quad) / max(1.0, abs(quad)), 1e-8)
    return result


def suite_monotonicity(rng):
    """ALS 每個半步與貪婪最佳化每個接受步的目標值不增加"""
    result = SuiteResult('monotonicity')
    experiment = small_matrix_experiment(rng)
    _, history = als(experiment, 2, sweeps=4, config=ALSConfig(cg_tol=1e-12, cg_max_iter=2000, rel_decrease_tol=0.0))
    values = [h.F_N for h in history]
    worst = max([values[i + 1] - values[i] - 1e-10 * (1.0 + values[i]) for i in range(len(values) - 1)],
                default=0.0)
    result.add("ALS 半步 F_N 最大增量", max(worst, 0.0), 0.0)

    problem = small_wavepacket_problem(d=1, N=4)
    init = np.tile(problem.u0_parameters, (problem.grid.size, 1))
    opt = optimize_term(problem, init, config=GreedyConfig(max_iter=20))
    increases = [opt.history[i + 1] - opt.history[i] for i in range(len(opt.history) - 1)]
    result.add("貪婪最佳化接受步 F 最大增量", max(increases + [0.0]), 0.0)
    return result


def suite_closed_form(rng):
    """病態實驗：2000 步 RK4 vs 閉式解 cos(t)U₀ − i sin(t)H U₀ H"""
    result = SuiteResult('closed-form')
    experiment = pathological_experiment(1)
    reference = rk4_reference(experiment, steps=2000, config=ReferenceConfig(check_self_convergence=False))
    exact = np.stack([experiment.exact_solution(t) for t in reference.times])
    result.add("sup-node Frobenius 誤差", np.max(np.linalg.norm(reference.values - exact, axis=(1, 2))), 1e-8)
    return result


SUITES = {
    'hat-integrals': suite_hat_integrals,
    'gaussian-overlaps': suite_gaussian_overlaps,
    'free-evolution': suite_free_evolution,
    'gradient': suite_gradient,
    'metric': suite_metric,
    'block-solves': suite_block_solves,
    'functional-quadrature': suite_functionals,
    'monotonicity': suite_monotonicity,
    'closed-form': suite_closed_form,
}


def run_suite(name, seed=0):
    """
    執行一個或全部驗證項目

    Args:
        name: SUITES 中的名稱，或 'all'
        seed: 亂數種子

    Returns:
        list: SuiteResult 列表

    Raises:
        KeyError: 未知的驗證項目
    """
    names = list(SUITES) if name == 'all' else [name]
    for n in names:
        if n not in SUITES:
            raise KeyError(f"未知的驗證項目: {n} (可用: {', '.join(SUITES)}, all)")
    results = []
    for n in names:
        rng = np.random.default_rng([seed, list(SUITES).index(n)])
        suite = SUITES[n](rng)
        for check in suite.checks:
            level = logging.INFO if check.passed else logging.ERROR
            logger.log(level, f"[{n}] {check.description}: {check.value:.3e} (容許 {check.tolerance:.1e})")
        logger.info(f"[{n}] {'通過' if suite.passed else '失敗'}")
        results.append(suite)
    return results
