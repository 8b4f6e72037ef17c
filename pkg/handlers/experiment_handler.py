"""
實驗執行模組：重現四個內建實驗並輸出曲線、檢查點與 run.json
"""
import os
import time
import logging
import platform
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from handlers.utils import (PhaseTimer, format_lines, get_timestamp, load_greedy_checkpoint, package_versions,
                            prepare_output_dirs, render_summary, save_als_checkpoint, save_greedy_checkpoint,
                            write_curve, write_json)
from models.gaussian_algebra import GaussianDomainError
from models.matrix_model import RNG_NAME, pathological_experiment, random_experiment
from models.wavepacket_model import WavepacketExperiment
from numerics.block_linalg import ConvergenceError
from references.matrix_reference import (best_rank_error, node_errors, rk4_reference,
                                         singular_value_curves)
from references.spectral_reference import (SineGrid, SpectralPropagator, coefficient_distance, evaluate_series,
                                           l2_error, project, write_snapshot)
from solvers.als_solver import ALSProblem, als
from solvers.greedy_solver import GreedyState, density, greedy, node_norms, reconstruct_physical
from solvers.projector_splitting import propagate
from templates.curve_headers import singular_value_columns

# 設定日誌
logger = logging.getLogger(__name__)

# 視為數值失敗的例外 (結束碼 5)
NUMERICAL_ERRORS = (ConvergenceError, np.linalg.LinAlgError, GaussianDomainError)


def _map(fn, items, threads):
    """依序或以執行緒池執行各分支，結果順序與輸入相同"""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# 矩陣實驗
# ---------------------------------------------------------------------------

def run_als_random(config, out_dir, timer, threads=1):
    """
    隨機矩陣實驗：各秩的 ALS、投影分裂 (DF) 與截斷 SVD 誤差

    Returns:
        tuple: (結果摘要 dict, 輸出檔案列表)
    """
    p = config.problem
    experiment = random_experiment(config.seed, T=p['T'], N=p['N'], L=p['L'], ranks=config.ranks)
    outputs = []

    with timer.measure('reference'):
        reference = rk4_reference(experiment, config=config.reference)
    count = min(max(config.ranks) + 1, p['L'])
    sv = singular_value_curves(reference, count)
    outputs.append(write_curve(out_dir, 'singular_values',
                               [[t] + list(row) for t, row in zip(reference.times, sv)],
                               columns=singular_value_columns(count)))

    problem = ALSProblem(experiment)

    def arm(r):
        with timer.measure('als') as als_time:
            w, history = als(problem, r, config=config.als)
        with timer.measure('ksl') as ksl_time:
            trajectory = propagate(experiment, r, config=config.ksl)
        with timer.measure('svd'):
            svd_curve = best_rank_error(reference, r)
        save_als_checkpoint(os.path.join(out_dir, 'checkpoints', f"als_rank{r}.json"), w,
                            [vars(h) for h in history])
        logger.info(f"秩 {r} 完成: ALS {als_time['seconds']:.2f} 秒, DF {ksl_time['seconds']:.2f} 秒")
        return {
            'rank': r,
            'als': node_errors(reference, w.products()),
            'df': node_errors(reference, trajectory.dense()),
            'svd': svd_curve,
            'history': history,
        }

    arms = _map(arm, config.ranks, threads)
    outputs.append(write_curve(out_dir, 'error_vs_rank',
                               [[a['rank'], a['als'].sup, a['df'].sup, a['svd'].sup] for a in arms]))
    outputs.append(write_curve(out_dir, 'error_vs_time', [
        [a['rank'], t, ea, ed, es]
        for a in arms
        for t, ea, ed, es in zip(a['als'].times, a['als'].errors, a['df'].errors, a['svd'].errors)]))
    outputs.append(write_curve(out_dir, 'als_history', [
        [a['rank'], h.sweep, h.half, h.F_N, h.cg_iterations] for a in arms for h in a['history']]))

    results = {
        'reference_certificate': reference.certificate,
        'sup_errors': {str(a['rank']): {'als': a['als'].sup, 'df': a['df'].sup, 'svd': a['svd'].sup}
                       for a in arms},
    }
    return results, outputs


def run_als_pathological(config, out_dir, timer, threads=1):
    """
    病態實驗：終止時間的 ALS、各雜訊幅度的 DF 與截斷 SVD 誤差，以及計算時間

    Returns:
        tuple: (結果摘要 dict, 輸出檔案列表)
    """
    p = config.problem
    base = pathological_experiment(1, 0.0, config.seed, L=p['L'], T=p['T'], N=p['N'])
    outputs = []

    with timer.measure('reference'):
        reference = rk4_reference(base, config=config.reference)
    exact = np.stack([base.exact_solution(t) for t in reference.times])
    closed_form_error = float(np.max(np.linalg.norm(reference.values - exact, axis=(1, 2))))
    logger.info(f"RK4 參考解與閉式解的 sup-node 差異: {closed_form_error:.3e}")

    tasks = [('als', r, 0.0) for r in config.ranks]
    tasks += [('df', r, eps) for r in config.ranks for eps in config.noise_levels]

    def arm(task):
        method, r, eps = task
        experiment = pathological_experiment(r, eps, config.seed, L=p['L'], T=p['T'], N=p['N'])
        start = time.perf_counter()
        if method == 'als':
            w, _ = als(experiment, r, config=config.als)
            values = w.products()
            save_als_checkpoint(os.path.join(out_dir, 'checkpoints', f"als_rank{r}.json"), w)
        else:
            values = propagate(experiment, r, config=config.ksl).dense()
        seconds = time.perf_counter() - start
        timer.add(method if method == 'als' else 'ksl', seconds)
        error = float(np.linalg.norm(values[-1] - reference.values[-1]))
        logger.info(f"{method} r={r} ε={eps:g}: 終止時間誤差 {error:.3e} ({seconds:.2f} 秒)")
        return [r, method, eps, error, seconds]

    rows = _map(arm, tasks, threads)
    with timer.measure('svd'):
        svd_final = {r: float(best_rank_error(reference, r).errors[-1]) for r in config.ranks}
    rows += [[r, 'svd', 0.0, svd_final[r], 0.0] for r in config.ranks]
    outputs.append(write_curve(out_dir, 'pathological_errors', rows))

    def final(method, r, eps=0.0):
        return next(row[3] for row in rows if row[:3] == [r, method, eps])

    df_noise = config.noise_levels[0]
    outputs.append(write_curve(out_dir, 'error_vs_rank', [
        [r, final('als', r), final('df', r, df_noise), svd_final[r]] for r in config.ranks]))

    results = {
        'reference_certificate': reference.certificate,
        'closed_form_error': closed_form_error,
        'final_errors': [{'rank': row[0], 'method': row[1], 'noise': row[2], 'error': row[3]} for row in rows],
    }
    return results, outputs


# ---------------------------------------------------------------------------
# 波包實驗
# ---------------------------------------------------------------------------

def _wavepacket_experiment(config):
    p = config.problem
    return WavepacketExperiment(config.name, p['Q'], p['P'], p['POTENTIAL_HEIGHTS'],
                                p['POTENTIAL_CENTERS'], p['T'], p['N'])


def _run_greedy_terms(problem, config, out_dir, timer):
    """逐項執行貪婪演算法，每加入一項就寫入檢查點"""
    checkpoint = os.path.join(out_dir, 'checkpoints', 'greedy_state.json')
    if config.resume:
        state = load_greedy_checkpoint(config.resume, problem)
    else:
        state = GreedyState(problem)
    rows = [[j + 1, F, float('nan')] for j, F in enumerate(state.history)]
    elapsed = 0.0
    while state.n_terms < config.greedy.max_terms:
        before = state.n_terms
        with timer.measure('greedy') as step:
            state = greedy(problem, max_terms=before + 1, config=config.greedy, state=state)
        elapsed += step['seconds']
        if state.n_terms == before:
            break
        rows.append([state.n_terms, state.F, elapsed])
        save_greedy_checkpoint(checkpoint, state)
    logger.info(f"貪婪演算法結束: {state.n_terms} 項, F={state.F:.6e}, 原因 {state.stopped_reason}")
    return state, rows


def _record_nodes(N, every):
    nodes = set(range(0, N + 1, every))
    nodes.add(N)
    return nodes


def _coarse_arm(n, coeffs_fn, experiment, config, record, timer):
    sp = config.spectral
    grid = SineGrid(experiment.dim, sp.half_width, n)
    propagator = SpectralPropagator(grid, experiment.potential, experiment.T / sp.steps)
    stored = {}

    def keep(k, t, c):
        if k in record:
            stored[k] = c.copy()

    with timer.measure(f"spectral_{n}") as run:
        final = propagator.run(coeffs_fn(grid), experiment.T, experiment.N, sp.steps, keep)
    return n, grid, stored, final, run['seconds']


def run_greedy(config, out_dir, timer, threads=1):
    """
    波包實驗：貪婪演算法、物理表象重建與 Strang 正弦頻譜參考解的比較

    Returns:
        tuple: (結果摘要 dict, 輸出檔案列表)
    """
    experiment = _wavepacket_experiment(config)
    problem = experiment.problem()
    grid_t = problem.grid
    sp = config.spectral
    outputs = []

    state, residual_rows = _run_greedy_terms(problem, config, out_dir, timer)
    if state.n_terms == 0:
        raise GaussianDomainError("貪婪演算法沒有接受任何項")
    outputs.append(write_curve(out_dir, 'residual_vs_terms', residual_rows))
    # 由檢查點還原的項沒有計時 (nan)，不列入計時表
    outputs.append(write_curve(out_dir, 'greedy_timing', [
        row[::2] for row in residual_rows if row[0] in config.report_terms and np.isfinite(row[2])]))
    norms = node_norms(state)
    outputs.append(write_curve(out_dir, 'norm_vs_time', [[t, n] for t, n in zip(grid_t.nodes, norms)]))

    compare_terms = sorted({1} | {n for n in config.report_terms if n <= state.n_terms})
    psi = {n: reconstruct_physical(state, n) for n in compare_terms}
    record = _record_nodes(grid_t.N, sp.record_every)

    def initial_coeffs(grid):
        return project(problem.u0_batch, grid)

    coarse_modes = sorted({n for n in sp.modes if n != sp.reference_modes})
    coarse = _map(lambda n: _coarse_arm(n, initial_coeffs, experiment, config, record, timer),
                  coarse_modes, threads)
    # 只計時的解析度不保存節點係數，也不與參考解比較
    timing_modes = sorted(set(sp.timing_modes) - set(coarse_modes) - {sp.reference_modes})
    timed = _map(lambda n: _coarse_arm(n, initial_coeffs, experiment, config, set(), timer),
                 timing_modes, threads)
    timing = {n: seconds for n, _, _, _, seconds in coarse + timed}
    h = experiment.T / sp.steps
    for n, grid, _, final, _ in coarse + timed:
        write_snapshot(os.path.join(out_dir, 'snapshots', f"spectral_{n}.bin"), final, grid, h, experiment.T)

    # 最細解析度的參考解；比較在節點回呼中完成，不保留整條軌跡
    ref_grid = SineGrid(experiment.dim, sp.half_width, sp.reference_modes)
    density_nodes = {}
    if experiment.dim == 1:
        density_nodes = {int(round(t / grid_t.dt)): t for t in config.density_times}
    x_plot = np.linspace(-sp.half_width, sp.half_width, config.density_points)
    error_rows, density_rows = [], []
    callback_seconds = [0.0]

    def compare(k, t, c):
        start = time.perf_counter()
        if k in record:
            for n, _, stored, _, _ in coarse:
                error_rows.append([f"spectral-{n}", t, coefficient_distance(stored[k], c)])
            for n in compare_terms:
                error_rows.append([f"greedy-{n}", t, l2_error(c, psi[n][k], ref_grid)])
        if k in density_nodes:
            greedy_density = density(state, k, x_plot[:, None])
            reference_density = np.abs(evaluate_series(c, ref_grid, x_plot)) ** 2
            density_rows.extend([t, x, g, r] for x, g, r in zip(x_plot, greedy_density, reference_density))
        callback_seconds[0] += time.perf_counter() - start

    propagator = SpectralPropagator(ref_grid, experiment.potential, h)
    with timer.measure(f"spectral_{sp.reference_modes}") as run:
        final = propagator.run(initial_coeffs(ref_grid), experiment.T, grid_t.N, sp.steps, compare)
    timing[sp.reference_modes] = run['seconds'] - callback_seconds[0]
    timer.add('comparison', callback_seconds[0])
    write_snapshot(os.path.join(out_dir, 'snapshots', f"spectral_{sp.reference_modes}.bin"),
                   final, ref_grid, h, experiment.T)

    error_rows.sort(key=lambda row: (row[0], row[1]))
    outputs.append(write_curve(out_dir, 'wavepacket_error_vs_time', error_rows))
    outputs.append(write_curve(out_dir, 'spectral_timing', [[n, timing[n]] for n in sorted(timing)]))
    if density_rows:
        outputs.append(write_curve(out_dir, 'density', density_rows))

    sup_errors = {}
    for method, _, error in error_rows:
        sup_errors[method] = max(sup_errors.get(method, 0.0), error)
    results = {
        'terms': state.n_terms,
        'F_initial': state.F_initial,
        'F_final': state.F,
        'stopped_reason': state.stopped_reason,
        'norm_range': [float(np.min(norms)), float(np.max(norms))],
        'sup_errors': sup_errors,
        'parameter_layout': experiment.layout,
    }
    return results, outputs


RUNNERS = {
    'als-random': run_als_random,
    'als-pathological': run_als_pathological,
    'greedy-1d': run_greedy,
    'greedy-3d': run_greedy,
}


def run_experiment(config, out_dir, threads=1):
    """
    執行一個已驗證的實驗並寫出 run.json 與 summary.txt

    Args:
        config: ExperimentConfig
        out_dir: 輸出目錄
        threads: 分支平行執行的執行緒數

    Returns:
        dict: run.json 的內容
    """
    timer = PhaseTimer()
    started_at = get_timestamp()
    prepare_output_dirs(out_dir)
    logger.info(f"開始執行實驗 {config.name} (種子 {config.seed}, {threads} 個執行緒)")

    results, outputs = RUNNERS[config.name](config, out_dir, timer, threads)

    finished_at = get_timestamp()
    metadata = {
        'experiment': config.name,
        'seed': config.seed,
        'rng': RNG_NAME,
        'python': platform.python_version(),
        'versions': package_versions(),
        'parameters': config.to_dict(),
        'phases': dict(timer.phases),
        'started_at': started_at,
        'finished_at': finished_at,
        'threads': threads,
        'results': results,
        'outputs': [os.path.relpath(path, out_dir) for path in outputs],
    }
    if config.kind == 'wavepacket':
        metadata['parameter_layout'] = results['parameter_layout']
    write_json(os.path.join(out_dir, 'run.json'), metadata)

    summary = render_summary({
        'experiment': config.name,
        'started_at': started_at,
        'finished_at': finished_at,
        'seed': config.seed,
        'rng': RNG_NAME,
        'out_dir': out_dir,
        'phases': format_lines(timer.phases, "{key}: {value} 秒"),
        'results': format_lines({k: v for k, v in results.items() if not isinstance(v, (dict, list))}),
        'outputs': "\n".join(metadata['outputs']),
    })
    with open(os.path.join(out_dir, 'summary.txt'), 'w', encoding='utf-8') as f:
        f.write(summary)
    logger.info(f"實驗 {config.name} 完成，輸出於 {out_dir}")
    return metadata
