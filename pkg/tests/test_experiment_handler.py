import os

import numpy as np
import pytest

from handlers.config_handler import parse_config
from handlers.experiment_handler import run_experiment
from handlers.utils import read_curve, read_json
from references.spectral_reference import read_snapshot


def curve(out_dir, name):
    return read_curve(os.path.join(out_dir, 'curves', f"{name}.csv"))


def numeric_rows(rows):
    return np.array([[float(v) for v in row] for row in rows])


SMALL_RANDOM = {
    'EXPERIMENT': 'als-random', 'SEED': '3', 'PROBLEM_L': '4', 'PROBLEM_T': '1', 'PROBLEM_N': '10',
    'ALS_RANKS': '1,2', 'ALS_SWEEPS': '3', 'ALS_CG_TOL': '1e-11',
}

SMALL_GREEDY = {
    'EXPERIMENT': 'greedy-1d', 'PROBLEM_T': '1', 'PROBLEM_N': '4',
    'GREEDY_MAX_TERMS': '2', 'GREEDY_MAX_ITER': '10', 'GREEDY_REPORT_TERMS': '1,2',
    'GREEDY_DENSITY_TIMES': '0,1', 'GREEDY_DENSITY_POINTS': '11',
    'SPECTRAL_HALF_WIDTH': '20', 'SPECTRAL_MODES': '64', 'SPECTRAL_REFERENCE_MODES': '128', 'SPECTRAL_STEPS': '40',
    'SPECTRAL_TIMING_MODES': '32',
}


def test_als_random_outputs(tmp_path):
    out_dir = str(tmp_path / 'als-random')
    metadata = run_experiment(parse_config(SMALL_RANDOM), out_dir)

    data = read_json(os.path.join(out_dir, 'run.json'))
    assert data['experiment'] == 'als-random'
    assert data['seed'] == 3
    assert data['parameters']['ranks'] == [1, 2]
    assert set(data['versions']) >= {'numpy', 'scipy'}
    assert 'curves/error_vs_rank.csv' in data['outputs']
    assert 'passed' in metadata['results']['reference_certificate']
    assert os.path.exists(os.path.join(out_dir, 'summary.txt'))
    assert os.path.exists(os.path.join(out_dir, 'checkpoints', 'als_rank2.json'))

    _, columns, rows = curve(out_dir, 'error_vs_rank')
    assert columns == ['rank', 'als_error', 'df_error', 'svd_error']
    values = numeric_rows(rows)
    assert values[:, 0].tolist() == [1.0, 2.0]
    # 截斷 SVD 是每個節點上的最佳秩 r 近似
    assert np.all(values[:, 3] <= values[:, 1] + 1e-10)
    assert np.all(values[:, 3] <= values[:, 2] + 1e-10)

    _, _, rows = curve(out_dir, 'error_vs_time')
    assert len(rows) == 2 * 11
    _, columns, rows = curve(out_dir, 'singular_values')
    assert columns == ['t', 'sigma_1', 'sigma_2', 'sigma_3']
    sv = numeric_rows(rows)[:, 1:]
    assert np.all(np.diff(sv, axis=1) <= 1e-12)

    _, _, rows = curve(out_dir, 'als_history')
    history = numeric_rows([[r[0], r[3]] for r in rows if r[0] == '1'])
    assert np.all(np.diff(history[:, 1]) <= 1e-8 * (1.0 + history[:-1, 1]))


def test_threads_do_not_change_results(tmp_path):
    serial, parallel = str(tmp_path / 'serial'), str(tmp_path / 'parallel')
    run_experiment(parse_config(SMALL_RANDOM), serial, threads=1)
    run_experiment(parse_config(SMALL_RANDOM), parallel, threads=2)
    a = numeric_rows(curve(serial, 'error_vs_rank')[2])
    b = numeric_rows(curve(parallel, 'error_vs_rank')[2])
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


def test_als_pathological_outputs(tmp_path):
    config = parse_config({'EXPERIMENT': 'als-pathological', 'PROBLEM_L': '4', 'PROBLEM_T': '1',
                           'PROBLEM_N': '10', 'ALS_RANKS': '1,2', 'ALS_SWEEPS': '2', 'DF_NOISE': '0,1e-4'})
    out_dir = str(tmp_path / 'pathological')
    metadata = run_experiment(config, out_dir)

    assert metadata['results']['closed_form_error'] < 1e-6
    _, columns, rows = curve(out_dir, 'pathological_errors')
    assert columns == ['rank', 'method', 'noise', 'error_final', 'seconds']
    methods = [row[1] for row in rows]
    assert methods.count('als') == 2
    assert methods.count('df') == 4
    assert methods.count('svd') == 2
    assert all(float(row[3]) >= 0.0 for row in rows)
    _, _, rows = curve(out_dir, 'error_vs_rank')
    assert len(rows) == 2


def test_greedy_outputs_and_resume(tmp_path):
    out_dir = str(tmp_path / 'greedy')
    metadata = run_experiment(parse_config(SMALL_GREEDY), out_dir)
    results = metadata['results']
    assert 1 <= results['terms'] <= 2
    assert results['F_final'] < results['F_initial']
    assert metadata['parameter_layout'] == results['parameter_layout']

    _, _, rows = curve(out_dir, 'residual_vs_terms')
    residual = numeric_rows(rows)
    assert residual[:, 0].tolist() == list(range(1, results['terms'] + 1))
    assert np.all(np.diff(residual[:, 1]) < 0)

    _, _, rows = curve(out_dir, 'norm_vs_time')
    assert len(rows) == 5
    _, _, rows = curve(out_dir, 'density')
    assert len(rows) == 2 * 11
    _, _, rows = curve(out_dir, 'wavepacket_error_vs_time')
    methods = {row[0] for row in rows}
    assert {'spectral-64', 'greedy-1'} <= methods
    _, _, rows = curve(out_dir, 'spectral_timing')
    assert [row[0] for row in rows] == ['32', '64', '128']
    assert 'spectral-32' not in methods
    _, _, rows = curve(out_dir, 'greedy_timing')
    assert [int(row[0]) for row in rows] == list(range(1, results['terms'] + 1))
    assert all(np.isfinite(float(row[1])) for row in rows)

    meta, coeffs = read_snapshot(os.path.join(out_dir, 'snapshots', 'spectral_128.bin'))
    assert meta['modes'] == '128'
    assert coeffs.shape == (128,)
    _, coeffs = read_snapshot(os.path.join(out_dir, 'snapshots', 'spectral_32.bin'))
    assert coeffs.shape == (32,)

    checkpoint = os.path.join(out_dir, 'checkpoints', 'greedy_state.json')
    resumed_dir = str(tmp_path / 'resumed')
    resumed = run_experiment(parse_config({**SMALL_GREEDY, 'GREEDY_MAX_TERMS': str(results['terms']),
                                           'GREEDY_REPORT_TERMS': '1', 'GREEDY_RESUME': checkpoint}),
                             resumed_dir)
    assert resumed['results']['terms'] == results['terms']
    assert resumed['results']['F_final'] == results['F_final']
    # 還原的項沒有計時
    _, _, rows = curve(resumed_dir, 'residual_vs_terms')
    assert [row[2] for row in rows] == ['nan'] * results['terms']
    _, _, rows = curve(resumed_dir, 'greedy_timing')
    assert rows == []


@pytest.mark.slow
def test_full_random_experiment(tmp_path):
    config = parse_config({'EXPERIMENT': 'als-random'})
    metadata = run_experiment(config, str(tmp_path / 'full'), threads=2)
    errors = metadata['results']['sup_errors']
    assert errors['10']['als'] < errors['1']['als']
