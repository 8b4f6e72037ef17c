import json

import pytest

import app


def write_cfg(tmp_path, text):
    path = tmp_path / 'exp.cfg'
    path.write_text(text, encoding='utf-8')
    return str(path)


@pytest.mark.parametrize("text, code", [
    ("EXPERIMENT=als-random\nnot a binding here\n", app.EXIT_PARSE),
    ("SEED=1\n", app.EXIT_PARSE),
    ("EXPERIMENT=als-banana\n", app.EXIT_UNKNOWN_EXPERIMENT),
    ("EXPERIMENT=als-random\nALS_RANKS=0\n", app.EXIT_PARAMETER),
    ("EXPERIMENT=als-random\nPROBLEM_UNKNOWN=1\n", app.EXIT_PARAMETER),
])
def test_invalid_configs_map_to_exit_codes(tmp_path, text, code):
    out_dir = tmp_path / 'out'
    assert app.main(['--out-dir', str(out_dir), 'run', write_cfg(tmp_path, text)]) == code
    assert not out_dir.exists()


def test_missing_config_file(tmp_path):
    assert app.main(['--out-dir', str(tmp_path / 'out'), 'run', str(tmp_path / 'missing.cfg')]) == app.EXIT_PARSE


def test_invalid_thread_count(tmp_path):
    cfg = write_cfg(tmp_path, "EXPERIMENT=als-random\n")
    assert app.main(['--threads', '0', 'run', cfg]) == app.EXIT_PARAMETER


def test_invalid_environment_seed(tmp_path, monkeypatch):
    monkeypatch.setenv('SEED', 'abc')
    cfg = write_cfg(tmp_path, "EXPERIMENT=als-random\n")
    assert app.main(['run', cfg]) == app.EXIT_PARAMETER


def test_run_small_experiment(tmp_path):
    cfg = write_cfg(tmp_path, "EXPERIMENT=als-random\nPROBLEM_L=4\nPROBLEM_T=1\nPROBLEM_N=10\n"
                              "ALS_RANKS=1\nALS_SWEEPS=2\n")
    out_dir = tmp_path / 'out'
    assert app.main(['--seed', '4', '--out-dir', str(out_dir), 'run', cfg]) == app.EXIT_OK
    data = json.loads((out_dir / 'run.json').read_text(encoding='utf-8'))
    assert data['seed'] == 4
    assert (out_dir / 'run.log').exists()
    assert (out_dir / 'curves' / 'error_vs_rank.csv').exists()


def test_default_out_dir_uses_experiment_name(tmp_path, monkeypatch):
    monkeypatch.setenv('OUT_DIR', str(tmp_path / 'runs'))
    cfg = write_cfg(tmp_path, "EXPERIMENT=als-random\nPROBLEM_L=4\nPROBLEM_T=1\nPROBLEM_N=10\n"
                              "ALS_RANKS=1\nALS_SWEEPS=1\n")
    assert app.main(['run', cfg]) == app.EXIT_OK
    assert (tmp_path / 'runs' / 'als-random' / 'run.json').exists()


def test_verify_writes_report(tmp_path):
    out_dir = tmp_path / 'verify'
    assert app.main(['--out-dir', str(out_dir), 'verify', 'hat-integrals']) == app.EXIT_OK
    data = json.loads((out_dir / 'verify_hat-integrals.json').read_text(encoding='utf-8'))
    assert data['suite'] == 'hat-integrals'
    assert data['seed'] == 0
    assert data['results'][0]['passed'] is True


def test_verify_failure_returns_exit_code(monkeypatch):
    from handlers.verify_handler import SuiteResult

    def failing(name, seed=0):
        result = SuiteResult(name)
        result.add('forced', 1.0, 0.0)
        return [result]

    monkeypatch.setattr(app, 'run_suite', failing)
    assert app.main(['verify', 'metric']) == app.EXIT_VERIFY


def test_numerical_failure_returns_exit_code(tmp_path, monkeypatch):
    from numerics.block_linalg import ConvergenceError

    def broken(config, out_dir, threads=1):
        raise ConvergenceError(500, 1.0)

    monkeypatch.setattr(app, 'run_experiment', broken)
    cfg = write_cfg(tmp_path, "EXPERIMENT=als-random\n")
    assert app.main(['--out-dir', str(tmp_path / 'out'), 'run', cfg]) == app.EXIT_NUMERICAL


def test_unknown_suite_is_rejected_by_parser():
    with pytest.raises(SystemExit) as excinfo:
        app.main(['verify', 'banana'])
    assert excinfo.value.code == 2


def test_help_lists_exit_codes(capsys):
    with pytest.raises(SystemExit):
        app.main(['--help'])
    out = capsys.readouterr().out
    assert '結束碼' in out
    assert 'OUT_DIR' in out
