"""
執行輸出共用工具：時間戳記、CSV/JSON 寫入、檢查點與執行摘要
"""
import os
import csv
import json
import time
import logging
import threading
from contextlib import contextmanager
from datetime import datetime
from importlib import metadata

import numpy as np
import pytz

from templates.curve_headers import CURVE_HEADERS

# 設定日誌
logger = logging.getLogger(__name__)

# 設定台灣時區
TW_TIMEZONE = pytz.timezone('Asia/Taipei')

# 所有檔案寫入共用同一把鎖
WRITE_LOCK = threading.Lock()

# 寫入 run.json 的套件版本
TRACKED_PACKAGES = ['numpy', 'scipy', 'python-dotenv', 'pytz']


def get_timestamp():
    """
    獲取目前時間字串（台灣時間）

    Returns:
        str: 格式 %Y/%m/%d %H:%M:%S
    """
    return datetime.now(TW_TIMEZONE).strftime('%Y/%m/%d %H:%M:%S')


def package_versions():
    """已安裝套件的版本，未安裝者記為 None"""
    versions = {}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


class PhaseTimer:
    """記錄各計算階段的耗時 (秒)，可在多執行緒中使用"""

    def __init__(self):
        self.phases = {}
        self._lock = threading.Lock()

    @contextmanager
    def measure(self, name):
        """計時一個區塊；產生的 dict 在離開時填入 'seconds'"""
        record = {}
        start = time.perf_counter()
        try:
            yield record
        finally:
            record['seconds'] = time.perf_counter() - start
            self.add(name, record['seconds'])

    def add(self, name, seconds):
        with self._lock:
            self.phases[name] = self.phases.get(name, 0.0) + seconds


def prepare_output_dirs(out_dir):
    """建立輸出目錄與 curves/、checkpoints/、snapshots/ 子目錄"""
    for sub in ('', 'curves', 'checkpoints', 'snapshots'):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)


def write_curve(out_dir, name, rows, columns=None, suffix=None):
    """
    寫入 curves/<name>[_<suffix>].csv

    第一行為以 # 開頭的註解標頭，浮點數以 repr 寫出，重跑時逐位元相同。

    Args:
        out_dir: 輸出目錄
        name: CURVE_HEADERS 中的曲線名稱
        rows: 每列的值
        columns: 覆寫預設欄位
        suffix: 檔名後綴

    Returns:
        str: 檔案路徑
    """
    comment, default_columns = CURVE_HEADERS[name]
    columns = columns or default_columns
    if columns is None:
        raise ValueError(f"曲線 {name} 需要指定欄位")
    filename = f"{name}_{suffix}.csv" if suffix else f"{name}.csv"
    path = os.path.join(out_dir, 'curves', filename)
    with WRITE_LOCK:
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(f"# {comment}\n")
            writer = csv.writer(f)
            writer.writerow(columns)
            for row in rows:
                if len(row) != len(columns):
                    raise ValueError(f"曲線 {name} 的列長度 {len(row)} 與欄位數 {len(columns)} 不符")
                writer.writerow([_format_cell(v) for v in row])
    logger.info(f"寫入曲線: {path}")
    return path


def _format_cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def read_curve(path):
    """
    讀回曲線 CSV

    Returns:
        tuple: (註解標頭, 欄位, 各列字串)
    """
    with open(path, 'r', encoding='utf-8', newline='') as f:
        comment = f.readline().rstrip('\n')
        reader = csv.reader(f)
        columns = next(reader)
        rows = [row for row in reader]
    return comment.lstrip('# '), columns, rows


def encode_complex(array):
    """複數陣列轉為巢狀 [re, im] 列表 (repr 精度，可精確往返)"""
    array = np.asarray(array, dtype=complex)
    return np.stack([array.real, array.imag], axis=-1).tolist()


def decode_complex(data):
    pairs = np.asarray(data, dtype=float)
    return pairs[..., 0] + 1j * pairs[..., 1]


def write_json(path, data):
    """以 UTF-8 寫入 JSON (ensure_ascii=False, indent=2)"""
    with WRITE_LOCK:
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f, ensure_ascii=False, indent=2)
    logger.info(f"寫入 JSON: {path}")
    return path


def read_json(path):
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def save_als_checkpoint(path, w, history=None):
    """ALS 因子序列存檔"""
    data = {
        'version': 1,
        'T': w.grid.T,
        'N': w.grid.N,
        'A': encode_complex(w.A),
        'B': encode_complex(w.B),
        'history': history or [],
    }
    return write_json(path, data)


def load_als_checkpoint(path):
    """
    讀回 ALS 因子序列

    Returns:
        SpaceTimeLowRank: 因子序列
    """
    from numerics.time_grid import TimeGrid
    from solvers.als_solver import SpaceTimeLowRank
    data = read_json(path)
    grid = TimeGrid(float(data['T']), int(data['N']))
    return SpaceTimeLowRank(grid, decode_complex(data['A']), decode_complex(data['B']))


def save_greedy_checkpoint(path, state):
    """貪婪狀態存檔 (參數為實數，直接以 repr 精度寫出)"""
    return write_json(path, state.to_dict())


def load_greedy_checkpoint(path, problem):
    """
    由檢查點還原貪婪狀態

    Args:
        path: 檢查點路徑
        problem: GaussianProblem，維度與時間網格須與檢查點一致

    Returns:
        GreedyState: 還原的狀態
    """
    from solvers.greedy_solver import GreedyState
    try:
        data = read_json(path)
    except Exception as e:
        logger.error(f"讀取檢查點時出錯: {str(e)}")
        raise
    state = GreedyState.from_dict(data, problem)
    logger.info(f"由檢查點 {path} 還原 {state.n_terms} 項, F={state.F:.6e}")
    return state


def render_summary(context):
    """
    依 templates/run_summary_template.txt 產生執行摘要

    Args:
        context: 模板欄位

    Returns:
        str: 摘要文字
    """
    template_path = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'templates', 'run_summary_template.txt')
    if os.path.exists(template_path):
        with open(template_path, 'r', encoding='utf-8') as f:
            template = f.read()
    else:
        # 使用默認模板
        template = """【執行摘要】{experiment}
開始: {started_at}  結束: {finished_at}  種子: {seed} ({rng})
輸出目錄: {out_dir}

{phases}

{results}

{outputs}
"""
    return template.format(**context)


def format_lines(mapping, fmt="{key}: {value}"):
    """把 dict 轉為逐行文字"""
    lines = []
    for key, value in mapping.items():
        if isinstance(value, float):
            value = f"{value:.6g}"
        lines.append(fmt.format(key=key, value=value))
    return "\n".join(lines) if lines else "(無)"
