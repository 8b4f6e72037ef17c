"""
實驗設定檔處理模組

設定檔為 dotenv 格式的 KEY=value 平面檔，以前綴區分各實驗分支：
ALS_、DF_ (投影分裂)、REF_ (RK4 參考解)、GREEDY_、SPECTRAL_、PROBLEM_。
"""
import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from dotenv.parser import parse_stream

from references.matrix_reference import ReferenceConfig
from references.spectral_reference import SpectralConfig
from solvers.als_solver import ALSConfig
from solvers.greedy_solver import GreedyConfig
from solvers.projector_splitting import KSLConfig

# 設定日誌
logger = logging.getLogger(__name__)


class ConfigError(Exception):
    """設定檔無法解析"""


class ParameterError(ValueError):
    """參數值或範圍無效"""


class UnknownExperimentError(KeyError):
    """未知的實驗名稱"""

    def __str__(self):
        return str(self.args[0]) if self.args else "未知的實驗"


# 各實驗的預設值 (物理參數皆為無因次單位)
EXPERIMENTS = {
    'als-random': {
        'kind': 'matrix',
        'problem': {'L': 40, 'T': 5.0, 'N': 200},
        'ranks': list(range(1, 11)),
        'noise': [0.0],
    },
    'als-pathological': {
        'kind': 'matrix',
        'problem': {'L': 20, 'T': 2.0, 'N': 200},
        'ranks': list(range(1, 7)),
        'noise': [0.0, 1e-8, 1e-4],
        'reference': {'steps_per_interval': 10},
    },
    'greedy-1d': {
        'kind': 'wavepacket',
        'problem': {
            'T': 5.0, 'N': 100, 'Q': (6.0,), 'P': (-1.0,),
            'POTENTIAL_HEIGHTS': (1.5, 1.0), 'POTENTIAL_CENTERS': ((-2.0,), (2.0,)),
        },
        'greedy': {'max_terms': 30},
        'report_terms': [10, 20, 30],
        'spectral': {'modes': (1024,), 'reference_modes': 1024},
        'density_times': [0.0, 1.25, 2.5, 3.75, 5.0],
    },
    'greedy-3d': {
        'kind': 'wavepacket',
        'problem': {
            'T': 5.0, 'N': 100, 'Q': (3.0, 3.0, 0.0), 'P': (-np.sqrt(0.5), -np.sqrt(0.5), 0.0),
            'POTENTIAL_HEIGHTS': (1.0,), 'POTENTIAL_CENTERS': ((0.0, 0.0, 0.0),),
        },
        'greedy': {'max_terms': 10},
        'report_terms': [2, 4, 6, 8, 10],
        'spectral': {'modes': (32, 64), 'reference_modes': 64, 'timing_modes': (80,)},
        'density_times': [],
    },
}

# 以前綴對應的設定 dataclass
SECTIONS = {
    'ALS_': ('als', ALSConfig),
    'DF_': ('ksl', KSLConfig),
    'REF_': ('reference', ReferenceConfig),
    'GREEDY_': ('greedy', GreedyConfig),
    'SPECTRAL_': ('spectral', SpectralConfig),
}

# 不屬於 dataclass 欄位的分支參數
EXTRA_KEYS = {
    'ALS_RANKS', 'DF_NOISE', 'GREEDY_REPORT_TERMS', 'GREEDY_RESUME',
    'GREEDY_DENSITY_TIMES', 'GREEDY_DENSITY_POINTS',
}


@dataclass
class ExperimentConfig:
    """驗證後的完整實驗設定 (所有預設值都已填入)"""
    name: str
    seed: int
    problem: dict
    als: ALSConfig = field(default_factory=ALSConfig)
    ksl: KSLConfig = field(default_factory=KSLConfig)
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    greedy: GreedyConfig = field(default_factory=GreedyConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    ranks: list = field(default_factory=list)
    noise_levels: list = field(default_factory=list)
    report_terms: list = field(default_factory=list)
    density_times: list = field(default_factory=list)
    density_points: int = 601
    resume: str = None
    source: str = None

    @property
    def kind(self):
        return EXPERIMENTS[self.name]['kind']

    def to_dict(self):
        """寫入 run.json 的參數 (只保留此實驗用到的分支)"""
        data = {
            'experiment': self.name,
            'seed': self.seed,
            'source': self.source,
            'problem': {k: _jsonable(v) for k, v in self.problem.items()},
        }
        if self.kind == 'matrix':
            data.update(als=asdict(self.als), ksl=asdict(self.ksl), reference=asdict(self.reference),
                        ranks=list(self.ranks), noise_levels=list(self.noise_levels))
        else:
            data.update(greedy=asdict(self.greedy), spectral=_jsonable(asdict(self.spectral)),
                        report_terms=list(self.report_terms), density_times=list(self.density_times),
                        density_points=self.density_points, resume=self.resume)
        return data


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (tuple, list)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def read_config_file(path):
    """
    讀取 dotenv 格式的設定檔

    Args:
        path: 設定檔路徑

    Returns:
        dict: 原始鍵值 (字串)

    Raises:
        ConfigError: 檔案無法讀取、語法錯誤、缺少值或重複鍵
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            bindings = list(parse_stream(f))
    except OSError as e:
        raise ConfigError(f"無法讀取設定檔 {path}: {str(e)}") from e

    raw = {}
    for binding in bindings:
        line = binding.original.line
        if binding.error:
            raise ConfigError(f"{path} 第 {line} 行無法解析: {binding.original.string.strip()!r}")
        if binding.key is None:
            continue
        if binding.value is None:
            raise ConfigError(f"{path} 第 {line} 行的 {binding.key} 缺少值")
        if binding.key in raw:
            raise ConfigError(f"{path} 第 {line} 行重複設定 {binding.key}")
        raw[binding.key] = binding.value.strip()
    logger.info(f"讀取設定檔 {path}: {len(raw)} 個參數")
    return raw


# ---------------------------------------------------------------------------
# 數值轉換
# ---------------------------------------------------------------------------

def _convert(key, value, kind):
    try:
        if kind is bool:
            lowered = value.lower()
            if lowered in ('1', 'true', 'yes', 'on'):
                return True
            if lowered in ('0', 'false', 'no', 'off'):
                return False
            raise ValueError(value)
        if kind is int:
            number = float(value)
            if number != int(number):
                raise ValueError(value)
            return int(number)
        if kind is float:
            return float(value)
        return value
    except (ValueError, OverflowError):
        raise ParameterError(f"{key} 的值 {value!r} 不是有效的 {kind.__name__}") from None


def _parse_list(key, value, kind):
    items = [item.strip() for item in value.split(',') if item.strip()]
    return [_convert(key, item, kind) for item in items]


def _parse_vector(key, value):
    return tuple(_convert(key, item, float) for item in value.split())


def _parse_vectors(key, value):
    return tuple(_parse_vector(key, item) for item in value.split(',') if item.strip())


def _build_section(prefix, cls, raw, defaults):
    """由 PREFIX_FIELD 鍵建立設定 dataclass"""
    kwargs = dict(defaults)
    for f in fields(cls):
        key = prefix + f.name.upper()
        if key not in raw:
            continue
        default = getattr(cls(), f.name)
        if isinstance(default, tuple):
            kwargs[f.name] = tuple(_parse_list(key, raw[key], type(default[0]) if default else float))
        else:
            kwargs[f.name] = _convert(key, raw[key], type(default))
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as e:
        raise ParameterError(f"{prefix} 參數無效: {str(e)}") from e


def _check_keys(raw, preset):
    allowed = {'EXPERIMENT', 'SEED'} | EXTRA_KEYS
    allowed |= {f"PROBLEM_{name}" for name in preset['problem']}
    for prefix, (_, cls) in SECTIONS.items():
        allowed |= {prefix + f.name.upper() for f in fields(cls)}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ParameterError(f"未知的參數: {', '.join(unknown)}")


def _build_problem(raw, preset):
    problem = {}
    for name, default in preset['problem'].items():
        key = f"PROBLEM_{name}"
        if key not in raw:
            problem[name] = default
        elif name == 'POTENTIAL_CENTERS':
            problem[name] = _parse_vectors(key, raw[key])
        elif name == 'POTENTIAL_HEIGHTS':
            problem[name] = tuple(_parse_list(key, raw[key], float))
        elif isinstance(default, tuple):
            problem[name] = _parse_vector(key, raw[key])
        else:
            problem[name] = _convert(key, raw[key], type(default))
    return problem


# ---------------------------------------------------------------------------
# 範圍檢查
# ---------------------------------------------------------------------------

def _validate_matrix(config):
    problem = config.problem
    L = problem['L']
    if L < 2:
        raise ParameterError(f"PROBLEM_L 必須 >= 2: {L}")
    if config.name == 'als-pathological' and L % 2 != 0:
        raise ParameterError(f"病態實驗的 PROBLEM_L 必須為偶數: {L}")
    if not config.ranks:
        raise ParameterError("ALS_RANKS 不可為空")
    bad = [r for r in config.ranks if not 1 <= r <= L]
    if bad:
        raise ParameterError(f"ALS_RANKS 超出範圍 [1, {L}]: {bad}")
    if any(eps < 0 for eps in config.noise_levels):
        raise ParameterError(f"DF_NOISE 必須非負: {config.noise_levels}")
    if not config.noise_levels:
        raise ParameterError("DF_NOISE 不可為空")


def _validate_wavepacket(config):
    problem = config.problem
    d = len(problem['Q'])
    if d < 1 or len(problem['P']) != d:
        raise ParameterError(f"PROBLEM_Q 與 PROBLEM_P 的維度不一致: {problem['Q']}, {problem['P']}")
    heights, centers = problem['POTENTIAL_HEIGHTS'], problem['POTENTIAL_CENTERS']
    if len(heights) != len(centers):
        raise ParameterError(f"位能高度 {len(heights)} 個與中心 {len(centers)} 個數量不符")
    if any(len(c) != d for c in centers):
        raise ParameterError(f"位能中心的維度必須為 {d}")
    terms = config.report_terms
    if any(not 1 <= n <= config.greedy.max_terms for n in terms):
        raise ParameterError(f"GREEDY_REPORT_TERMS 必須落在 [1, {config.greedy.max_terms}]: {terms}")
    if any(not 0.0 <= t <= problem['T'] for t in config.density_times):
        raise ParameterError(f"GREEDY_DENSITY_TIMES 必須落在 [0, {problem['T']}]")
    if config.density_points < 2:
        raise ParameterError(f"GREEDY_DENSITY_POINTS 必須 >= 2: {config.density_points}")
    if config.spectral.steps % problem['N'] != 0:
        raise ParameterError(f"SPECTRAL_STEPS={config.spectral.steps} 必須是 PROBLEM_N={problem['N']} 的倍數")
    if config.spectral.reference_modes < max(config.spectral.modes, default=0):
        raise ParameterError("SPECTRAL_REFERENCE_MODES 必須不小於 SPECTRAL_MODES 的最大值")


def parse_config(raw, seed=None, source=None):
    """
    驗證原始鍵值並填入所有預設值

    Args:
        raw: read_config_file 的結果
        seed: 命令列覆寫的種子
        source: 設定檔路徑 (寫入 run.json)

    Returns:
        ExperimentConfig: 完整設定

    Raises:
        ConfigError: 缺少 EXPERIMENT
        UnknownExperimentError: 實驗名稱不在 EXPERIMENTS 中
        ParameterError: 參數值或範圍無效
    """
    name = raw.get('EXPERIMENT')
    if not name:
        raise ConfigError("設定檔缺少 EXPERIMENT")
    if name not in EXPERIMENTS:
        raise UnknownExperimentError(f"未知的實驗: {name} (可用: {', '.join(EXPERIMENTS)})")
    preset = EXPERIMENTS[name]
    _check_keys(raw, preset)

    seed = int(seed) if seed is not None else _convert('SEED', raw.get('SEED', '0'), int)
    if seed < 0:
        raise ParameterError(f"SEED 必須非負: {seed}")

    problem = _build_problem(raw, preset)
    if not problem['T'] > 0:
        raise ParameterError(f"PROBLEM_T 必須為正: {problem['T']}")
    if problem['N'] < 2:
        raise ParameterError(f"PROBLEM_N 必須 >= 2: {problem['N']}")

    sections = {}
    for prefix, (attr, cls) in SECTIONS.items():
        defaults = dict(preset.get(attr, {}))
        if attr == 'greedy':
            defaults.setdefault('seed', seed)
        sections[attr] = _build_section(prefix, cls, raw, defaults)

    config = ExperimentConfig(name=name, seed=seed, problem=problem, source=source, **sections)
    config.ranks = _parse_list('ALS_RANKS', raw['ALS_RANKS'], int) if 'ALS_RANKS' in raw else list(preset.get('ranks', []))
    config.noise_levels = (_parse_list('DF_NOISE', raw['DF_NOISE'], float) if 'DF_NOISE' in raw
                           else list(preset.get('noise', [])))
    config.report_terms = (_parse_list('GREEDY_REPORT_TERMS', raw['GREEDY_REPORT_TERMS'], int)
                           if 'GREEDY_REPORT_TERMS' in raw else list(preset.get('report_terms', [])))
    config.density_times = (_parse_list('GREEDY_DENSITY_TIMES', raw['GREEDY_DENSITY_TIMES'], float)
                            if 'GREEDY_DENSITY_TIMES' in raw else list(preset.get('density_times', [])))
    if 'GREEDY_DENSITY_POINTS' in raw:
        config.density_points = _convert('GREEDY_DENSITY_POINTS', raw['GREEDY_DENSITY_POINTS'], int)
    config.resume = raw.get('GREEDY_RESUME') or None

    if config.kind == 'matrix':
        _validate_matrix(config)
    else:
        _validate_wavepacket(config)
    logger.info(f"設定檔驗證完成: 實驗 {name}, 種子 {seed}")
    return config


def load_config(path, seed=None):
    """讀取並驗證設定檔"""
    return parse_config(read_config_file(path), seed=seed, source=str(path))
