"""
處理程序模組初始化
"""
from .config_handler import ConfigError, ParameterError, UnknownExperimentError, load_config, parse_config
from .experiment_handler import run_experiment
from .verify_handler import SUITES, run_suite
