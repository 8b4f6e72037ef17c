"""
參考解模組初始化
"""
from .matrix_reference import ReferenceConfig, best_rank_error, node_errors, rk4_reference, singular_value_curves
from .spectral_reference import SineGrid, SpectralConfig, SpectralPropagator, l2_error, project, strang_step
