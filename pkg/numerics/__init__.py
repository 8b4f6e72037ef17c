"""
數值核心模組初始化
"""
from .time_grid import TimeGrid
from .block_linalg import (BlockTridiagonal, BlockFactorization, ConvergenceError, IndefiniteMatrixError,
                           KroneckerPreconditioner, block_cholesky, pcg, real_inner, truncated_svd)
from .dual import Dual
