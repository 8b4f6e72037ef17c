"""
求解器模組初始化
"""
from .als_solver import ALSConfig, ALSProblem, SpaceTimeLowRank, als, eval_FN
from .projector_splitting import KSLConfig, LowRankState, ksl_step, propagate
from .greedy_solver import (GaussianProblem, GreedyConfig, GreedyState, eval_F, greedy, optimize_term,
                            reconstruct_physical)
