"""
模型模組初始化
"""
from .matrix_model import (RNG_NAME, HamiltonianTerm, MatrixExperiment, NodeOperator, TwoSidedHamiltonian,
                           pathological_experiment, random_experiment)
from .gaussian_algebra import (GaussianBatch, GaussianDomainError, GaussianSum, GaussianTerm, free_evolve, gram,
                               inner, parameter_layout, parameters_to_batch)
from .wavepacket_model import (WavepacketExperiment, double_hump_experiment, gaussian_potential, initial_parameters,
                               scattering_3d_experiment)
