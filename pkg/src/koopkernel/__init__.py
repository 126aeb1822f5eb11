"""Kernel-based Koopman operator learning for ergodic dynamical systems."""

__version__ = "0.1.0"

from .config import ExperimentConfig, parse_config
from .dynamics import (
    DelayEmbedding,
    SystemSpec,
    TrajectoryDataset,
    delay_embed,
    exact_torus_flow,
    integrate_lorenz63,
    simulate,
)
from .errors import (
    ConfigurationError,
    DegenerateDataError,
    DegenerateKernelError,
    IntegrationDivergenceError,
    NumericalError,
    OutOfDomainWarning,
    RankDeficiencyWarning,
    RankError,
)
from .forecast import (
    KAFModel,
    analog_forecast,
    df_forecast,
    df_predict,
    kaf_fit,
    kaf_predict,
    kaf_predict_batch,
    rmse_curve,
)
from .generator import GeneratorModel, approx_eigen_residual, compactify, generator_fd, generator_model
from .kernels import KernelMatrix, KernelSpec, build_kernel, median_bandwidth, normalize, pairwise_sqdist
from .spectral import EigenBasis, KoopmanMatrix, autocorrelation, eigenbasis, nystrom, pod, shift_matrix
