"""Exact bias/variance laboratory for linear smoothers under fixed and random designs."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ConfigError,
    Dataset,
    DimensionError,
    NoiseModel,
    NumericalError,
    ParameterError,
    SeedSpec,
    make_rng,
)
from .dgp import DGPSpec, Friedman, GaussianAR, LinearSum, ScaledSparseLinear, UniformCube  # noqa: E402
from .smoothers import KNN, LeastSquares, knn_weights, least_squares_weights, predict, smoother_matrix  # noqa: E402
from .analysis import (  # noqa: E402
    bias_at,
    bias_decompose,
    expected_error,
    interpolation_check,
    mc_error_estimate,
    variance_at,
)
from .experiments import ExperimentConfig, ExperimentTable, aggregate, run  # noqa: E402
