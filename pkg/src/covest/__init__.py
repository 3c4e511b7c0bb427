"""Robust covariance estimation with median-of-means tournaments."""

from .errors import (
    ConvergenceError,
    CovestError,
    DegenerateInputError,
    InsufficientDataError,
    InvalidInputError,
    InvalidParameterError,
    NotPSDError,
    StageError,
    UnsupportedDimensionError,
)
from .linalg import effective_rank, eigensystem, operator_norm
from .mom import estimate_trace, partition_blocks
from .sampling import DistributionSpec, RandomStream
from .tournament import (
    EstimateReport,
    PipelineConfig,
    empirical_covariance,
    epsilon_net_norm,
    estimate_covariance,
    select_estimate,
)

__version__ = "0.1.0"
