"""Zeroth-order optimization with sparse gradient recovery.

Estimates approximately sparse gradients from randomized
finite-difference queries by greedy sparse recovery, drives an inexact
proximal-gradient loop on top of the estimates, and ships a benchmark
harness with strict oracle-query accounting.
"""

from .problems import (
    DomainError,
    EvaluationError,
    GradientAccessError,
    NoiseModel,
    ProblemSpec,
    QueryLedger,
    evaluate,
    make_compressible_quadratic,
    make_huber_demo,
    make_max_k_squared_sum,
    make_rotated_sparse_quadratic,
    make_sparse_quadratic,
)
from .assets import AssetTable, AssetTableError, load_asset_table, make_portfolio_oracle, synthetic_assets
from .sensing import DirectionSet, MeasurementSet, assemble, rademacher_directions, sample_raw
from .sparse_recovery import CosampConfig, SparseSolution, cosamp, restricted_least_squares
from .estimators import (
    GradientEstimate,
    OppState,
    estimate_gradient,
    fdsa_gradient,
    opportunistic_estimate,
    spsa_gradient,
)
from . import regularizers
from .regularizers import Regularizer, prox
from .solver import (
    BaselineConfig,
    RunTrace,
    SolverConfig,
    baseline_run,
    default_delta,
    default_m,
    zoro_run,
)

__all__ = [
    "AssetTable",
    "AssetTableError",
    "BaselineConfig",
    "CosampConfig",
    "DirectionSet",
    "DomainError",
    "EvaluationError",
    "GradientAccessError",
    "GradientEstimate",
    "MeasurementSet",
    "NoiseModel",
    "OppState",
    "ProblemSpec",
    "QueryLedger",
    "Regularizer",
    "RunTrace",
    "SolverConfig",
    "SparseSolution",
    "assemble",
    "baseline_run",
    "cosamp",
    "default_delta",
    "default_m",
    "estimate_gradient",
    "evaluate",
    "fdsa_gradient",
    "load_asset_table",
    "make_compressible_quadratic",
    "make_huber_demo",
    "make_max_k_squared_sum",
    "make_portfolio_oracle",
    "make_rotated_sparse_quadratic",
    "make_sparse_quadratic",
    "opportunistic_estimate",
    "prox",
    "rademacher_directions",
    "regularizers",
    "restricted_least_squares",
    "sample_raw",
    "spsa_gradient",
    "synthetic_assets",
    "zoro_run",
]

__version__ = "0.1.0"
