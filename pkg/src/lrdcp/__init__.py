"""Empirical-process change-point tests for long-range dependent data.

The package simulates stationary Gaussian sequences with long memory,
transforms them through subordinating functions, computes the KS, CvM, CUSUM
and Wilcoxon change-point statistics and calibrates them by Monte Carlo or
from simulated limit processes.
"""

from ._validation import DegenerateInputError, DomainError
from .calibrate import (
    CriticalValueTable,
    NullCalibrator,
    asymptotic_critical_value,
    asymptotic_power,
    limit_functional,
    mc_critical_values,
)
from .changepoint import ChangePointTest, TestReport, run_test
from .estimators import (
    HurstEstimate,
    LocalWhittleEstimator,
    ScaleEstimate,
    SplitWhittleEstimator,
    estimate_scale,
    local_whittle,
    split_whittle,
)
from .experiments import (
    ChangeSpec,
    PowerTable,
    Scenario,
    are_mean_variance,
    fstar,
    run_power_study,
)
from .sim import GaussianModel, SeedSpec, simulate, simulate_many
from .stats import StatisticKind, changepoint_estimate, compute_raw
from .subordinate import (
    Normalization,
    Subordinator,
    hermite_coeff,
    hermite_rank,
    normalization_dn,
)

__version__ = "0.1.0"

__all__ = [
    "ChangePointTest",
    "ChangeSpec",
    "CriticalValueTable",
    "DegenerateInputError",
    "DomainError",
    "GaussianModel",
    "HurstEstimate",
    "LocalWhittleEstimator",
    "Normalization",
    "NullCalibrator",
    "PowerTable",
    "ScaleEstimate",
    "Scenario",
    "SeedSpec",
    "SplitWhittleEstimator",
    "StatisticKind",
    "Subordinator",
    "TestReport",
    "are_mean_variance",
    "asymptotic_critical_value",
    "asymptotic_power",
    "changepoint_estimate",
    "compute_raw",
    "estimate_scale",
    "fstar",
    "hermite_coeff",
    "hermite_rank",
    "limit_functional",
    "local_whittle",
    "mc_critical_values",
    "normalization_dn",
    "run_power_study",
    "run_test",
    "simulate",
    "simulate_many",
    "split_whittle",
]
