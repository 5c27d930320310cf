"""Poisson Disorder.

Bayesian quickest detection of a change in the drift of a Brownian observation, where the change is
triggered by a shock of an observed Poisson process: value iteration for the Bayes risk, the
false-alarm constrained variant and an exact-construction path simulator.
"""

from importlib.metadata import PackageNotFoundError, version

from loguru import logger

from .config import RunConfig, SolverSettings, load_run_config
from .exceptions import (
    ConfigError,
    DisorderError,
    InconsistencyError,
    InsufficientIterationsError,
    NumericalError,
    ParameterDomainError,
    SearchError,
)
from .model_core import compute_roots, eta, jump_map, psi, threshold_bounds
from .models import (
    GridFunction,
    MCEstimate,
    ModelParams,
    Roots,
    SimConfig,
    ThresholdSolve,
    ValueIteration,
    VariationalSolution,
)
from .monte_carlo import estimate_detection, run_detection, simulate_pi_path
from .value_solver import apply_J, epsilon_optimal_rule, solve_threshold, threshold, value_at, value_iterate
from .variational import false_alarm_iterate, solve_variational

try:
    __version__ = version("poisson-disorder")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"


# Disable default loguru handler for library usage
# Applications using this library should configure their own handlers
logger.disable("poisson_disorder")


__all__ = [
    "ConfigError",
    "DisorderError",
    "GridFunction",
    "InconsistencyError",
    "InsufficientIterationsError",
    "MCEstimate",
    "ModelParams",
    "NumericalError",
    "ParameterDomainError",
    "Roots",
    "RunConfig",
    "SearchError",
    "SimConfig",
    "SolverSettings",
    "ThresholdSolve",
    "ValueIteration",
    "VariationalSolution",
    "__version__",
    "apply_J",
    "compute_roots",
    "epsilon_optimal_rule",
    "estimate_detection",
    "eta",
    "false_alarm_iterate",
    "jump_map",
    "load_run_config",
    "psi",
    "run_detection",
    "simulate_pi_path",
    "solve_threshold",
    "solve_variational",
    "threshold",
    "threshold_bounds",
    "value_at",
    "value_iterate",
]
