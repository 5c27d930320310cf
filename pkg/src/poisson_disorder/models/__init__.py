"""Data types of the disorder solvers and simulators."""

from .grid import GridFunction, cosine_knots
from .params import ModelParams, Roots
from .results import (
    FalseAlarmSolve,
    LimitCheck,
    LimitsReport,
    SolutionKind,
    ThresholdSolve,
    ValueIteration,
    VariationalSolution,
)
from .simulation import (
    DetectionEstimates,
    DisorderSample,
    IndependenceReport,
    MCEstimate,
    PathRecord,
    PiTrajectory,
    SensitivityReport,
    SimConfig,
)

__all__ = [
    "DetectionEstimates",
    "DisorderSample",
    "FalseAlarmSolve",
    "GridFunction",
    "IndependenceReport",
    "LimitCheck",
    "LimitsReport",
    "MCEstimate",
    "ModelParams",
    "PathRecord",
    "PiTrajectory",
    "Roots",
    "SensitivityReport",
    "SimConfig",
    "SolutionKind",
    "ThresholdSolve",
    "ValueIteration",
    "VariationalSolution",
    "cosine_knots",
]
