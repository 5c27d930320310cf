"""Monte Carlo configuration, path records and estimates."""

from dataclasses import dataclass
from typing import Annotated

import numpy as np
import polars as pl
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field


class SimConfig(BaseModel):
    """Settings of the path simulator."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    dt: Annotated[float, Field(gt=0, description="Step of the uniform diffusion mesh.")] = 1e-3
    horizon: Annotated[
        float | None,
        Field(gt=0, description="Hard time cap; None uses 50 / (lambda p (1 - r)) for detection runs."),
    ] = None
    n_paths: Annotated[int, Field(ge=1, description="Number of independent paths.")] = 10_000
    seed: Annotated[int, Field(ge=0, lt=2**64, description="Root seed of the per-path streams.")] = 0
    antithetic: Annotated[bool, Field(description="Pair Gaussian draws with their negation.")] = False
    workers: Annotated[int, Field(ge=1, description="Processes used to simulate paths.")] = 1
    dump_paths: Annotated[int, Field(ge=0, description="Number of path CSV files to write.")] = 0


@dataclass(frozen=True)
class DisorderSample:
    """Disorder index, shock times up to the horizon, and the disorder time."""

    zeta: int
    arrival_times: NDArray[np.float64]
    theta: float


@dataclass(frozen=True)
class PiTrajectory:
    """Sampled path of ``(t, X_t, N_t, Pi_t)`` on the dt mesh merged with the shock times.

    Values at a shock time are the post-jump ones; the jumps themselves are in ``pi_before`` and
    ``pi_after``.
    """

    t: NDArray[np.float64]
    x: NDArray[np.float64]
    n: NDArray[np.int64]
    pi: NDArray[np.float64]
    log_phi: NDArray[np.float64]
    arrival_times: NDArray[np.float64]
    x_at_arrivals: NDArray[np.float64]
    pi_before: NDArray[np.float64]
    pi_after: NDArray[np.float64]
    theta: float

    def to_frame(self) -> pl.DataFrame:
        """Columns ``t, X, N, Pi``."""
        return pl.DataFrame({"t": self.t, "X": self.x, "N": self.n, "Pi": self.pi})


@dataclass(frozen=True)
class PathRecord:
    """Outcome of one detection run."""

    theta: float
    zeta: int
    tau: float
    alarm_before_theta: bool
    delay: float
    censored: bool


class MCEstimate(BaseModel):
    """Sample mean with its standard error."""

    model_config = ConfigDict(frozen=True)

    mean: float
    stderr: Annotated[float, Field(ge=0)]
    n: Annotated[int, Field(ge=1)]
    censor_fraction: Annotated[float, Field(ge=0, le=1)]


class DetectionEstimates(BaseModel):
    """All estimates computed from one batch of detection paths."""

    model_config = ConfigDict(frozen=True)

    r: float
    bayes_risk: MCEstimate
    false_alarm: MCEstimate
    delay: MCEstimate
    alarm_time: MCEstimate
    censor_fraction: Annotated[float, Field(ge=0, le=1)]
    n_paths: int
    seed: int


class IndependenceReport(BaseModel):
    """Correlation of innovation and shock-count increments over disjoint windows."""

    model_config = ConfigDict(frozen=True)

    n_paths: int
    window: float
    times: list[float]
    correlations: list[float]
    correlation_bound: float
    innovation_variance: float
    innovation_variance_stderr: float
    mean_shocks: float
    mean_shocks_stderr: float
    expected_shocks: float

    @property
    def passed(self) -> bool:
        """Whether all three checks are within their statistical tolerance."""
        correlations_ok = all(abs(value) <= self.correlation_bound for value in self.correlations)
        variance_ok = abs(self.innovation_variance - self.window) <= 3.0 * self.innovation_variance_stderr
        shocks_ok = abs(self.mean_shocks - self.expected_shocks) <= 3.0 * self.mean_shocks_stderr
        return correlations_ok and variance_ok and shocks_ok


class SensitivityReport(BaseModel):
    """Change of the detection estimates when the time step is halved."""

    model_config = ConfigDict(frozen=True)

    dt: float
    coarse: DetectionEstimates
    fine: DetectionEstimates

    @property
    def bayes_risk_shift(self) -> float:
        """Fine minus coarse Bayes risk."""
        return self.fine.bayes_risk.mean - self.coarse.bayes_risk.mean

    @property
    def false_alarm_shift(self) -> float:
        """Fine minus coarse false-alarm frequency."""
        return self.fine.false_alarm.mean - self.coarse.false_alarm.mean

    @property
    def delay_shift(self) -> float:
        """Fine minus coarse mean delay."""
        return self.fine.delay.mean - self.coarse.delay.mean
