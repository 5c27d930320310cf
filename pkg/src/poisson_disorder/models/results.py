"""Result containers for the value and false-alarm solvers."""

from dataclasses import dataclass, field
from enum import StrEnum
from typing import Annotated

from pydantic import BaseModel, ConfigDict, Field

from .grid import GridFunction
from .params import ModelParams


class ThresholdSolve(BaseModel):
    """Outcome of solving ``B[w](r) = 0`` on the closed-form bracket."""

    model_config = ConfigDict(frozen=True)

    r: Annotated[float, Field(gt=0, lt=1, description="Root r[w] of the threshold equation.")]
    d: Annotated[float, Field(description="Root d[w] where immediate stopping stops paying off.")]
    bracket_lo: Annotated[float, Field(description="Closed-form lower bound r[h].")]
    bracket_hi: Annotated[float, Field(description="Closed-form upper bound r[0].")]
    residual: Annotated[float, Field(ge=0, description="|B[w](r)| relative to its natural scale.")]
    iterations: Annotated[int, Field(ge=0, description="Bisection steps taken.")]


@dataclass(frozen=True)
class ValueIteration:
    """Sequence ``v_0 = h, v_{n+1} = J[v_n]`` with its thresholds and error certificate."""

    params: ModelParams
    iterates: list[tuple[GridFunction, float]]
    n_final: int
    sup_error_bound: float
    fixed_point_residual: float
    solves: list[ThresholdSolve] = field(default_factory=list)

    @property
    def final(self) -> GridFunction:
        """The last iterate ``v_N``."""
        return self.iterates[-1][0]

    @property
    def thresholds(self) -> list[float]:
        """Thresholds ``pi_0, ..., pi_N``."""
        return [threshold for _, threshold in self.iterates]

    def iterate(self, n: int) -> GridFunction:
        """Return ``v_n``."""
        return self.iterates[n][0]


class FalseAlarmSolve(BaseModel):
    """False-alarm probability ``F_r(pi0)`` of the threshold rule at ``r``."""

    model_config = ConfigDict(frozen=True)

    r: Annotated[float, Field(gt=0, lt=1)]
    pi0: Annotated[float, Field(ge=0, le=1)]
    value: Annotated[float, Field(ge=0, le=1)]
    n_iterations: Annotated[int, Field(ge=0)]
    error_bound: Annotated[float, Field(ge=0, description="Certified bound (1-p)^n.")]


class SolutionKind(StrEnum):
    """How the variational problem was solved."""

    IMMEDIATE_STOP = "immediate_stop"
    STOP_AT_FIRST_ARRIVAL = "stop_at_first_arrival"
    THRESHOLD_RULE = "threshold_rule"


class VariationalSolution(BaseModel):
    """Minimal-delay rule under a false-alarm budget ``alpha``."""

    model_config = ConfigDict(frozen=True)

    alpha: Annotated[float, Field(gt=0, lt=1)]
    pi0: Annotated[float, Field(ge=0, le=1)]
    kind: SolutionKind
    r_star: float | None = None
    c_star: float | None = None
    achieved_alpha: Annotated[float, Field(ge=0, le=1)]
    expected_delay: Annotated[float, Field(ge=0)]


class LimitCheck(BaseModel):
    """One row of a limit report."""

    model_config = ConfigDict(frozen=True)

    label: str
    argument: float
    value: float
    expected: float
    tolerance: float
    passed: bool


class LimitsReport(BaseModel):
    """Collection of limit checks; ``passed`` is true when every row passed."""

    model_config = ConfigDict(frozen=True)

    checks: list[LimitCheck]

    @property
    def passed(self) -> bool:
        """Whether every check passed."""
        return all(check.passed for check in self.checks)
