"""Model parameters and the roots of the characteristic equation."""

import math
from typing import Annotated, Any

from pydantic import BaseModel, ConfigDict, Field, field_validator
from pydantic.dataclasses import dataclass


class ModelParams(BaseModel):
    """Parameters of the Poisson disorder problem.

    The observation is ``X_t = W_t + mu (t - Theta)^+`` where ``Theta`` is the arrival time of the
    first "successful" Poisson shock. A shock is successful with probability ``p`` and the disorder
    is already present at time zero with probability ``pi0``.

    A zero delay cost is legal so that the same parameters can drive the false-alarm operator; every
    Bayes-risk routine refuses it (see :attr:`has_delay_cost`).

    Examples
    --------
    >>> params = ModelParams(mu=1.0, lambda_=2.0, p=0.5, c=0.5)
    >>> params.model_dump(by_alias=True)["lambda"]
    2.0
    """

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    mu: Annotated[float, Field(description="Drift of the observation after the disorder.")]
    lambda_: Annotated[float, Field(alias="lambda", gt=0, description="Rate of the Poisson shocks.")]
    p: Annotated[float, Field(gt=0, le=1, description="Probability that a shock triggers the disorder.")]
    c: Annotated[float, Field(ge=0, description="Cost per unit of detection delay.")] = 0.5
    pi0: Annotated[float, Field(ge=0, le=1, description="Prior probability of disorder at time zero.")] = 0.0

    @field_validator("mu")
    @classmethod
    def _check_mu(cls, value: float) -> float:
        if value == 0 or not math.isfinite(value):
            raise ValueError(f"mu must be a finite non-zero drift, got {value}")
        return value

    @field_validator("lambda_", "c")
    @classmethod
    def _check_finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError(f"expected a finite value, got {value}")
        return value

    @property
    def has_delay_cost(self) -> bool:
        """Whether the parameters can be used for the Bayes risk (``c > 0``)."""
        return self.c > 0

    def with_cost(self, c: float) -> "ModelParams":
        """Return a validated copy with a different delay cost."""
        return self._replace(c=c)

    def with_prior(self, pi0: float) -> "ModelParams":
        """Return a validated copy with a different prior."""
        return self._replace(pi0=pi0)

    def without_delay_cost(self) -> "ModelParams":
        """Return the zero-cost copy used by the false-alarm operator."""
        return self._replace(c=0.0)

    def _replace(self, **changes: Any) -> "ModelParams":
        return type(self).model_validate({**self.model_dump(), **changes})

    @classmethod
    def figure_one(cls) -> "ModelParams":
        """Reference parameters used for the sequential-approximation curves."""
        return cls(mu=1.0, lambda_=2.0, p=0.5, c=0.5, pi0=0.0)


@dataclass(frozen=True)
class Roots:
    """Roots ``m1 > 1`` and ``m2 < 0`` of ``m (m - 1) = 2 lambda / mu^2``."""

    m1: float = Field(gt=1)
    m2: float = Field(lt=0)

    @property
    def spread(self) -> float:
        """The difference ``m1 - m2``, which is also the Wronskian of psi and eta."""
        return self.m1 - self.m2
