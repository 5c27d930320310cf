"""Exceptions raised by the disorder solvers and simulators."""

from typing import Any


class DisorderError(Exception):
    """Base class for every error raised by ``poisson_disorder``."""


class ParameterDomainError(DisorderError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class ConfigError(DisorderError, ValueError):
    """A run configuration could not be loaded or validated."""


class NumericalError(DisorderError):
    """A quadrature or root finder did not reach its tolerance.

    Parameters
    ----------
    message : str
        Human readable description.
    estimate : float | None
        Best value reached before giving up.
    """

    def __init__(self, message: str, estimate: float | None = None) -> None:
        super().__init__(message)
        self.estimate = estimate


class InconsistencyError(DisorderError):
    """A structural property of the solution was violated beyond tolerance."""


class InsufficientIterationsError(DisorderError):
    """More value iterates are needed than were computed."""

    def __init__(self, message: str, required: int) -> None:
        super().__init__(message)
        self.required = required


class SearchError(DisorderError):
    """The variational search could not bracket or match its target.

    The ``diagnostics`` mapping holds the scan values and brackets tried so the caller can report them.
    """

    def __init__(self, message: str, diagnostics: dict[str, Any] | None = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or {}
