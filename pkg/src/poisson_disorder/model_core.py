"""Closed-form primitives of the disorder model.

The pre-jump filter ``Pi`` is a diffusion on ``(0, 1)`` with volatility ``mu pi (1 - pi)``. Its
increasing and decreasing ``lambda``-eigenfunctions are

    psi(pi) = pi^m1 (1 - pi)^(1 - m1),   eta(pi) = pi^m2 (1 - pi)^(1 - m2),

with ``m1 > 1 > 0 > m2`` the roots of ``m (m - 1) = 2 lambda / mu^2``. Everything here is evaluated
in log space because ``(1 - pi)^(1 - m1)`` overflows next to one.
"""

from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .exceptions import ParameterDomainError
from .models.params import ModelParams, Roots

CLAMP = 1e-12

FloatOrArray = float | NDArray[np.float64]


def compute_roots(params: ModelParams) -> Roots:
    """Return the roots of the characteristic equation ``m (m - 1) = 2 lambda / mu^2``.

    Examples
    --------
    >>> roots = compute_roots(ModelParams(mu=2.0, lambda_=2.0, p=0.5))
    >>> round(roots.m1, 7)
    1.618034
    """
    discriminant = np.sqrt(1.0 + 8.0 * params.lambda_ / params.mu**2)
    return Roots(m1=float((1.0 + discriminant) / 2.0), m2=float((1.0 - discriminant) / 2.0))


def _open_unit(pi: ArrayLike, name: str = "pi") -> NDArray[np.float64]:
    values = np.asarray(pi, dtype=np.float64)
    if np.any(~np.isfinite(values)) or np.any(values <= 0.0) or np.any(values >= 1.0):
        raise ParameterDomainError(f"{name} must lie in the open interval (0, 1)")
    return np.clip(values, CLAMP, 1.0 - CLAMP)


def _closed_unit(pi: ArrayLike) -> NDArray[np.float64]:
    values = np.asarray(pi, dtype=np.float64)
    if np.any(~np.isfinite(values)) or np.any(values < 0.0) or np.any(values > 1.0):
        raise ParameterDomainError("pi must lie in the closed interval [0, 1]")
    return values


def _as_output(values: NDArray[np.float64], like: ArrayLike) -> FloatOrArray:
    if np.ndim(like) == 0:
        return float(values)
    return values


def _log_eigen(pi: NDArray[np.float64], m: float) -> NDArray[np.float64]:
    return m * np.log(pi) + (1.0 - m) * np.log1p(-pi)


def log_psi(pi: ArrayLike, roots: Roots) -> FloatOrArray:
    """Return ``log psi(pi)``."""
    return _as_output(_log_eigen(_open_unit(pi), roots.m1), pi)


def log_eta(pi: ArrayLike, roots: Roots) -> FloatOrArray:
    """Return ``log eta(pi)``."""
    return _as_output(_log_eigen(_open_unit(pi), roots.m2), pi)


def psi(pi: ArrayLike, roots: Roots) -> FloatOrArray:
    """Increasing eigenfunction ``psi``; vanishes at zero and blows up at one.

    Examples
    --------
    >>> psi(0.5, Roots(m1=2.5, m2=-1.5))
    0.5
    """
    return _as_output(np.exp(_log_eigen(_open_unit(pi), roots.m1)), pi)


def eta(pi: ArrayLike, roots: Roots) -> FloatOrArray:
    """Decreasing eigenfunction ``eta``; blows up at zero and vanishes at one."""
    return _as_output(np.exp(_log_eigen(_open_unit(pi), roots.m2)), pi)


def _log_slope_factor(pi: NDArray[np.float64], m: float) -> NDArray[np.float64]:
    # d/dpi log(pi^m (1-pi)^(1-m)) = (m - pi) / (pi (1 - pi))
    return np.log(np.abs(m - pi)) - np.log(pi) - np.log1p(-pi)


def psi_prime(pi: ArrayLike, roots: Roots) -> FloatOrArray:
    """Analytic derivative of ``psi``; positive on ``(0, 1)`` since ``m1 > 1``."""
    values = _open_unit(pi)
    return _as_output(np.exp(_log_eigen(values, roots.m1) + _log_slope_factor(values, roots.m1)), pi)


def eta_prime(pi: ArrayLike, roots: Roots) -> FloatOrArray:
    """Analytic derivative of ``eta``; negative on ``(0, 1)`` since ``m2 < 0``."""
    values = _open_unit(pi)
    return _as_output(-np.exp(_log_eigen(values, roots.m2) + _log_slope_factor(values, roots.m2)), pi)


def jump_map(pi: ArrayLike, p: float) -> FloatOrArray:
    """Posterior right after a shock, ``S(pi) = pi + p (1 - pi)``."""
    values = _closed_unit(pi)
    return _as_output(values + p * (1.0 - values), pi)


def cost_g(pi: ArrayLike, c: float) -> FloatOrArray:
    """Running delay cost ``g(pi) = c pi``."""
    values = _closed_unit(pi)
    return _as_output(c * values, pi)


def cost_h(pi: ArrayLike) -> FloatOrArray:
    """Terminal false-alarm cost ``h(pi) = 1 - pi``."""
    values = _closed_unit(pi)
    return _as_output(1.0 - values, pi)


def threshold_bounds(params: ModelParams, roots: Roots | None = None) -> tuple[float, float]:
    """Closed-form bracket ``(r[h], r[0])`` containing every threshold ``r[w]``.

    ``r[h]`` is the root of ``B[h]`` and ``r[0]`` the root of ``B[0]``; any admissible ``w`` with
    ``0 <= w <= h`` has its root in between.
    """
    if not params.has_delay_cost:
        raise ParameterDomainError("threshold bounds require a positive delay cost c")
    roots = roots or compute_roots(params)
    m1 = roots.m1
    slope = (m1 - 1.0) * params.c / params.lambda_
    r_zero = m1 / (slope + m1)
    r_h = m1 * params.p / (slope + m1 * params.p)
    return r_h, r_zero


def closed_form_B(
    params: ModelParams, roots: Roots, pi: ArrayLike, kind: Literal["zero", "h"]
) -> FloatOrArray:
    """Closed forms of ``B[0]`` and ``B[h]``.

    ``B[w](r) = psi/(r(1-r)) * (-r((m1-1)c/lambda + m1 q) + m1 q)`` with ``q = 1`` for ``w = 0`` and
    ``q = p`` for ``w = h``.
    """
    values = _open_unit(pi)
    m1 = roots.m1
    q = 1.0 if kind == "zero" else params.p
    bracket = -values * ((m1 - 1.0) * params.c / params.lambda_ + m1 * q) + m1 * q
    prefactor = np.exp(_log_eigen(values, m1) - np.log(values) - np.log1p(-values))
    return _as_output(prefactor * bracket, pi)
