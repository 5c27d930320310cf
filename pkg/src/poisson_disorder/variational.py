"""False-alarm probabilities of threshold rules and the budgeted minimal-delay problem.

``F_r(pi)`` is the probability that the rule "stop when ``Pi`` first reaches ``r``" raises its alarm
before the disorder. It is the fixed point of the exit operator with zero delay cost, reached from
``u_0 = h`` with the same geometric rate ``(1 - p)^n`` as the value iteration.
"""

import math

import numpy as np
from loguru import logger
from scipy import optimize

from r2x_core import Err, Ok, Result

from .config import SolverSettings
from .exceptions import InconsistencyError, ParameterDomainError, SearchError
from .model_core import compute_roots
from .models.grid import GridFunction
from .models.params import ModelParams
from .models.results import (
    FalseAlarmSolve,
    LimitCheck,
    LimitsReport,
    SolutionKind,
    VariationalSolution,
)
from .value_solver import apply_H, required_iterations, threshold, value_at, value_iterate

SMALL_THRESHOLD = 1e-3
LARGE_THRESHOLD = 0.999
LIMIT_TOLERANCE = 0.01
SMALL_COST = 1e-3
LARGE_COST = 1e3


def iterate_false_alarm(
    r: float, params: ModelParams, n_iterations: int, settings: SolverSettings | None = None
) -> list[GridFunction]:
    """Return ``u_0 = h, u_1, ..., u_n`` with ``u_{k+1} = H^(0)_r[u_k]``."""
    settings = settings or SolverSettings()
    if not 0.0 < r < 1.0:
        raise ParameterDomainError(f"threshold r must lie in (0, 1), got {r}")
    zero_cost = params.without_delay_cost()
    roots = compute_roots(zero_cost)
    current = GridFunction.terminal_cost(settings.grid_size)
    sequence = [current]
    for n in range(1, n_iterations + 1):
        current = apply_H(current, r, zero_cost, roots, settings)
        current = current.with_ordinates(current.ordinates, derived_from_iteration=n)
        sequence.append(current)
    return sequence


def false_alarm_iterate(
    r: float,
    params: ModelParams,
    epsilon: float | None = None,
    settings: SolverSettings | None = None,
    *,
    n_iterations: int | None = None,
) -> tuple[GridFunction, FalseAlarmSolve]:
    """Approximate ``F_r`` by ``u_n`` with ``(1 - p)^n <= epsilon``.

    The result satisfies ``F_r <= u_n <= F_r + (1 - p)^n h`` and ``u_n = h`` on ``[r, 1]``.

    Parameters
    ----------
    r : float
        Threshold in ``(0, 1)``.
    params : ModelParams
        Model; the delay cost is ignored.
    epsilon : float | None
        Target accuracy, ``settings.epsilon`` by default.
    settings : SolverSettings | None
        Numerical settings.
    n_iterations : int | None
        Override the number of steps.

    Returns
    -------
    tuple[GridFunction, FalseAlarmSolve]
        ``u_n`` and its value at ``params.pi0``.
    """
    settings = settings or SolverSettings()
    epsilon = settings.epsilon if epsilon is None else epsilon
    n = n_iterations if n_iterations is not None else required_iterations(epsilon, params.p)
    u_n = iterate_false_alarm(r, params, n, settings)[-1]
    value = float(np.clip(u_n.at(params.pi0), 0.0, 1.0))
    solve = FalseAlarmSolve(
        r=r, pi0=params.pi0, value=value, n_iterations=n, error_bound=(1.0 - params.p) ** n
    )
    logger.trace("F_{}({}) = {} after {} steps", r, params.pi0, value, n)
    return u_n, solve


def false_alarm_limits_check(params: ModelParams, settings: SolverSettings | None = None) -> LimitsReport:
    """Compare ``F_r(pi0)`` at a small and a large threshold with its limits.

    As ``r -> 0`` the rule stops at once (``pi0 > 0``) or at the first shock (``pi0 = 0``), so the
    limit is ``1 - pi0`` or ``1 - p``. As ``r -> 1`` the false-alarm probability vanishes.
    """
    settings = settings or SolverSettings()
    small_limit = 1.0 - params.pi0 if params.pi0 > 0 else 1.0 - params.p
    checks = []
    for label, r, expected in (
        ("threshold to zero", SMALL_THRESHOLD, small_limit),
        ("threshold to one", LARGE_THRESHOLD, 0.0),
    ):
        _, solve = false_alarm_iterate(r, params, settings=settings)
        passed = abs(solve.value - expected) <= LIMIT_TOLERANCE
        checks.append(
            LimitCheck(
                label=label,
                argument=r,
                value=solve.value,
                expected=expected,
                tolerance=LIMIT_TOLERANCE,
                passed=passed,
            )
        )
        if not passed:
            logger.warning("F_{}({}) = {} is not within {} of {}", r, params.pi0, solve.value, LIMIT_TOLERANCE, expected)
    return LimitsReport(checks=checks)


def threshold_for_cost(
    params: ModelParams, c: float, settings: SolverSettings | None = None, n_iterations: int | None = None
) -> float:
    """Optimal threshold ``pi_inf(c)`` of the Bayes problem with delay cost ``c``.

    A fixed ``n_iterations`` makes the result continuous in ``c``, which the cost search relies on.
    """
    return threshold(value_iterate(params.with_cost(c), settings=settings, n_iterations=n_iterations))


def threshold_curve(
    params: ModelParams, costs: list[float], settings: SolverSettings | None = None
) -> list[float]:
    """``pi_inf(c)`` for increasing ``costs``; the curve must be nonincreasing.

    Raises
    ------
    InconsistencyError
        If the threshold grows with the cost by more than ``settings.consistency_tol``.
    """
    settings = settings or SolverSettings()
    ordered = sorted(costs)
    curve = [threshold_for_cost(params, c, settings) for c in ordered]
    for i in range(1, len(curve)):
        if curve[i] > curve[i - 1] + settings.consistency_tol:
            raise InconsistencyError(
                f"threshold rises from {curve[i - 1]} (c={ordered[i - 1]}) to {curve[i]} (c={ordered[i]})"
            )
    return curve


def threshold_limits_check(params: ModelParams, settings: SolverSettings | None = None) -> LimitsReport:
    """Thresholds approach one for a vanishing delay cost and zero for a prohibitive one."""
    checks = []
    for label, c, expected in (("cost to zero", SMALL_COST, 1.0), ("cost to infinity", LARGE_COST, 0.0)):
        r = threshold_for_cost(params, c, settings)
        checks.append(
            LimitCheck(
                label=label,
                argument=c,
                value=r,
                expected=expected,
                tolerance=LIMIT_TOLERANCE,
                passed=abs(r - expected) <= LIMIT_TOLERANCE,
            )
        )
    return LimitsReport(checks=checks)


def _cost_bracket(params: ModelParams, r_star: float, settings: SolverSettings) -> tuple[float, float]:
    """Costs whose closed-form threshold bounds straddle ``r_star``.

    ``r[0](c) = r_star`` at ``c_hi = lambda m1 (1 - r_star) / ((m1 - 1) r_star)`` and ``r[h](c) = r_star``
    at ``p c_hi``; the bracket is clipped to ``settings.cost_bounds``.
    """
    m1 = compute_roots(params).m1
    c_hi = params.lambda_ * m1 * (1.0 - r_star) / ((m1 - 1.0) * r_star)
    low, high = settings.cost_bounds
    return float(np.clip(params.p * c_hi, low, high)), float(np.clip(c_hi, low, high))


def cost_search_iterations(params: ModelParams, settings: SolverSettings) -> int:
    """Value iterations per cost evaluation, enough for the threshold tolerance."""
    return required_iterations(settings.threshold_tol, params.p)


def _search_threshold(
    alpha: float, params: ModelParams, settings: SolverSettings
) -> Result[tuple[float, float], SearchError]:
    """Find ``r`` with ``F_r(pi0) = alpha`` by a coarse scan followed by Brent's method."""
    precision = settings.alpha_tol / 10.0
    cache: dict[float, float] = {}

    def excess(r: float) -> float:
        if r not in cache:
            cache[r] = false_alarm_iterate(r, params, precision, settings)[1].value - alpha
        return cache[r]

    grid = np.linspace(SMALL_THRESHOLD, LARGE_THRESHOLD, settings.scan_points)
    values = [excess(float(r)) for r in grid]
    crossings = [i for i in range(len(grid) - 1) if values[i] >= 0.0 >= values[i + 1]]
    diagnostics = {"scan_r": grid.tolist(), "scan_excess": values}
    if not crossings:
        return Err(SearchError(f"No threshold reaches a false-alarm probability of {alpha}", diagnostics))
    if len(crossings) > 1 or any(b > a for a, b in zip(values, values[1:], strict=False)):
        logger.warning("False-alarm scan is not monotone in r; using the first crossing")
    i = crossings[0]
    lo, hi = float(grid[i]), float(grid[i + 1])
    try:
        r_star = float(optimize.brentq(excess, lo, hi, xtol=1e-10))
    except (ValueError, RuntimeError) as exc:
        logger.warning("Brent search on [{}, {}] failed ({}); rescanning", lo, hi, exc)
        fine = np.linspace(lo, hi, 4 * settings.scan_points)
        best = min(fine, key=lambda r: abs(excess(float(r))))
        r_star = float(best)
    achieved = excess(r_star) + alpha
    if abs(achieved - alpha) > settings.alpha_tol:
        diagnostics["bracket"] = [lo, hi]
        diagnostics["r"] = r_star
        diagnostics["achieved_alpha"] = achieved
        return Err(SearchError(f"False-alarm match {achieved} misses alpha={alpha}", diagnostics))
    return Ok((r_star, achieved))


def _search_cost(
    r_star: float, params: ModelParams, settings: SolverSettings
) -> Result[float, SearchError]:
    """Find ``c`` with ``pi_inf(c) = r_star`` by Brent's method on ``log c``."""
    c_lo, c_hi = _cost_bracket(params, r_star, settings)
    n_iterations = cost_search_iterations(params, settings)

    def gap(log_c: float) -> float:
        return threshold_for_cost(params, math.exp(log_c), settings, n_iterations) - r_star

    diagnostics: dict[str, object] = {"cost_bracket": [c_lo, c_hi], "r_star": r_star}
    gap_lo, gap_hi = gap(math.log(c_lo)), gap(math.log(c_hi))
    diagnostics["gap_bracket"] = [gap_lo, gap_hi]
    if abs(gap_lo) <= settings.threshold_tol:
        return Ok(c_lo)
    if abs(gap_hi) <= settings.threshold_tol:
        return Ok(c_hi)
    if not gap_lo > 0.0 > gap_hi:
        return Err(SearchError(f"Costs {c_lo}..{c_hi} do not bracket threshold {r_star}", diagnostics))
    log_c = float(optimize.brentq(gap, math.log(c_lo), math.log(c_hi), xtol=1e-12, rtol=1e-12))
    residual = gap(log_c)
    if abs(residual) > settings.threshold_tol:
        diagnostics["residual"] = residual
        return Err(SearchError(f"Threshold match off by {residual:.3e}", diagnostics))
    return Ok(math.exp(log_c))


def solve_variational(
    alpha: float, params: ModelParams, settings: SolverSettings | None = None
) -> Result[VariationalSolution, SearchError]:
    """Minimise the expected delay subject to a false-alarm probability of at most ``alpha``.

    Trivial budgets are answered directly: stopping at once is feasible when ``alpha >= 1 - pi0``
    (``pi0 > 0``) and stopping at the first shock when ``pi0 = 0`` and ``alpha >= 1 - p``. Otherwise the
    threshold ``r*`` with ``F_{r*}(pi0) = alpha`` is found first, then the delay cost ``c*`` whose Bayes
    rule uses ``r*``; the Bayes risk splits as ``V_{c*}(pi0) = alpha + c* E[(tau - Theta)^+]``.

    Returns
    -------
    Result[VariationalSolution, SearchError]
        ``Err`` carries the scan values and brackets when a search fails.
    """
    settings = settings or SolverSettings()
    if not 0.0 < alpha < 1.0:
        raise ParameterDomainError(f"alpha must lie in (0, 1), got {alpha}")
    pi0 = params.pi0
    if pi0 > 0.0 and alpha >= 1.0 - pi0:
        logger.info("alpha={} allows stopping immediately", alpha)
        return Ok(
            VariationalSolution(
                alpha=alpha, pi0=pi0, kind=SolutionKind.IMMEDIATE_STOP, achieved_alpha=1.0 - pi0, expected_delay=0.0
            )
        )
    if pi0 == 0.0 and alpha >= 1.0 - params.p:
        logger.info("alpha={} allows stopping at the first shock", alpha)
        return Ok(
            VariationalSolution(
                alpha=alpha,
                pi0=pi0,
                kind=SolutionKind.STOP_AT_FIRST_ARRIVAL,
                achieved_alpha=1.0 - params.p,
                expected_delay=0.0,
            )
        )
    threshold_result = _search_threshold(alpha, params, settings)
    if threshold_result.is_err():
        return Err(threshold_result.error)
    r_star, achieved = threshold_result.unwrap()
    logger.info("Threshold r*={} gives false-alarm probability {}", r_star, achieved)
    cost_result = _search_cost(r_star, params, settings)
    if cost_result.is_err():
        return Err(cost_result.error)
    c_star = cost_result.unwrap()
    n_iterations = cost_search_iterations(params, settings)
    risk = value_at(value_iterate(params.with_cost(c_star), settings=settings, n_iterations=n_iterations), pi0)
    delay = (risk - alpha) / c_star
    if delay < 0.0:
        logger.warning("Negative delay {} from V={} and alpha={}; clipping to zero", delay, risk, alpha)
        delay = 0.0
    logger.info("Delay cost c*={} and expected delay {}", c_star, delay)
    return Ok(
        VariationalSolution(
            alpha=alpha,
            pi0=pi0,
            kind=SolutionKind.THRESHOLD_RULE,
            r_star=r_star,
            c_star=c_star,
            achieved_alpha=achieved,
            expected_delay=delay,
        )
    )
