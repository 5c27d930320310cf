"""Oracle suite run by ``poisson-disorder selftest``.

Each check compares a numerical routine with an independent closed form or a statistical property and
returns a :class:`CheckResult`. A check that raises is reported as failed with the error message.
"""

from collections.abc import Callable
from functools import partial
from typing import Annotated, Literal

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from scipy import optimize

from .config import RunConfig, SolverSettings
from .exceptions import DisorderError
from .model_core import closed_form_B, compute_roots, eta, eta_prime, psi, psi_prime, threshold_bounds
from .models.grid import GridFunction
from .models.params import ModelParams
from .models.results import LimitsReport, ValueIteration
from .monte_carlo import check_independence
from .value_solver import (
    IntegralTable,
    apply_H,
    evaluate_H,
    exit_value_closed_form,
    threshold_slope,
    value_iterate,
)
from .variational import false_alarm_limits_check, threshold_limits_check

B_TOLERANCE = 1e-8
ROOT_TOLERANCE = 1e-8
WRONSKIAN_TOLERANCE = 1e-10
EXIT_TOLERANCE = 1e-8
SLOPE_TOLERANCE = 1e-6
ODE_TOLERANCE = 1e-4
BOUNDARY_TOLERANCE = 1e-6
BOUNDARY_EPSILON = 1e-7
ODE_STEP = 1e-3
INDEPENDENCE_PATHS = 2_000
PROBE_POINTS = np.linspace(0.05, 0.95, 19)
ITERATE_CHECKS = ("smooth fit", "ODE residual", "V(0) = V(p)")

CheckErrors = (DisorderError, ValueError, ArithmeticError)


class CheckResult(BaseModel):
    """One row of the self-test table."""

    # failed checks carry a NaN value, written as null
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="null")

    name: str
    value: Annotated[float, Field(description="Measured discrepancy or statistic.")]
    tolerance: float
    passed: bool
    detail: str = ""


def _row(name: str, value: float, tolerance: float, detail: str = "") -> CheckResult:
    passed = bool(np.isfinite(value)) and value <= tolerance
    return CheckResult(name=name, value=value, tolerance=tolerance, passed=passed, detail=detail)


def _failed(name: str, detail: str) -> CheckResult:
    return CheckResult(name=name, value=float("nan"), tolerance=0.0, passed=False, detail=detail)


def _guarded(name: str, check: Callable[[], CheckResult]) -> CheckResult:
    try:
        return check()
    except CheckErrors as exc:
        logger.warning("Check '{}' raised {}: {}", name, type(exc).__name__, exc)
        return _failed(name, str(exc))


def _reference_functions(size: int) -> list[tuple[GridFunction, Literal["zero", "h"]]]:
    return [(GridFunction.zero(size), "zero"), (GridFunction.terminal_cost(size), "h")]


def check_closed_form_b(params: ModelParams, settings: SolverSettings) -> CheckResult:
    """Quadrature ``B[0]`` and ``B[h]`` against their closed forms, relative to the natural scale."""
    roots = compute_roots(params)
    worst = 0.0
    for w, kind in _reference_functions(settings.grid_size):
        table = IntegralTable.build(w, params, roots, float(PROBE_POINTS[-1]), settings)
        exact = np.asarray(closed_form_B(params, roots, PROBE_POINTS, kind))
        for r, expected in zip(PROBE_POINTS.tolist(), exact.tolist(), strict=True):
            worst = max(worst, abs(table.b_value(r) - expected) / table.b_scale(r))
    return _row("closed-form B", worst, B_TOLERANCE)


def check_closed_form_roots(params: ModelParams, settings: SolverSettings) -> CheckResult:
    """Roots of the quadrature ``B[0]`` and ``B[h]`` against :func:`threshold_bounds`."""
    roots = compute_roots(params)
    r_h, r_zero = threshold_bounds(params, roots)
    lo, hi = 0.5 * r_h, 0.5 * (1.0 + r_zero)
    worst = 0.0
    for (w, _), target in zip(_reference_functions(settings.grid_size), (r_zero, r_h), strict=True):
        table = IntegralTable.build(w, params, roots, hi, settings)
        root = float(optimize.brentq(table.b_value, lo, hi, xtol=1e-14))
        worst = max(worst, abs(root - target))
    return _row("closed-form roots", worst, ROOT_TOLERANCE, detail=f"r_h={r_h:.6f} r_0={r_zero:.6f}")


def check_wronskian(params: ModelParams) -> CheckResult:
    """``psi' eta - psi eta'`` is the constant ``m1 - m2``."""
    roots = compute_roots(params)
    wronskian = np.asarray(psi_prime(PROBE_POINTS, roots)) * np.asarray(eta(PROBE_POINTS, roots)) - np.asarray(
        psi(PROBE_POINTS, roots)
    ) * np.asarray(eta_prime(PROBE_POINTS, roots))
    return _row("Wronskian", float(np.max(np.abs(wronskian / roots.spread - 1.0))), WRONSKIAN_TOLERANCE)


def check_exit_value(params: ModelParams, settings: SolverSettings) -> CheckResult:
    """``H_r[h]`` from quadrature against its closed form at the middle of the threshold bracket."""
    roots = compute_roots(params)
    r = 0.5 * sum(threshold_bounds(params, roots))
    numeric = apply_H(GridFunction.terminal_cost(settings.grid_size), r, params, roots, settings)
    exact = exit_value_closed_form(numeric.abscissae, r, params, roots)
    return _row("closed-form exit value", float(np.max(np.abs(numeric.ordinates - exact))), EXIT_TOLERANCE)


def check_smooth_fit(vi: ValueIteration, settings: SolverSettings) -> CheckResult:
    """Left slope of every ``v_{n+1}`` at its threshold is ``-1``."""
    roots = compute_roots(vi.params)
    worst = max(
        abs(threshold_slope(vi.iterate(n - 1), vi.thresholds[n], vi.params, roots, settings) + 1.0)
        for n in range(1, vi.n_final + 1)
    )
    return _row("smooth fit", worst, SLOPE_TOLERANCE)


def check_ode_residual(vi: ValueIteration, settings: SolverSettings) -> CheckResult:
    """``(mu^2/2) pi^2 (1-pi)^2 H'' - lambda H + c pi + lambda w(S(pi)) = 0`` below the threshold."""
    params, roots = vi.params, compute_roots(vi.params)
    w, r = vi.iterate(vi.n_final - 1), vi.thresholds[-1]
    centres = r * np.array([0.25, 0.5, 0.75])
    points = np.concatenate((centres - ODE_STEP, centres, centres + ODE_STEP))
    below, middle, above = evaluate_H(w, r, points, params, roots, settings).reshape(3, -1)
    second = (below - 2.0 * middle + above) / ODE_STEP**2
    source = params.c * centres + params.lambda_ * w(centres + params.p * (1.0 - centres))
    residual = 0.5 * params.mu**2 * centres**2 * (1.0 - centres) ** 2 * second - params.lambda_ * middle + source
    return _row("ODE residual", float(np.max(np.abs(residual) / source)), ODE_TOLERANCE)


def check_boundary_value(vi: ValueIteration) -> CheckResult:
    """The value at zero equals the value right after a shock, ``V(0) = V(p)``."""
    final = vi.final
    return _row("V(0) = V(p)", abs(final.at(0.0) - final.at(vi.params.p)), BOUNDARY_TOLERANCE)


def _limits_row(name: str, report: LimitsReport) -> CheckResult:
    worst = max(abs(check.value - check.expected) for check in report.checks)
    detail = ", ".join(f"{check.label}: {check.value:.4f}" for check in report.checks)
    return CheckResult(
        name=name, value=worst, tolerance=report.checks[0].tolerance, passed=report.passed, detail=detail
    )


def check_false_alarm_limits(params: ModelParams, settings: SolverSettings) -> CheckResult:
    """``F_r(pi0)`` tends to its stop-at-once value as ``r -> 0`` and to zero as ``r -> 1``."""
    return _limits_row("false-alarm limits", false_alarm_limits_check(params, settings))


def check_threshold_limits(params: ModelParams, settings: SolverSettings) -> CheckResult:
    """The optimal threshold tends to one for cheap delay and to zero for expensive delay."""
    return _limits_row("threshold limits", threshold_limits_check(params, settings))


def check_independence_row(config: RunConfig) -> CheckResult:
    """Innovation increments are uncorrelated with shock counts and have Brownian variance."""
    sim = config.sim.model_copy(update={"n_paths": min(config.sim.n_paths, INDEPENDENCE_PATHS)})
    report = check_independence(config.model, sim)
    detail = (
        f"var={report.innovation_variance:.4f} "
        f"shocks={report.mean_shocks:.4f} (expected {report.expected_shocks:.4f})"
    )
    return CheckResult(
        name="independence",
        value=max(abs(value) for value in report.correlations),
        tolerance=report.correlation_bound,
        passed=report.passed,
        detail=detail,
    )


def run_selftest(config: RunConfig) -> list[CheckResult]:
    """Run every check with the model and settings of ``config``."""
    params, settings = config.model, config.solver
    logger.info("Running self-test for {}", params)
    results = [
        _guarded("closed-form B", partial(check_closed_form_b, params, settings)),
        _guarded("closed-form roots", partial(check_closed_form_roots, params, settings)),
        _guarded("Wronskian", partial(check_wronskian, params)),
        _guarded("closed-form exit value", partial(check_exit_value, params, settings)),
    ]
    try:
        vi = value_iterate(params, BOUNDARY_EPSILON, settings=settings)
    except CheckErrors as exc:
        logger.warning("Value iteration failed during the self-test: {}", exc)
        results.extend(_failed(name, f"value iteration failed: {exc}") for name in ITERATE_CHECKS)
    else:
        results.append(_guarded("smooth fit", partial(check_smooth_fit, vi, settings)))
        results.append(_guarded("ODE residual", partial(check_ode_residual, vi, settings)))
        results.append(_guarded("V(0) = V(p)", partial(check_boundary_value, vi)))
    results.append(_guarded("false-alarm limits", partial(check_false_alarm_limits, params, settings)))
    results.append(_guarded("threshold limits", partial(check_threshold_limits, params, settings)))
    results.append(_guarded("independence", partial(check_independence_row, config)))
    failed = [result.name for result in results if not result.passed]
    if failed:
        logger.error("Self-test failures: {}", ", ".join(failed))
    else:
        logger.success("All {} self-test checks passed", len(results))
    return results


def format_table(results: list[CheckResult]) -> str:
    """Fixed-width pass/fail table."""
    width = max(len(result.name) for result in results)
    lines = [f"{'check':<{width}}  {'status':<6}  {'value':>12}  {'tolerance':>12}  detail"]
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        lines.append(
            f"{result.name:<{width}}  {status:<6}  {result.value:>12.4e}  {result.tolerance:>12.4e}  {result.detail}"
        )
    return "\n".join(lines)
