"""Dynamic-programming engine for the Bayes risk.

For a continuation function ``w`` the operator ``J[w]`` is the value of stopping the pre-jump
diffusion at the first exit above a threshold ``r`` while paying ``g`` per unit time and, at the
first shock, collecting ``w`` at the jumped posterior. On ``(0, r)`` the exit value is

    H_r[w](pi) = (h(r) - eta(r) I2(r)) psi(pi) / psi(r) + psi(pi) I1(pi) + eta(pi) I2(pi)

with ``I2(pi) = int_0^pi u2`` and ``I1(pi) = int_pi^r u1``. The optimal ``r = r[w]`` is the unique
root of ``B[w](r) = psi'(r) h(r) + psi(r) - (m1 - m2) I2(r)``, which is also where ``H_r[w]`` meets
``h`` with slope ``-1``.
"""

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from loguru import logger
from numpy.typing import ArrayLike, NDArray
from scipy import optimize

from .config import SolverSettings
from .exceptions import (
    InconsistencyError,
    InsufficientIterationsError,
    NumericalError,
    ParameterDomainError,
)
from .model_core import (
    compute_roots,
    eta,
    log_eta,
    log_psi,
    psi,
    psi_prime,
    threshold_bounds,
)
from .models.grid import GridFunction
from .models.params import ModelParams, Roots
from .models.results import ThresholdSolve, ValueIteration
from .utils_quadrature import Integrand, gauss_order_for, integrate_cells, integrate_graded


def _source(w: GridFunction, y: NDArray[np.float64], params: ModelParams) -> NDArray[np.float64]:
    return params.c * y + params.lambda_ * w(y + params.p * (1.0 - y))


def _log_kernel(y: NDArray[np.float64], params: ModelParams, roots: Roots) -> NDArray[np.float64]:
    # log of 2 / ((m1 - m2) sigma^2(y))
    return (
        math.log(2.0)
        - math.log(roots.spread)
        - 2.0 * math.log(abs(params.mu))
        - 2.0 * np.log(y)
        - 2.0 * np.log1p(-y)
    )


def _u(
    w: GridFunction, y: NDArray[np.float64], which: Literal[1, 2], params: ModelParams, roots: Roots
) -> NDArray[np.float64]:
    log_eigen = log_eta(y, roots) if which == 1 else log_psi(y, roots)
    return _source(w, y, params) * np.exp(log_eigen + _log_kernel(y, params, roots))


def integrand_u(
    w: GridFunction, y: ArrayLike, which: Literal[1, 2], params: ModelParams, roots: Roots
) -> float | NDArray[np.float64]:
    """Evaluate ``u1[w]`` (``which=1``, built on eta) or ``u2[w]`` (``which=2``, built on psi).

    ``u[w](y) = 2 (g(y) + lambda w(S(y))) e(y) / ((m1 - m2) sigma^2(y))`` with ``e = eta`` or ``psi``.
    """
    if which not in (1, 2):
        raise ParameterDomainError(f"which must be 1 or 2, got {which}")
    values = np.asarray(y, dtype=np.float64)
    if np.any(values <= 0.0) or np.any(values >= 1.0):
        raise ParameterDomainError("y must lie in the open interval (0, 1)")
    result = _u(w, np.atleast_1d(values), which, params, roots)
    return float(result[0]) if values.ndim == 0 else result


@dataclass(frozen=True)
class IntegralTable:
    """Cumulative integrals of ``u1[w]`` and ``u2[w]`` at the knots of ``w`` up to ``upper``.

    ``cum_u2[k] = int_0^{x_k} u2`` and ``rev_u1[k] = int_{x_k}^{x_last} u1`` for ``k <= last``, where
    ``x_last`` is the last knot not beyond ``upper``. The tables are read-only once built.
    """

    w: GridFunction
    params: ModelParams
    roots: Roots
    upper: float
    last: int
    cum_u2: NDArray[np.float64]
    rev_u1: NDArray[np.float64]
    order: int

    @classmethod
    def build(
        cls,
        w: GridFunction,
        params: ModelParams,
        roots: Roots,
        upper: float,
        settings: SolverSettings | None = None,
    ) -> "IntegralTable":
        """Integrate both integrands cell by cell on ``[0, upper]``."""
        settings = settings or SolverSettings()
        if not 0.0 < upper < 1.0:
            raise ParameterDomainError(f"upper must lie in (0, 1), got {upper}")
        order = gauss_order_for(settings.quadrature_tol)
        x = w.abscissae
        last = int(np.searchsorted(x, upper, side="right")) - 1
        if last < 1:
            raise ParameterDomainError(f"upper={upper} lies inside the first grid cell [0, {x[1]}]")

        def u1(y: NDArray[np.float64]) -> NDArray[np.float64]:
            return _u(w, y, 1, params, roots)

        def u2(y: NDArray[np.float64]) -> NDArray[np.float64]:
            return _u(w, y, 2, params, roots)

        cells_u2 = np.zeros(last)
        cells_u1 = np.zeros(last)
        cells_u2[0] = cls._u2_from_zero(w, params, roots, x[1], order, u2)
        cells_u2[1:] = integrate_cells(u2, x[1:last], x[2 : last + 1], order)
        cells_u1[1:] = integrate_cells(u1, x[1:last], x[2 : last + 1], order)
        cum_u2 = np.concatenate(([0.0], np.cumsum(cells_u2)))
        rev_u1 = np.concatenate((np.cumsum(cells_u1[::-1])[::-1], [0.0]))
        # u1 is not integrable at zero
        rev_u1[0] = np.inf
        for array in (cum_u2, rev_u1):
            array.setflags(write=False)
        logger.trace("Built integral table with {} cells up to {}", last, upper)
        return cls(w, params, roots, upper, last, cum_u2, rev_u1, order)

    @staticmethod
    def _u2_from_zero(
        w: GridFunction, params: ModelParams, roots: Roots, b: float, order: int, u2: Integrand
    ) -> float:
        covered, uncovered = integrate_graded(u2, 0.0, b, 0.0, order)
        if uncovered == 0.0:
            return covered
        # u2(y) ~ 2 lambda w(p) y^(m1 - 2) / ((m1 - m2) mu^2) next to zero
        coefficient = 2.0 * params.lambda_ * w.at(params.p) / (roots.spread * params.mu**2)
        return covered + coefficient * uncovered ** (roots.m1 - 1.0) / (roots.m1 - 1.0)

    def _cell_of(self, z: NDArray[np.float64]) -> NDArray[np.intp]:
        x = self.w.abscissae
        return np.clip(np.searchsorted(x, z, side="right") - 1, 0, x.size - 2)

    def _partial(
        self, which: Literal[1, 2], a: NDArray[np.float64], b: NDArray[np.float64]
    ) -> NDArray[np.float64]:
        """Integrals over ``[a_i, b_i]``, each inside one grid cell."""
        w, params, roots = self.w, self.params, self.roots

        def func(y: NDArray[np.float64]) -> NDArray[np.float64]:
            return _u(w, y, which, params, roots)

        out = np.zeros(a.shape)
        nonempty = b > a
        from_zero = nonempty & (a == 0.0) if which == 2 else np.zeros(a.shape, dtype=bool)
        rest = nonempty & ~from_zero
        out[rest] = integrate_cells(func, a[rest], b[rest], self.order)
        for i in np.flatnonzero(from_zero):
            out[i] = self._u2_from_zero(w, params, roots, float(b[i]), self.order, func)
        return out

    def i2(self, z: ArrayLike) -> NDArray[np.float64]:
        """``int_0^z u2`` for ``0 <= z <= upper``."""
        z = np.atleast_1d(np.asarray(z, dtype=np.float64))
        cells = self._cell_of(z)
        knots = self.w.abscissae[cells]
        return self.cum_u2[cells] + self._partial(2, knots, z)

    def _to_last(self, z: NDArray[np.float64]) -> NDArray[np.float64]:
        # int_z^{x_last} u1, negative for z beyond x_last
        x = self.w.abscissae
        cells = self._cell_of(z)
        beyond = cells >= self.last
        out = np.empty(z.shape)
        below = ~beyond
        nxt = cells[below] + 1
        out[below] = self._partial(1, z[below], x[nxt]) + self.rev_u1[nxt]
        out[beyond] = -self._partial(1, x[cells[beyond]], z[beyond])
        return out

    def i1(self, z: ArrayLike, r: float) -> NDArray[np.float64]:
        """``int_z^r u1`` for ``0 < z <= r <= upper``."""
        z = np.atleast_1d(np.asarray(z, dtype=np.float64))
        return self._to_last(z) - self._to_last(np.array([r]))[0]

    def b_value(self, r: float) -> float:
        """``B[w](r)``."""
        return self.b_scale(r) - self.roots.spread * float(self.i2(r)[0])

    def b_scale(self, r: float) -> float:
        """``psi'(r) h(r) + psi(r)``, the integral of the kernel against ``lambda h``."""
        return float(psi_prime(r, self.roots)) * (1.0 - r) + float(psi(r, self.roots))

    def slope_at(self, r: float) -> float:
        """Left derivative of ``H_r[w]`` at ``r``."""
        integral = float(self.i2(r)[0])
        return (float(psi_prime(r, self.roots)) * (1.0 - r) - self.roots.spread * integral) / float(
            psi(r, self.roots)
        )

    def exit_value(self, points: ArrayLike, r: float) -> NDArray[np.float64]:
        """``H_r[w]`` at ``points`` in ``[0, 1]``."""
        pts = np.asarray(points, dtype=np.float64)
        out = 1.0 - pts
        out[pts == 0.0] = self.w.at(self.params.p)
        inside = (pts > 0.0) & (pts < r)
        if np.any(inside):
            z = pts[inside]
            i2_r = float(self.i2(r)[0])
            log_psi_r = float(log_psi(r, self.roots))
            homogeneous = (1.0 - r - float(eta(r, self.roots)) * i2_r) * np.exp(
                log_psi(z, self.roots) - log_psi_r
            )
            out[inside] = (
                homogeneous + psi(z, self.roots) * self.i1(z, r) + eta(z, self.roots) * self.i2(z)
            )
        return out


def _check_threshold(r: float) -> None:
    if not 0.0 < r < 1.0:
        raise ParameterDomainError(f"threshold r must lie in (0, 1), got {r}")


def compute_B(
    w: GridFunction, r: float, params: ModelParams, roots: Roots, settings: SolverSettings | None = None
) -> float:
    """Evaluate ``B[w](r)``; ``r`` is a root exactly when ``H_r[w]`` fits ``h`` smoothly."""
    _check_threshold(r)
    return IntegralTable.build(w, params, roots, r, settings).b_value(r)


def _threshold_table(
    w: GridFunction, params: ModelParams, roots: Roots, settings: SolverSettings
) -> tuple[ThresholdSolve, IntegralTable]:
    if not params.has_delay_cost:
        raise ParameterDomainError("the threshold equation needs a positive delay cost c")
    lo, hi = threshold_bounds(params, roots)
    table = IntegralTable.build(w, params, roots, hi, settings)
    b_lo, b_hi = table.b_value(lo), table.b_value(hi)
    scale_lo, scale_hi = table.b_scale(lo), table.b_scale(hi)
    if b_lo < -settings.sign_tol * scale_lo or b_hi > settings.sign_tol * scale_hi:
        raise InconsistencyError(
            f"B[w] has the wrong sign on [{lo}, {hi}]: B(lo)={b_lo:.3e}, B(hi)={b_hi:.3e}"
        )
    iterations = 0
    if hi - lo <= settings.bisect_tol or b_lo <= 0.0:
        r = lo
    elif b_hi >= 0.0:
        r = hi
    else:
        r, info = optimize.bisect(
            table.b_value,
            lo,
            hi,
            xtol=settings.bisect_tol,
            maxiter=settings.max_bisect_iterations,
            full_output=True,
            disp=False,
        )
        iterations = int(info.iterations)
        if not info.converged:
            raise NumericalError(f"Threshold bisection did not converge after {iterations} steps", r)
    residual = abs(table.b_value(r)) / table.b_scale(r)
    d = _stopping_root(w, params)
    if d >= r + settings.sign_tol:
        raise InconsistencyError(f"Stopping root d={d} is not below the threshold r={r}")
    logger.debug("Threshold r={} in [{}, {}] after {} bisections (residual {:.2e})", r, lo, hi, iterations, residual)
    solve = ThresholdSolve(
        r=r, d=d, bracket_lo=lo, bracket_hi=hi, residual=residual, iterations=iterations
    )
    return solve, table


def _stopping_root(w: GridFunction, params: ModelParams) -> float:
    """Root ``d[w]`` of ``-g - lambda w(S) + lambda h``, where immediate stopping stops paying off."""

    def gain(pi: float) -> float:
        return params.lambda_ * (1.0 - pi) - params.c * pi - params.lambda_ * w.at(pi + params.p * (1.0 - pi))

    if gain(0.0) <= 0.0:
        return 0.0
    return float(optimize.brentq(gain, 0.0, 1.0, xtol=1e-14))


def solve_threshold(
    w: GridFunction, params: ModelParams, roots: Roots, settings: SolverSettings | None = None
) -> ThresholdSolve:
    """Bisect ``B[w]`` on the closed-form bracket ``[r[h], r[0]]``.

    Raises
    ------
    InconsistencyError
        If ``B[w]`` violates the sign conditions at the bracket ends beyond ``sign_tol``.
    NumericalError
        If the bisection does not converge.
    """
    solve, _ = _threshold_table(w, params, roots, settings or SolverSettings())
    return solve


def apply_H(
    w: GridFunction, r: float, params: ModelParams, roots: Roots, settings: SolverSettings | None = None
) -> GridFunction:
    """Tabulate the exit value ``H_r[w]`` on the knots of ``w``.

    ``H_r[w] = h`` on ``[r, 1]`` and ``H_r[w](0) = w(p)``. With ``c = 0`` this is the false-alarm
    operator.
    """
    _check_threshold(r)
    table = IntegralTable.build(w, params, roots, r, settings)
    return w.with_ordinates(table.exit_value(w.abscissae, r), derived_from_iteration=None)


def evaluate_H(
    w: GridFunction,
    r: float,
    points: ArrayLike,
    params: ModelParams,
    roots: Roots,
    settings: SolverSettings | None = None,
) -> NDArray[np.float64]:
    """``H_r[w]`` at arbitrary points of ``[0, 1]``."""
    _check_threshold(r)
    pts = np.asarray(points, dtype=np.float64)
    if np.any(pts < 0.0) or np.any(pts > 1.0):
        raise ParameterDomainError("points must lie in [0, 1]")
    return IntegralTable.build(w, params, roots, r, settings).exit_value(pts, r)


def threshold_slope(
    w: GridFunction, r: float, params: ModelParams, roots: Roots, settings: SolverSettings | None = None
) -> float:
    """Left derivative ``(H_r[w])'(r-)``; equals ``-1`` exactly at ``r = r[w]``."""
    _check_threshold(r)
    return IntegralTable.build(w, params, roots, r, settings).slope_at(r)


def exit_value_closed_form(pi: ArrayLike, r: float, params: ModelParams, roots: Roots) -> NDArray[np.float64]:
    """Closed form of ``H_r[h]``.

    With ``w = h`` the source is linear, so ``H_r[h] = f + (h(r) - f(r)) psi / psi(r)`` on ``(0, r)``
    with ``f(pi) = (1 - p) + (c / lambda - (1 - p)) pi``.
    """
    _check_threshold(r)
    pts = np.asarray(pi, dtype=np.float64)
    slope = params.c / params.lambda_ - (1.0 - params.p)

    def f(z: NDArray[np.float64] | float) -> NDArray[np.float64] | float:
        return (1.0 - params.p) + slope * z

    out = 1.0 - pts
    out[pts == 0.0] = 1.0 - params.p
    inside = (pts > 0.0) & (pts < r)
    ratio = np.exp(log_psi(pts[inside], roots) - float(log_psi(r, roots)))
    out[inside] = f(pts[inside]) + (1.0 - r - float(f(r))) * ratio
    return out


def concave_majorant(x: NDArray[np.float64], y: NDArray[np.float64]) -> NDArray[np.float64]:
    """Smallest concave function above the points ``(x, y)``, sampled at ``x``.

    Upper hull by the monotone chain; ``x`` must be increasing.
    """
    hull: list[int] = []
    for i in range(x.size):
        while len(hull) >= 2:
            j, k = hull[-2], hull[-1]
            cross = (x[k] - x[j]) * (y[i] - y[j]) - (y[k] - y[j]) * (x[i] - x[j])
            if cross < 0:
                break
            hull.pop()
        hull.append(i)
    return np.interp(x, x[hull], y[hull])


def apply_J(
    w: GridFunction, params: ModelParams, roots: Roots, settings: SolverSettings | None = None
) -> tuple[GridFunction, ThresholdSolve]:
    """One dynamic-programming step ``J[w] = H_{r[w]}[w]``."""
    settings = settings or SolverSettings()
    solve, table = _threshold_table(w, params, roots, settings)
    values = table.exit_value(w.abscissae, solve.r)
    result = w.with_ordinates(values, derived_from_iteration=None)
    defect = result.concavity_defect()
    if defect > settings.concavity_tol:
        logger.warning("Projecting J[w] onto its concave majorant (chord defect {:.3e})", defect)
        result = result.with_ordinates(concave_majorant(result.abscissae, result.ordinates))
    return result, solve


def required_iterations(epsilon: float, p: float) -> int:
    """Smallest ``n`` with ``(1 - p)^n <= epsilon``.

    Examples
    --------
    >>> required_iterations(0.001, 0.5), required_iterations(0.01, 0.9)
    (10, 2)
    """
    if not 0.0 < epsilon < 1.0:
        raise ParameterDomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if p >= 1.0:
        return 1
    # guard against log ratios landing a hair above an integer
    return max(1, math.ceil(math.log(epsilon) / math.log1p(-p) - 1e-9))


def _check_iterate(current: GridFunction, previous: GridFunction, n: int, tol: float) -> None:
    x, y = current.abscissae, current.ordinates
    if np.any(y < -tol) or np.any(y > 1.0 - x + tol):
        raise InconsistencyError(f"v_{n} leaves the band 0 <= v <= h")
    increase = float(np.max(y - previous.ordinates))
    if increase > tol:
        raise InconsistencyError(f"v_{n} exceeds v_{n - 1} by {increase:.3e}")


def value_iterate(
    params: ModelParams,
    epsilon: float | None = None,
    *,
    settings: SolverSettings | None = None,
    n_iterations: int | None = None,
) -> ValueIteration:
    """Iterate ``v_{n+1} = J[v_n]`` from ``v_0 = h``.

    Parameters
    ----------
    params : ModelParams
        Model with ``c > 0``.
    epsilon : float | None
        Target accuracy; defaults to ``settings.epsilon``. The certified count
        ``ceil(ln eps / ln(1 - p))`` is a floor, and iteration continues until two successive iterates
        differ by at most ``eps / 2``.
    settings : SolverSettings | None
        Numerical settings.
    n_iterations : int | None
        Run exactly this many steps instead.

    Returns
    -------
    ValueIteration
        Iterates, thresholds, ``(1 - p)^N`` and the fixed-point residual ``sup |J[v_N] - v_N|``.
    """
    settings = settings or SolverSettings()
    if not params.has_delay_cost:
        raise ParameterDomainError("value iteration needs a positive delay cost c")
    epsilon = settings.epsilon if epsilon is None else epsilon
    floor = required_iterations(epsilon, params.p)
    if n_iterations is not None and n_iterations < 1:
        raise ParameterDomainError(f"n_iterations must be positive, got {n_iterations}")
    limit = n_iterations if n_iterations is not None else floor + settings.max_extra_iterations
    roots = compute_roots(params)
    current = GridFunction.terminal_cost(settings.grid_size)
    iterates: list[tuple[GridFunction, float]] = [(current, 0.0)]
    solves: list[ThresholdSolve] = []
    logger.info("Value iteration for {} (certified floor {} steps)", params, floor)
    step = math.inf
    for n in range(1, limit + 1):
        following, solve = apply_J(current, params, roots, settings)
        following = following.with_ordinates(following.ordinates, derived_from_iteration=n)
        _check_iterate(following, current, n, settings.consistency_tol)
        step = following.sup_distance(current)
        iterates.append((following, solve.r))
        solves.append(solve)
        logger.debug("Iteration {}: threshold={} sup-change={:.3e}", n, solve.r, step)
        current = following
        if n_iterations is None and n >= floor and step <= epsilon / 2:
            break
    else:
        if n_iterations is None:
            logger.warning("Iterates still move by {:.3e} after {} steps", step, limit)
    n_final = len(iterates) - 1
    check, _ = apply_J(current, params, roots, settings)
    residual = check.sup_distance(current)
    bound = (1.0 - params.p) ** n_final
    logger.info(
        "Threshold {} after {} iterations (bound {:.3e}, residual {:.3e})",
        iterates[-1][1],
        n_final,
        bound,
        residual,
    )
    return ValueIteration(params, iterates, n_final, bound, residual, solves)


def value_at(vi: ValueIteration, pi: float) -> float:
    """Approximate Bayes risk ``V(pi)`` from the last iterate."""
    if not 0.0 <= pi <= 1.0:
        raise ParameterDomainError(f"pi must lie in [0, 1], got {pi}")
    return vi.final.at(pi)


def threshold(vi: ValueIteration) -> float:
    """Approximate optimal threshold, the last ``pi_n``.

    The bracket and residual of the final solve are in ``vi.solves[-1]``.
    """
    return vi.thresholds[-1]


def epsilon_optimal_rule(vi: ValueIteration, epsilon: float) -> tuple[int, float]:
    """Index ``n`` and threshold ``pi_n`` whose rule is within ``epsilon`` of the Bayes risk.

    Raises
    ------
    InsufficientIterationsError
        If fewer than ``n`` iterates were computed.
    """
    n = required_iterations(epsilon, vi.params.p)
    if n > vi.n_final:
        raise InsufficientIterationsError(
            f"epsilon={epsilon} needs {n} iterates, only {vi.n_final} available", required=n
        )
    return n, vi.thresholds[n]
