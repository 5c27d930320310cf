"""Tests for the quadrature-based operators H, B and J."""

import numpy as np
import pytest

from poisson_disorder.config import SolverSettings
from poisson_disorder.exceptions import InconsistencyError, ParameterDomainError
from poisson_disorder.model_core import closed_form_B, compute_roots, psi, threshold_bounds
from poisson_disorder.models.grid import GridFunction
from poisson_disorder.models.params import ModelParams, Roots
from poisson_disorder.value_solver import (
    IntegralTable,
    apply_H,
    apply_J,
    compute_B,
    concave_majorant,
    evaluate_H,
    exit_value_closed_form,
    integrand_u,
    solve_threshold,
    threshold_slope,
)


@pytest.fixture(scope="module")
def h() -> GridFunction:
    return GridFunction.terminal_cost(2001)


@pytest.fixture(scope="module")
def zero() -> GridFunction:
    return GridFunction.zero(2001)


def test_integrand_vanishes_without_costs(figure_params: ModelParams, figure_roots: Roots, zero: GridFunction):
    free = figure_params.without_delay_cost()
    y = np.linspace(0.01, 0.99, 50)
    assert np.all(integrand_u(zero, y, 1, free, figure_roots) == 0.0)
    assert np.all(integrand_u(zero, y, 2, free, figure_roots) == 0.0)


def test_integrand_scalar_and_domain(figure_params: ModelParams, figure_roots: Roots, h: GridFunction):
    assert isinstance(integrand_u(h, 0.5, 1, figure_params, figure_roots), float)
    with pytest.raises(ParameterDomainError):
        integrand_u(h, 0.0, 2, figure_params, figure_roots)
    with pytest.raises(ParameterDomainError):
        integrand_u(h, 1.0, 1, figure_params, figure_roots)
    with pytest.raises(ParameterDomainError):
        integrand_u(h, 0.5, 3, figure_params, figure_roots)  # type: ignore[arg-type]


def test_integrand_power_law_near_zero(figure_params: ModelParams, figure_roots: Roots, h: GridFunction):
    y = 1e-9
    coefficient = (
        2.0 * figure_params.lambda_ * h.at(figure_params.p) / (figure_roots.spread * figure_params.mu**2)
    )
    value = integrand_u(h, y, 2, figure_params, figure_roots)
    assert value / y ** (figure_roots.m1 - 2.0) == pytest.approx(coefficient, rel=1e-6)


def test_compute_B_reference_value(figure_params: ModelParams, figure_roots: Roots, zero: GridFunction):
    assert compute_B(zero, 0.5, figure_params, figure_roots) == pytest.approx(2.171165, abs=1e-6)
    exact = closed_form_B(figure_params, figure_roots, 0.5, "zero")
    assert compute_B(zero, 0.5, figure_params, figure_roots) == pytest.approx(exact, abs=1e-8)


@pytest.mark.parametrize("kind", ["zero", "h"])
def test_compute_B_matches_closed_forms(kind: str, zero: GridFunction, h: GridFunction):
    rng = np.random.default_rng(5)
    w = zero if kind == "zero" else h
    draws = rng.uniform([0.5, 0.5, 0.2, 0.1], [2.0, 4.0, 0.9, 2.0], size=(10, 4))
    for mu, lam, p, c in draws:
        params = ModelParams(mu=mu, lambda_=lam, p=p, c=c)
        roots = compute_roots(params)
        points = np.sort(rng.uniform(0.01, 0.95, 50))
        table = IntegralTable.build(w, params, roots, float(points[-1]))
        exact = closed_form_B(params, roots, points, kind)  # type: ignore[arg-type]
        for r, expected in zip(points, exact, strict=True):
            assert abs(table.b_value(r) - expected) <= 1e-8 * table.b_scale(r)


def test_integral_table_is_read_only(figure_params: ModelParams, figure_roots: Roots, h: GridFunction):
    table = IntegralTable.build(h, figure_params, figure_roots, 0.8)
    assert table.cum_u2[0] == 0.0
    assert np.all(np.diff(table.cum_u2) > 0)
    with pytest.raises(ValueError):
        table.cum_u2[1] = 0.0


def test_integral_table_rejects_bad_upper(figure_params: ModelParams, figure_roots: Roots, h: GridFunction):
    with pytest.raises(ParameterDomainError):
        IntegralTable.build(h, figure_params, figure_roots, 1.0)
    with pytest.raises(ParameterDomainError, match="first grid cell"):
        IntegralTable.build(h, figure_params, figure_roots, 1e-9)


def test_solve_threshold_closed_form_roots(
    figure_params: ModelParams, figure_roots: Roots, zero: GridFunction, h: GridFunction
):
    r_h, r_zero = threshold_bounds(figure_params, figure_roots)
    solve_zero = solve_threshold(zero, figure_params, figure_roots)
    solve_h = solve_threshold(h, figure_params, figure_roots)
    assert solve_zero.r == pytest.approx(r_zero, abs=1e-9)
    assert solve_h.r == pytest.approx(r_h, abs=1e-9)
    assert solve_h.r == pytest.approx(0.76640, abs=1e-5)
    for solve in (solve_zero, solve_h):
        assert solve.bracket_lo == r_h
        assert solve.bracket_hi == r_zero
        assert solve.d < solve.r
        assert solve.residual < 1e-8


def test_solve_threshold_inside_bracket(figure_params: ModelParams, figure_roots: Roots, h: GridFunction):
    w = h.with_ordinates(0.5 * h.ordinates)
    solve = solve_threshold(w, figure_params, figure_roots)
    assert solve.bracket_lo < solve.r < solve.bracket_hi
    assert solve.iterations > 0


def test_solve_threshold_detects_inadmissible_input(figure_params: ModelParams, figure_roots: Roots, h: GridFunction):
    too_large = h.with_ordinates(2.0 * h.ordinates)
    with pytest.raises(InconsistencyError, match="wrong sign"):
        solve_threshold(too_large, figure_params, figure_roots)


def test_solve_threshold_needs_delay_cost(figure_params: ModelParams, figure_roots: Roots, h: GridFunction):
    with pytest.raises(ParameterDomainError):
        solve_threshold(h, figure_params.without_delay_cost(), figure_roots)


@pytest.mark.parametrize("c", [0.0, 0.5, 3.0])
def test_apply_H_matches_closed_form_for_h(figure_params: ModelParams, figure_roots: Roots, h: GridFunction, c: float):
    params = figure_params.with_cost(c)
    r = 0.8
    numeric = apply_H(h, r, params, figure_roots)
    exact = exit_value_closed_form(numeric.abscissae, r, params, figure_roots)
    np.testing.assert_allclose(numeric.ordinates, exact, atol=1e-8)


def test_apply_H_on_zero_without_costs(figure_params: ModelParams, figure_roots: Roots, zero: GridFunction):
    r = 0.6
    result = apply_H(zero, r, figure_params.without_delay_cost(), figure_roots)
    x = result.abscissae
    inside = (x > 0) & (x < r)
    expected = (1.0 - r) * psi(x[inside], figure_roots) / psi(r, figure_roots)
    np.testing.assert_allclose(result.ordinates[inside], expected, rtol=1e-12, atol=1e-300)
    assert result.ordinates[0] == 0.0


def test_apply_H_boundary_behaviour(figure_params: ModelParams, figure_roots: Roots, h: GridFunction):
    r = 0.8
    result = apply_H(h, r, figure_params, figure_roots)
    x = result.abscissae
    np.testing.assert_array_equal(result.ordinates[x >= r], 1.0 - x[x >= r])
    assert result.ordinates[0] == pytest.approx(h.at(figure_params.p))
    # continuous at zero
    assert result.ordinates[1] == pytest.approx(result.ordinates[0], abs=1e-5)


def test_evaluate_H_agrees_with_apply_H(figure_params: ModelParams, figure_roots: Roots, h: GridFunction):
    r = 0.8
    grid_values = apply_H(h, r, figure_params, figure_roots)
    points = h.abscissae[::97]
    np.testing.assert_allclose(
        evaluate_H(h, r, points, figure_params, figure_roots), grid_values(points), rtol=1e-12, atol=1e-14
    )
    with pytest.raises(ParameterDomainError):
        evaluate_H(h, r, [1.5], figure_params, figure_roots)
    with pytest.raises(ParameterDomainError):
        apply_H(h, 1.0, figure_params, figure_roots)


def test_smooth_fit_at_the_threshold(figure_params: ModelParams, figure_roots: Roots, h: GridFunction):
    solve = solve_threshold(h, figure_params, figure_roots)
    assert threshold_slope(h, solve.r, figure_params, figure_roots) == pytest.approx(-1.0, abs=1e-7)
    assert threshold_slope(h, 0.5 * solve.r, figure_params, figure_roots) > -1.0


def test_apply_J_properties(figure_params: ModelParams, figure_roots: Roots, h: GridFunction):
    v1, solve = apply_J(h, figure_params, figure_roots)
    x = v1.abscissae
    assert v1.at(1.0) == 0.0
    assert v1.at(0.0) == pytest.approx(h.at(figure_params.p))
    assert np.all(v1.ordinates >= 0.0)
    assert np.all(v1.ordinates <= 1.0 - x + 1e-12)
    assert v1.concavity_defect() <= 1e-8
    region = (x >= 0.01) & (x <= solve.r - 0.01)
    assert np.all(v1.ordinates[region] < 1.0 - x[region] - 1e-9)


def test_apply_J_is_monotone(figure_params: ModelParams, figure_roots: Roots, h: GridFunction):
    settings = SolverSettings()
    v1, first = apply_J(h, figure_params, figure_roots, settings)
    v2, second = apply_J(v1, figure_params, figure_roots, settings)
    assert np.all(v2.ordinates <= v1.ordinates + 1e-9)
    assert second.r >= first.r


def test_concave_majorant():
    x = np.linspace(0.0, 1.0, 11)
    y = np.minimum(x, 1.0 - x)
    y[3] -= 0.2
    hull = concave_majorant(x, y)
    assert np.all(hull >= y)
    np.testing.assert_allclose(hull, np.minimum(x, 1.0 - x), atol=1e-15)


def test_apply_J_is_order_preserving(figure_params: ModelParams, figure_roots: Roots, h: GridFunction):
    v1, _ = apply_J(h, figure_params, figure_roots)
    rng = np.random.default_rng(17)
    pairs = [(v1, h)]
    for low, high in np.sort(rng.uniform(0.0, 1.0, size=(3, 2)), axis=1):
        pairs.append((h.with_ordinates(low * h.ordinates), h.with_ordinates(high * h.ordinates)))
    for lower, upper in pairs:
        assert np.all(lower.ordinates <= upper.ordinates)
        j_lower, _ = apply_J(lower, figure_params, figure_roots)
        j_upper, _ = apply_J(upper, figure_params, figure_roots)
        assert np.all(j_lower.ordinates <= j_upper.ordinates + 1e-9)


def test_apply_H_is_accurate_at_the_first_knots(figure_params: ModelParams, figure_roots: Roots, h: GridFunction):
    r = 0.5 * sum(threshold_bounds(figure_params, figure_roots))
    numeric = apply_H(h, r, figure_params, figure_roots)
    knots = numeric.abscissae[1:4]
    exact = exit_value_closed_form(knots, r, figure_params, figure_roots)
    np.testing.assert_allclose(numeric.ordinates[1:4], exact, rtol=0.0, atol=1e-10)


def test_evaluate_H_is_accurate_inside_the_first_cells(
    figure_params: ModelParams, figure_roots: Roots, h: GridFunction
):
    r = 0.5 * sum(threshold_bounds(figure_params, figure_roots))
    knots = h.abscissae[1:6]
    points = 0.5 * (knots[:-1] + knots[1:])
    numeric = evaluate_H(h, r, points, figure_params, figure_roots)
    exact = exit_value_closed_form(points, r, figure_params, figure_roots)
    np.testing.assert_allclose(numeric, exact, rtol=0.0, atol=1e-10)
