"""Tests for the exact-construction path simulator and the Monte Carlo estimators."""

import math

import numpy as np
import pytest

from poisson_disorder.config import SolverSettings
from poisson_disorder.exceptions import ParameterDomainError
from poisson_disorder.model_core import jump_map
from poisson_disorder.models.params import ModelParams
from poisson_disorder.models.results import ValueIteration
from poisson_disorder.models.simulation import SimConfig
from poisson_disorder.monte_carlo import (
    check_independence,
    detection_horizon,
    dt_sensitivity,
    estimate_detection,
    estimate_false_alarm,
    exact_pi,
    pi_mean_profile,
    run_detection,
    sample_disorder,
    simulate_detections,
    simulate_pi_path,
)
from poisson_disorder.utils_simulation import path_streams
from poisson_disorder.value_solver import threshold, value_at
from poisson_disorder.variational import false_alarm_iterate, solve_variational

ACCEPTANCE = SimConfig(dt=1e-3, n_paths=100_000, seed=20_240_601, workers=4)


def test_sample_disorder_moments(figure_params: ModelParams):
    rng = np.random.default_rng(1)
    samples = [sample_disorder(figure_params, rng, 5.0) for _ in range(4_000)]
    zetas = np.array([sample.zeta for sample in samples])
    thetas = np.array([sample.theta for sample in samples])
    assert zetas.min() >= 1
    assert zetas.mean() == pytest.approx(1.0 / figure_params.p, abs=0.1)
    assert thetas.mean() == pytest.approx(1.0 / (figure_params.lambda_ * figure_params.p), abs=0.08)


def test_sample_disorder_structure(figure_params: ModelParams):
    rng = np.random.default_rng(2)
    for _ in range(200):
        sample = sample_disorder(figure_params, rng, 3.0)
        arrivals = sample.arrival_times
        assert np.all(np.diff(arrivals) > 0)
        assert np.all(arrivals <= 3.0)
        if sample.zeta <= arrivals.size:
            assert sample.theta == arrivals[sample.zeta - 1]
        else:
            assert sample.theta > 3.0


def test_sample_disorder_at_time_zero(figure_params: ModelParams):
    sample = sample_disorder(figure_params.with_prior(1.0), np.random.default_rng(0), 1.0)
    assert sample.zeta == 0
    assert sample.theta == 0.0


def test_simulated_posterior_matches_explicit_formula(figure_params: ModelParams, tiny_sim_config: SimConfig):
    params = figure_params.with_prior(0.1)
    trajectory = simulate_pi_path(params, tiny_sim_config, path_streams(11, 0), horizon=4.0)
    assert trajectory.t[0] == 0.0
    assert trajectory.t[-1] == pytest.approx(4.0)
    assert np.all(np.diff(trajectory.t) > 0)
    assert trajectory.pi[0] == pytest.approx(0.1)
    for k in range(0, trajectory.t.size, 7):
        expected = exact_pi(
            params, trajectory.t[k], trajectory.x[k], trajectory.arrival_times, trajectory.x_at_arrivals
        )
        assert trajectory.pi[k] == pytest.approx(expected, rel=1e-8, abs=1e-12)


def test_simulated_jumps_follow_the_jump_map(figure_params: ModelParams, tiny_sim_config: SimConfig):
    trajectory = simulate_pi_path(figure_params, tiny_sim_config, path_streams(5, 1), horizon=6.0)
    assert trajectory.pi_before.size == trajectory.arrival_times.size
    np.testing.assert_allclose(trajectory.pi_after, jump_map(trajectory.pi_before, figure_params.p), rtol=1e-12)
    assert np.all(np.diff(trajectory.n) >= 0)
    assert trajectory.n[-1] == trajectory.arrival_times.size
    assert np.all((trajectory.pi >= 0.0) & (trajectory.pi <= 1.0))


def test_path_frame_columns(figure_params: ModelParams, tiny_sim_config: SimConfig):
    frame = simulate_pi_path(figure_params, tiny_sim_config, path_streams(0, 0), horizon=1.0).to_frame()
    assert frame.columns == ["t", "X", "N", "Pi"]


def test_simulate_pi_path_rejects_certain_prior(figure_params: ModelParams, tiny_sim_config: SimConfig):
    with pytest.raises(ParameterDomainError):
        simulate_pi_path(figure_params.with_prior(1.0), tiny_sim_config, path_streams(0, 0))


def test_run_detection_record(figure_params: ModelParams, tiny_sim_config: SimConfig):
    r = 0.8
    for i in range(tiny_sim_config.n_paths):
        record = run_detection(r, figure_params, tiny_sim_config, path_streams(9, i))
        assert record.tau >= 0.0
        assert record.alarm_before_theta == (record.tau < record.theta)
        assert record.delay == pytest.approx(max(record.tau - record.theta, 0.0))
        assert not record.censored


def test_run_detection_stops_at_once_above_threshold(figure_params: ModelParams, tiny_sim_config: SimConfig):
    record = run_detection(0.5, figure_params.with_prior(0.9), tiny_sim_config, path_streams(0, 0))
    assert record.tau == 0.0
    assert not record.censored


def test_run_detection_censors_at_the_horizon(figure_params: ModelParams, tiny_sim_config: SimConfig):
    record = run_detection(0.9, figure_params, tiny_sim_config, path_streams(0, 0), horizon=1e-3)
    assert record.censored
    assert record.tau == 1e-3


def test_run_detection_rejects_bad_threshold(figure_params: ModelParams, tiny_sim_config: SimConfig):
    with pytest.raises(ParameterDomainError):
        run_detection(1.0, figure_params, tiny_sim_config, np.random.default_rng(0))


def test_detection_horizon(figure_params: ModelParams, tiny_sim_config: SimConfig):
    assert detection_horizon(0.5, figure_params, tiny_sim_config) == pytest.approx(100.0)
    capped = tiny_sim_config.model_copy(update={"horizon": 7.0})
    assert detection_horizon(0.5, figure_params, capped) == 7.0


def test_posterior_tends_to_one_without_stopping(figure_params: ModelParams):
    config = SimConfig(dt=1e-2, n_paths=40, seed=21)
    horizon = 30.0
    for i in range(config.n_paths):
        trajectory = simulate_pi_path(figure_params, config, path_streams(config.seed, i), horizon=horizon)
        assert trajectory.t[-1] == pytest.approx(horizon)
        assert trajectory.theta < horizon
        assert trajectory.pi[-1] > 0.99


def test_default_horizon_rarely_censors(figure_params: ModelParams):
    config = SimConfig(n_paths=500, seed=22)
    assert config.horizon is None
    estimates = estimate_detection(0.8, figure_params, config)
    assert estimates.censor_fraction < 1e-4


def test_estimates_are_consistent(caplog, figure_params: ModelParams, tiny_sim_config: SimConfig):
    estimates = estimate_detection(0.8, figure_params, tiny_sim_config)
    assert estimates.n_paths == tiny_sim_config.n_paths
    assert estimates.seed == tiny_sim_config.seed
    assert estimates.bayes_risk.mean == pytest.approx(
        estimates.false_alarm.mean + figure_params.c * estimates.delay.mean
    )
    assert estimates.censor_fraction == 0.0
    assert "Simulating 20 paths" in caplog.text


def test_estimates_do_not_depend_on_workers(figure_params: ModelParams, tiny_sim_config: SimConfig):
    serial = estimate_detection(0.8, figure_params, tiny_sim_config)
    parallel = estimate_detection(0.8, figure_params, tiny_sim_config.model_copy(update={"workers": 2}))
    assert serial == parallel


def test_seed_controls_the_paths(figure_params: ModelParams, tiny_sim_config: SimConfig):
    first = simulate_detections(0.8, figure_params, tiny_sim_config)
    again = simulate_detections(0.8, figure_params, tiny_sim_config)
    other = simulate_detections(0.8, figure_params, tiny_sim_config.model_copy(update={"seed": 4}))
    assert first == again
    assert first != other


def test_antithetic_estimates_run(figure_params: ModelParams, tiny_sim_config: SimConfig):
    config = tiny_sim_config.model_copy(update={"antithetic": True})
    estimates = estimate_detection(0.8, figure_params, config)
    assert estimates.n_paths == config.n_paths


def test_dt_sensitivity(figure_params: ModelParams, tiny_sim_config: SimConfig):
    report = dt_sensitivity(0.8, figure_params, tiny_sim_config)
    assert report.dt == tiny_sim_config.dt
    assert report.coarse.n_paths == report.fine.n_paths
    assert math.isfinite(report.bayes_risk_shift)
    assert report.false_alarm_shift == report.fine.false_alarm.mean - report.coarse.false_alarm.mean


def test_posterior_mean_tracks_disorder_probability(figure_params: ModelParams):
    config = SimConfig(dt=1e-2, n_paths=800, seed=8)
    times = [0.5, 1.0]
    profile = pi_mean_profile(figure_params, config, times)
    expected = 1.0 - np.exp(-figure_params.lambda_ * figure_params.p * np.array(times))
    np.testing.assert_allclose(profile, expected, atol=0.06)


@pytest.mark.slow
def test_innovation_is_independent_of_shocks(figure_params: ModelParams):
    report = check_independence(figure_params, SimConfig(dt=1e-2, n_paths=1_000, seed=13))
    assert len(report.correlations) == 3
    assert report.expected_shocks == pytest.approx(2.0)
    assert report.passed


@pytest.mark.slow
@pytest.mark.parametrize("pi0", [0.0, 0.25, 0.5])
def test_simulated_risk_matches_the_value_function(
    figure_params: ModelParams, converged_iteration: ValueIteration, pi0: float
):
    r = threshold(converged_iteration)
    params = figure_params.with_prior(pi0)
    estimates = estimate_detection(r, params, ACCEPTANCE)
    risk = estimates.bayes_risk
    assert abs(risk.mean - value_at(converged_iteration, pi0)) <= 3.0 * risk.stderr + 0.005
    bound = 1.0 / (params.lambda_ * params.p * (1.0 - r)) + 2.0 * ACCEPTANCE.dt
    assert estimates.alarm_time.mean <= bound


@pytest.mark.slow
@pytest.mark.parametrize("r", [0.5, None])
def test_simulated_false_alarms_match_the_fixed_point(
    figure_params: ModelParams, converged_iteration: ValueIteration, r: float | None
):
    r = threshold(converged_iteration) if r is None else r
    false_alarm = estimate_false_alarm(r, figure_params, ACCEPTANCE)
    _, solve = false_alarm_iterate(r, figure_params, 1e-6)
    assert abs(false_alarm.mean - solve.value) <= 3.0 * false_alarm.stderr + 0.005


@pytest.mark.slow
def test_budgeted_rule_by_simulation(figure_params: ModelParams, coarse_settings: SolverSettings):
    alpha = 0.2
    solution = solve_variational(alpha, figure_params, coarse_settings).unwrap()
    assert solution.r_star is not None
    estimates = estimate_detection(solution.r_star, figure_params, ACCEPTANCE)
    assert abs(estimates.false_alarm.mean - alpha) <= 3.0 * estimates.false_alarm.stderr + 0.005
    assert abs(estimates.delay.mean - solution.expected_delay) <= 3.0 * estimates.delay.stderr + 0.01
