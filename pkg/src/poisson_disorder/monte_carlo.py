"""Exact-construction simulator of the observation, the shocks and the posterior.

Paths are built directly under the prior: the disorder index ``zeta`` is zero with probability
``pi0`` and geometric otherwise, shocks arrive at rate ``lambda`` and the drift switches on at
``Theta = T_zeta``. The posterior odds ``Phi = Pi / (1 - Pi)`` evolve as

    d log Phi = mu dX - mu^2 / 2 dt           between shocks,
    Phi       -> (Phi + p) / (1 - p)          at every shock,

which is kept in log form so neither overflows.
"""

import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from loguru import logger
from numpy.typing import ArrayLike, NDArray
from scipy import special, stats

from .exceptions import ParameterDomainError
from .models.params import ModelParams
from .models.simulation import (
    DetectionEstimates,
    DisorderSample,
    IndependenceReport,
    MCEstimate,
    PathRecord,
    PiTrajectory,
    SensitivityReport,
    SimConfig,
)
from .utils_simulation import PathStreams, chunk_indices, mesh_between, path_streams

FIRST_CHUNK = 512
MAX_CHUNK = 65_536
HORIZON_FACTOR = 50.0
PATH_HORIZON_FACTOR = 10.0
INDEPENDENCE_TIMES = (0.5, 1.0, 2.0)

RandomSource = np.random.Generator | PathStreams


def _streams(rng: RandomSource) -> PathStreams:
    return rng if isinstance(rng, PathStreams) else PathStreams.from_generator(rng)


def _logit(value: float) -> float:
    if value <= 0.0:
        return -math.inf
    if value >= 1.0:
        return math.inf
    return math.log(value) - math.log1p(-value)


def detection_horizon(r: float, params: ModelParams, config: SimConfig) -> float:
    """Time cap of a detection run, ``config.horizon`` or ``50 / (lambda p (1 - r))``.

    ``1 / (lambda p (1 - r))`` bounds the mean time for ``Pi`` to exceed ``r``.
    """
    if config.horizon is not None:
        return config.horizon
    return HORIZON_FACTOR / (params.lambda_ * params.p * (1.0 - r))


def sample_disorder(params: ModelParams, rng: RandomSource, horizon: float) -> DisorderSample:
    """Draw the disorder index, the shock times up to ``horizon`` and ``Theta``.

    ``Theta`` is exact even when the ``zeta``-th shock falls after the horizon.
    """
    streams = _streams(rng)
    generator = streams.disorder
    zeta = 0 if generator.random() < params.pi0 else int(generator.geometric(params.p))
    scale = 1.0 / params.lambda_
    batch = int(params.lambda_ * horizon * 1.2) + 16
    pieces = []
    total = 0.0
    while total <= horizon:
        times = total + np.cumsum(generator.exponential(scale, batch))
        pieces.append(times)
        total = float(times[-1])
    arrivals = np.concatenate(pieces)
    if zeta == 0:
        theta = 0.0
    elif zeta <= arrivals.size:
        theta = float(arrivals[zeta - 1])
    else:
        theta = total + float(generator.gamma(zeta - arrivals.size, scale))
    return DisorderSample(zeta=zeta, arrival_times=arrivals[arrivals <= horizon], theta=theta)


@dataclass
class _Walk:
    """Mutable state of one path while it is being simulated."""

    params: ModelParams
    streams: PathStreams
    dt: float
    record: bool
    t: float = 0.0
    x: float = 0.0
    n: int = 0
    log_phi: float = 0.0
    crossing: float | None = None
    times: list[NDArray[np.float64]] = field(default_factory=list)
    xs: list[NDArray[np.float64]] = field(default_factory=list)
    ns: list[NDArray[np.int64]] = field(default_factory=list)
    log_phis: list[NDArray[np.float64]] = field(default_factory=list)
    x_at_arrivals: list[float] = field(default_factory=list)
    before: list[float] = field(default_factory=list)
    after: list[float] = field(default_factory=list)

    def _store(self, t: ArrayLike, x: ArrayLike, log_phi: ArrayLike) -> None:
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        self.times.append(t)
        self.xs.append(np.atleast_1d(np.asarray(x, dtype=np.float64)))
        self.ns.append(np.full(t.size, self.n, dtype=np.int64))
        self.log_phis.append(np.atleast_1d(np.asarray(log_phi, dtype=np.float64)))

    def diffuse(self, stop: float, drift: float, level: float | None) -> bool:
        """Advance to ``stop`` on the dt mesh; return True if ``log Phi`` reaches ``level``."""
        mu = self.params.mu
        mesh = mesh_between(self.t, stop, self.dt)
        chunk = FIRST_CHUNK
        start = 0
        while start < mesh.size:
            times = mesh[start : start + chunk]
            steps = np.diff(times, prepend=self.t)
            dx = np.sqrt(steps) * self.streams.normals(times.size) + drift * steps
            xs = self.x + np.cumsum(dx)
            log_phis = self.log_phi + np.cumsum(mu * dx - 0.5 * mu**2 * steps)
            hits = np.flatnonzero(log_phis >= level) if level is not None else np.zeros(0, dtype=np.intp)
            if hits.size:
                k = int(hits[0])
                times, xs, log_phis = times[: k + 1], xs[: k + 1], log_phis[: k + 1]
            if self.record:
                self._store(times, xs, log_phis)
            self.t, self.x, self.log_phi = float(times[-1]), float(xs[-1]), float(log_phis[-1])
            if hits.size:
                self.crossing = self.t
                return True
            start += chunk
            chunk = min(2 * chunk, MAX_CHUNK)
        self.t = stop
        return False

    def jump(self, level: float | None) -> bool:
        """Apply a shock at the current time; return True if ``log Phi`` reaches ``level``."""
        p = self.params.p
        pi_before = float(special.expit(self.log_phi))
        if p >= 1.0:
            self.log_phi = math.inf
        else:
            self.log_phi = float(np.logaddexp(self.log_phi, math.log(p)) - math.log1p(-p))
        self.n += 1
        if self.record:
            self.x_at_arrivals.append(self.x)
            self.before.append(pi_before)
            self.after.append(float(special.expit(self.log_phi)))
            # replace the pre-jump entry so Pi is right-continuous on the mesh
            self.times[-1] = self.times[-1][:-1]
            self.xs[-1] = self.xs[-1][:-1]
            self.ns[-1] = self.ns[-1][:-1]
            self.log_phis[-1] = self.log_phis[-1][:-1]
            self._store(self.t, self.x, self.log_phi)
        if level is not None and self.log_phi >= level:
            self.crossing = self.t
            return True
        return False


def _walk(
    params: ModelParams,
    streams: PathStreams,
    sample: DisorderSample,
    dt: float,
    horizon: float,
    level: float | None,
    record: bool,
) -> _Walk:
    walk = _Walk(params, streams, dt, record, log_phi=_logit(params.pi0))
    if record:
        walk._store(0.0, 0.0, walk.log_phi)
    if level is not None and walk.log_phi >= level:
        walk.crossing = 0.0
        return walk
    stops = [*sample.arrival_times.tolist(), horizon]
    for i, stop in enumerate(stops):
        drift = params.mu if walk.t >= sample.theta else 0.0
        if stop > walk.t and walk.diffuse(stop, drift, level):
            return walk
        walk.t = stop
        if i < len(stops) - 1 and walk.jump(level):
            return walk
    return walk


def simulate_pi_path(
    params: ModelParams, config: SimConfig, rng: RandomSource, horizon: float | None = None
) -> PiTrajectory:
    """Simulate ``(t, X_t, N_t, Pi_t)`` up to ``horizon``.

    The mesh is the uniform ``dt`` mesh merged with the shock times; values at a shock time are the
    post-jump ones and the jump sizes are kept in ``pi_before`` / ``pi_after``. The horizon defaults
    to ``config.horizon`` or ``10 / (lambda p)``.
    """
    if params.pi0 >= 1.0:
        raise ParameterDomainError("pi0 = 1 stops at once; there is no path to simulate")
    if horizon is None:
        horizon = config.horizon or PATH_HORIZON_FACTOR / (params.lambda_ * params.p)
    streams = _streams(rng)
    sample = sample_disorder(params, streams, horizon)
    walk = _walk(params, streams, sample, config.dt, horizon, None, record=True)
    log_phi = np.concatenate(walk.log_phis)
    return PiTrajectory(
        t=np.concatenate(walk.times),
        x=np.concatenate(walk.xs),
        n=np.concatenate(walk.ns),
        pi=special.expit(log_phi),
        log_phi=log_phi,
        arrival_times=sample.arrival_times,
        x_at_arrivals=np.asarray(walk.x_at_arrivals),
        pi_before=np.asarray(walk.before),
        pi_after=np.asarray(walk.after),
        theta=sample.theta,
    )


def exact_pi(
    params: ModelParams, t: float, x_t: float, arrival_times: ArrayLike, x_at_arrivals: ArrayLike
) -> float:
    """Recompute ``Pi_t`` from the explicit representation of the posterior odds.

    ``Phi_t = L_t (1 - p)^(-N_t) (pi0 / (1 - pi0) + sum_i (1 - p)^(i - 1) p / L_{T_i})`` with
    ``L_t = exp(mu X_t - mu^2 t / 2)``; only shocks with ``T_i <= t`` are used.
    """
    arrivals = np.asarray(arrival_times, dtype=np.float64)
    x_arrivals = np.asarray(x_at_arrivals, dtype=np.float64)
    mask = arrivals <= t
    arrivals, x_arrivals = arrivals[mask], x_arrivals[mask]
    count = arrivals.size
    if count and params.p >= 1.0:
        return 1.0
    mu, p = params.mu, params.p
    log_l_t = mu * x_t - 0.5 * mu**2 * t
    terms = [_logit(params.pi0)]
    if count:
        index = np.arange(count)
        log_l_arrivals = mu * x_arrivals - 0.5 * mu**2 * arrivals
        terms.extend(index * math.log1p(-p) + math.log(p) - log_l_arrivals)
    finite = [term for term in terms if term > -math.inf]
    if not finite:
        return 0.0
    log_phi = log_l_t - count * math.log1p(-p) + float(special.logsumexp(finite))
    return float(special.expit(log_phi))


def run_detection(
    r: float, params: ModelParams, config: SimConfig, rng: RandomSource, horizon: float | None = None
) -> PathRecord:
    """Run the rule "alarm when ``Pi`` first reaches ``r``" on one path.

    Crossings are detected on the mesh and on both sides of every shock. Paths that reach the horizon
    are censored with ``tau = horizon``.
    """
    if not 0.0 < r < 1.0:
        raise ParameterDomainError(f"threshold r must lie in (0, 1), got {r}")
    horizon = detection_horizon(r, params, config) if horizon is None else horizon
    streams = _streams(rng)
    sample = sample_disorder(params, streams, horizon)
    walk = _walk(params, streams, sample, config.dt, horizon, _logit(r), record=False)
    censored = walk.crossing is None
    tau = horizon if walk.crossing is None else walk.crossing
    return PathRecord(
        theta=sample.theta,
        zeta=sample.zeta,
        tau=tau,
        alarm_before_theta=tau < sample.theta,
        delay=max(tau - sample.theta, 0.0),
        censored=censored,
    )


def _simulate_chunk(
    r: float, params: ModelParams, config: SimConfig, indices: range, horizon: float
) -> list[PathRecord]:
    return [
        run_detection(r, params, config, path_streams(config.seed, i, config.antithetic), horizon)
        for i in indices
    ]


def simulate_detections(r: float, params: ModelParams, config: SimConfig) -> list[PathRecord]:
    """Run ``config.n_paths`` detection paths, in worker processes if ``config.workers > 1``.

    Path ``i`` always uses the streams of ``(config.seed, i)``, so the records do not depend on the
    number of workers.
    """
    horizon = detection_horizon(r, params, config)
    logger.info("Simulating {} paths at r={} (dt={}, horizon={})", config.n_paths, r, config.dt, horizon)
    if config.workers == 1:
        return _simulate_chunk(r, params, config, range(config.n_paths), horizon)
    chunks = chunk_indices(config.n_paths, config.workers)
    records: list[PathRecord] = []
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        futures = [pool.submit(_simulate_chunk, r, params, config, chunk, horizon) for chunk in chunks]
        for future in futures:
            records.extend(future.result())
    return records


def _estimate(values: NDArray[np.float64], censor_fraction: float) -> MCEstimate:
    stderr = float(stats.sem(values)) if values.size > 1 else 0.0
    return MCEstimate(
        mean=float(np.mean(values)),
        stderr=stderr if math.isfinite(stderr) else 0.0,
        n=int(values.size),
        censor_fraction=censor_fraction,
    )


def summarize_detections(
    r: float, params: ModelParams, config: SimConfig, records: Sequence[PathRecord]
) -> DetectionEstimates:
    """Aggregate path records into the risk, false-alarm, delay and alarm-time estimates."""
    false_alarm = np.array([record.alarm_before_theta for record in records], dtype=np.float64)
    delay = np.array([record.delay for record in records])
    tau = np.array([record.tau for record in records])
    censor_fraction = float(np.mean([record.censored for record in records]))
    if censor_fraction > 0:
        logger.warning("{:.2%} of paths hit the horizon before an alarm", censor_fraction)
    return DetectionEstimates(
        r=r,
        bayes_risk=_estimate(false_alarm + params.c * delay, censor_fraction),
        false_alarm=_estimate(false_alarm, censor_fraction),
        delay=_estimate(delay, censor_fraction),
        alarm_time=_estimate(tau, censor_fraction),
        censor_fraction=censor_fraction,
        n_paths=len(records),
        seed=config.seed,
    )


def estimate_detection(r: float, params: ModelParams, config: SimConfig) -> DetectionEstimates:
    """All detection estimates from one batch of paths."""
    return summarize_detections(r, params, config, simulate_detections(r, params, config))


def estimate_bayes_risk(r: float, params: ModelParams, config: SimConfig) -> MCEstimate:
    """Mean of ``1{tau < Theta} + c (tau - Theta)^+``."""
    return estimate_detection(r, params, config).bayes_risk


def estimate_false_alarm(r: float, params: ModelParams, config: SimConfig) -> MCEstimate:
    """Mean of ``1{tau < Theta}``."""
    return estimate_detection(r, params, config).false_alarm


def estimate_delay(r: float, params: ModelParams, config: SimConfig) -> MCEstimate:
    """Mean of ``(tau - Theta)^+``."""
    return estimate_detection(r, params, config).delay


def dt_sensitivity(r: float, params: ModelParams, config: SimConfig) -> SensitivityReport:
    """Rerun the estimates with half the time step and the same seed."""
    coarse = estimate_detection(r, params, config)
    fine = estimate_detection(r, params, config.model_copy(update={"dt": config.dt / 2.0}))
    report = SensitivityReport(dt=config.dt, coarse=coarse, fine=fine)
    logger.info(
        "Halving dt moves risk by {:.2e}, false alarms by {:.2e}, delay by {:.2e}",
        report.bayes_risk_shift,
        report.false_alarm_shift,
        report.delay_shift,
    )
    return report


def _innovation(trajectory: PiTrajectory, mu: float) -> NDArray[np.float64]:
    # X_t - mu * int_0^t Pi_s ds with the left-point rule
    area = np.concatenate(([0.0], np.cumsum(trajectory.pi[:-1] * np.diff(trajectory.t))))
    return trajectory.x - mu * area


def pi_mean_profile(
    params: ModelParams, config: SimConfig, times: Sequence[float]
) -> NDArray[np.float64]:
    """Average of ``Pi_t`` over ``config.n_paths`` paths at each of ``times``."""
    horizon = float(max(times))
    sums = np.zeros(len(times))
    for i in range(config.n_paths):
        trajectory = simulate_pi_path(params, config, path_streams(config.seed, i, config.antithetic), horizon)
        index = np.searchsorted(trajectory.t, np.asarray(times), side="right") - 1
        sums += trajectory.pi[index]
    return sums / config.n_paths


def check_independence(
    params: ModelParams,
    config: SimConfig,
    times: Sequence[float] = INDEPENDENCE_TIMES,
    window: float = 1.0,
) -> IndependenceReport:
    """Check that the innovation ``X_t - mu int_0^t Pi_s ds`` is a Brownian motion independent of ``N``.

    Reports the sample correlation of innovation and shock-count increments over ``[t, t + window]``
    for each ``t``, the variance of the innovation over ``[0, window]`` and the mean shock count there.
    """
    horizon = float(max(times)) + window
    starts = np.asarray(times, dtype=np.float64)
    d_innovation = np.empty((config.n_paths, starts.size))
    d_count = np.empty((config.n_paths, starts.size))
    first_innovation = np.empty(config.n_paths)
    first_count = np.empty(config.n_paths)
    for i in range(config.n_paths):
        trajectory = simulate_pi_path(params, config, path_streams(config.seed, i, config.antithetic), horizon)
        innovation = _innovation(trajectory, params.mu)
        ends = starts + window
        d_innovation[i] = np.interp(ends, trajectory.t, innovation) - np.interp(starts, trajectory.t, innovation)
        counts = np.searchsorted(trajectory.arrival_times, np.concatenate((starts, ends, [window])), side="right")
        d_count[i] = counts[starts.size : 2 * starts.size] - counts[: starts.size]
        first_innovation[i] = float(np.interp(window, trajectory.t, innovation))
        first_count[i] = float(counts[-1])
    correlations = [float(np.corrcoef(d_innovation[:, j], d_count[:, j])[0, 1]) for j in range(starts.size)]
    variance = float(np.var(first_innovation, ddof=1))
    report = IndependenceReport(
        n_paths=config.n_paths,
        window=window,
        times=starts.tolist(),
        correlations=correlations,
        correlation_bound=3.0 / math.sqrt(config.n_paths),
        innovation_variance=variance,
        innovation_variance_stderr=variance * math.sqrt(2.0 / (config.n_paths - 1)),
        mean_shocks=float(np.mean(first_count)),
        mean_shocks_stderr=float(stats.sem(first_count)),
        expected_shocks=params.lambda_ * window,
    )
    logger.info("Independence check over {} paths: correlations {}", config.n_paths, correlations)
    return report
