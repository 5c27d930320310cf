"""Command line front end: ``poisson-disorder {solve,variational,simulate,figure1,selftest}``.

Every command returns one of the :class:`ExitCode` values; errors are reported on standard error
through loguru and results are written under ``--out``.
"""

import argparse
import json
import sys
from collections.abc import Callable, Sequence
from enum import IntEnum
from functools import wraps
from pathlib import Path
from typing import Any

from loguru import logger
from pydantic import ValidationError

from .config import RunConfig, load_run_config
from .exceptions import (
    ConfigError,
    InconsistencyError,
    InsufficientIterationsError,
    NumericalError,
    ParameterDomainError,
    SearchError,
)
from .model_core import threshold_bounds
from .monte_carlo import estimate_detection, simulate_pi_path
from .selftest import format_table, run_selftest
from .utils_exporter import (
    get_output_directory,
    iterates_frame,
    to_jsonable,
    write_frame_csv,
    write_json,
    write_path_csv,
)
from .utils_simulation import path_streams
from .value_solver import threshold, value_at, value_iterate
from .variational import solve_variational

FIGURE_ITERATIONS = 10
REFERENCE_ITERATIONS = 20
LOG_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {message}"


class ExitCode(IntEnum):
    """Process exit status of every command."""

    OK = 0
    CONFIG_ERROR = 2
    INCONSISTENCY = 3
    SEARCH_FAILURE = 4
    SELFTEST_FAILURE = 5


Command = Callable[[RunConfig, Path | None], int]


def _exit_codes(command: Command) -> Command:
    """Translate the library exceptions into exit codes."""

    @wraps(command)
    def wrapper(config: RunConfig, out: Path | None = None) -> int:
        try:
            return command(config, out)
        except (ConfigError, ParameterDomainError, ValidationError) as exc:
            logger.error("{}", exc)
            return ExitCode.CONFIG_ERROR
        except (InconsistencyError, NumericalError, InsufficientIterationsError) as exc:
            logger.error("{}: {}", type(exc).__name__, exc)
            return ExitCode.INCONSISTENCY
        except SearchError as exc:
            logger.error("{}", exc)
            return ExitCode.SEARCH_FAILURE

    return wrapper


def _print_summary(payload: dict[str, Any]) -> None:
    print(json.dumps(payload, indent=2))


@_exit_codes
def cmd_solve(config: RunConfig, out: Path | None = None) -> int:
    """Run the value iteration and write ``value_function.csv`` and ``solve_summary.json``."""
    params, settings = config.model, config.solver
    vi = value_iterate(params, settings=settings)
    deepest = max(config.report_iterations, default=0)
    if deepest > vi.n_final:
        logger.info("Extending the iteration to the requested v_{}", deepest)
        vi = value_iterate(params, settings=settings, n_iterations=deepest)
    directory = get_output_directory(out)
    write_frame_csv(iterates_frame(vi, config.report_iterations), directory / "value_function.csv")
    r_h, r_zero = threshold_bounds(params)
    summary = {
        "pi_inf": threshold(vi),
        "n_iterations": vi.n_final,
        "sup_error_bound": vi.sup_error_bound,
        "fixed_point_residual": vi.fixed_point_residual,
        "bracket": [r_h, r_zero],
        "value_at_pi0": value_at(vi, params.pi0),
    }
    write_json(summary, directory / "solve_summary.json")
    _print_summary(summary)
    return ExitCode.OK


@_exit_codes
def cmd_variational(config: RunConfig, out: Path | None = None) -> int:
    """Solve the budgeted minimal-delay problem and write ``variational.json``."""
    if config.alpha is None:
        raise ConfigError("the variational command needs a false-alarm budget (--alpha)")
    directory = get_output_directory(out)
    result = solve_variational(config.alpha, config.model, config.solver)
    if result.is_err():
        error = result.error
        write_json({"error": str(error), "diagnostics": error.diagnostics}, directory / "variational_diagnostics.json")
        raise error
    solution = result.unwrap()
    write_json(solution, directory / "variational.json")
    _print_summary(to_jsonable(solution))
    return ExitCode.OK


@_exit_codes
def cmd_simulate(config: RunConfig, out: Path | None = None) -> int:
    """Estimate risk, false alarms and delay of a threshold rule by Monte Carlo.

    The threshold is ``config.r`` or, when absent, the one found by the value iteration.
    """
    params, sim = config.model, config.sim
    r = config.r
    if r is None:
        r = threshold(value_iterate(params, settings=config.solver))
        logger.info("Using the optimal threshold r={}", r)
    estimates = estimate_detection(r, params, sim)
    directory = get_output_directory(out)
    write_json(estimates, directory / "simulation.json")
    if sim.dump_paths:
        paths_dir = get_output_directory(directory, "paths")
        for i in range(min(sim.dump_paths, sim.n_paths)):
            trajectory = simulate_pi_path(params, sim, path_streams(sim.seed, i, sim.antithetic))
            write_path_csv(trajectory, paths_dir, i)
    _print_summary(to_jsonable(estimates))
    return ExitCode.OK


@_exit_codes
def cmd_figure1(config: RunConfig, out: Path | None = None) -> int:
    """Write the curves ``v_0 .. v_10`` and their thresholds.

    Twenty iterations are computed; ``v_20`` stands in for the limit when checking that
    ``sup |v_10 - v_20| <= (1 - p)^10``.
    """
    params = config.model
    vi = value_iterate(params, settings=config.solver, n_iterations=REFERENCE_ITERATIONS)
    directory = get_output_directory(out)
    frame = iterates_frame(vi, range(FIGURE_ITERATIONS + 1), include_final=False)
    write_frame_csv(frame, directory / "figure1.csv")
    distance = vi.iterate(FIGURE_ITERATIONS).sup_distance(vi.iterate(REFERENCE_ITERATIONS))
    bound = (1.0 - params.p) ** FIGURE_ITERATIONS
    side = {
        "thresholds": vi.thresholds[1 : FIGURE_ITERATIONS + 1],
        "sup_distance_to_reference": distance,
        "bound": bound,
    }
    write_json(side, directory / "figure1_thresholds.json")
    if distance > bound:
        raise InconsistencyError(f"sup |v_10 - v_20| = {distance:.3e} exceeds (1 - p)^10 = {bound:.3e}")
    _print_summary(side)
    return ExitCode.OK


@_exit_codes
def cmd_selftest(config: RunConfig, out: Path | None = None) -> int:
    """Run the oracle suite and print the pass/fail table."""
    results = run_selftest(config)
    print(format_table(results))
    if out is not None:
        write_json({"checks": [to_jsonable(result) for result in results]}, get_output_directory(out) / "selftest.json")
    return ExitCode.OK if all(result.passed for result in results) else ExitCode.SELFTEST_FAILURE


COMMANDS: dict[str, Command] = {
    "solve": cmd_solve,
    "variational": cmd_variational,
    "simulate": cmd_simulate,
    "figure1": cmd_figure1,
    "selftest": cmd_selftest,
}


def _common_arguments() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON configuration merged onto the defaults.")
    common.add_argument("--out", type=Path, default=None, help="Output directory (current directory by default).")
    common.add_argument("--verbose", action="store_true", help="Log debug messages.")
    model = common.add_argument_group("model")
    model.add_argument("--mu", type=float, help="Post-disorder drift.")
    model.add_argument("--lambda", dest="lambda_", type=float, help="Shock rate.")
    model.add_argument("--p", type=float, help="Probability that a shock triggers the disorder.")
    model.add_argument("--c", type=float, help="Delay cost per unit time.")
    model.add_argument("--pi0", type=float, help="Prior probability of disorder at time zero.")
    solver = common.add_argument_group("solver")
    solver.add_argument("--grid-size", type=int, help="Number of grid knots.")
    solver.add_argument("--epsilon", type=float, help="Target accuracy of the value iteration.")
    solver.add_argument("--quadrature-tol", type=float, help="Target accuracy of the quadrature.")
    solver.add_argument("--alpha", type=float, help="False-alarm budget (variational).")
    sim = common.add_argument_group("simulation")
    sim.add_argument("--r", type=float, help="Threshold to simulate (simulate).")
    sim.add_argument("--dt", type=float, help="Time step.")
    sim.add_argument("--n-paths", type=int, help="Number of paths.")
    sim.add_argument("--seed", type=int, help="Root seed.")
    sim.add_argument("--workers", type=int, help="Worker processes.")
    sim.add_argument("--antithetic", action=argparse.BooleanOptionalAction, default=None, help="Antithetic pairs.")
    sim.add_argument("--dump-paths", type=int, help="Number of path CSV files to write.")
    return common


def build_parser() -> argparse.ArgumentParser:
    """Parser with one subcommand per entry of :data:`COMMANDS`."""
    parser = argparse.ArgumentParser(
        prog="poisson-disorder",
        description="Quickest detection of a Wiener disorder triggered by Poisson shocks.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = _common_arguments()
    for name, command in COMMANDS.items():
        summary = (command.__doc__ or "").splitlines()[0]
        subparsers.add_parser(name, parents=[common], help=summary, description=summary)
    return parser


_OVERRIDES = {
    "model": {"mu": "mu", "lambda_": "lambda", "p": "p", "c": "c", "pi0": "pi0"},
    "solver": {"grid_size": "grid_size", "epsilon": "epsilon", "quadrature_tol": "quadrature_tol"},
    "sim": {
        "dt": "dt",
        "n_paths": "n_paths",
        "seed": "seed",
        "workers": "workers",
        "antithetic": "antithetic",
        "dump_paths": "dump_paths",
    },
}


def overrides_from_args(args: argparse.Namespace) -> dict[str, Any]:
    """Nested configuration overrides for the flags that were given."""
    overrides: dict[str, Any] = {}
    for section, names in _OVERRIDES.items():
        given = {key: getattr(args, attr) for attr, key in names.items() if getattr(args, attr) is not None}
        if given:
            overrides[section] = given
    for key in ("alpha", "r"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    return overrides


def configure_logging(verbose: bool = False) -> None:
    """Enable the package logger with a single stderr sink."""
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if verbose else "INFO", format=LOG_FORMAT)
    logger.enable("poisson_disorder")


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point of the ``poisson-disorder`` script."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    result = load_run_config(args.config, overrides_from_args(args))
    if result.is_err():
        logger.error("{}", result.error)
        return ExitCode.CONFIG_ERROR
    return int(COMMANDS[args.command](result.unwrap(), args.out))
