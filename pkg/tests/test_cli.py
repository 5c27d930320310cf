"""Tests for the ``poisson-disorder`` command line tool."""

import json
from pathlib import Path

import polars as pl
import pytest

from poisson_disorder.cli import ExitCode, build_parser, main, overrides_from_args

FAST = ["--grid-size", "201", "--epsilon", "0.01"]
FAST_SIM = ["--n-paths", "20", "--dt", "0.01", "--seed", "3"]

pytestmark = pytest.mark.integration


@pytest.fixture(autouse=True)
def quiet_logging(mocker):
    return mocker.patch("poisson_disorder.cli.configure_logging")


def test_parser_collects_overrides():
    args = build_parser().parse_args(["solve", "--mu", "2", "--lambda", "3", "--no-antithetic", "--alpha", "0.1"])
    assert overrides_from_args(args) == {
        "model": {"mu": 2.0, "lambda": 3.0},
        "sim": {"antithetic": False},
        "alpha": 0.1,
    }


def test_parser_without_flags_has_no_overrides():
    assert overrides_from_args(build_parser().parse_args(["figure1"])) == {}


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_verbose_flag_reaches_logging(tmp_path: Path, quiet_logging):
    main(["solve", "--p", "1.5", "--verbose", "--out", str(tmp_path)])
    quiet_logging.assert_called_once_with(True)


def test_invalid_parameter_exits_with_config_error(tmp_path: Path):
    assert main(["solve", "--p", "1.5", "--out", str(tmp_path)]) == ExitCode.CONFIG_ERROR
    assert not (tmp_path / "solve_summary.json").exists()


def test_missing_config_file_exits_with_config_error(tmp_path: Path):
    assert main(["solve", "--config", str(tmp_path / "absent.json")]) == ExitCode.CONFIG_ERROR


def test_solve_writes_value_function(tmp_path: Path, capsys):
    assert main(["solve", *FAST, "--out", str(tmp_path)]) == ExitCode.OK
    frame = pl.read_csv(tmp_path / "value_function.csv")
    assert frame.columns == ["pi", "v_final"]
    assert frame.height == 201
    summary = json.loads((tmp_path / "solve_summary.json").read_text())
    assert set(summary) == {
        "pi_inf",
        "n_iterations",
        "sup_error_bound",
        "fixed_point_residual",
        "bracket",
        "value_at_pi0",
    }
    r_h, r_zero = summary["bracket"]
    assert r_h <= summary["pi_inf"] <= r_zero
    assert summary["sup_error_bound"] <= 0.01
    assert json.loads(capsys.readouterr().out) == summary


def test_solve_extends_to_requested_iterates(tmp_path: Path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"report_iterations": [1, 12]}))
    assert main(["solve", *FAST, "--config", str(config), "--out", str(tmp_path)]) == ExitCode.OK
    frame = pl.read_csv(tmp_path / "value_function.csv")
    assert frame.columns == ["pi", "v_1", "v_12", "v_final"]
    assert json.loads((tmp_path / "solve_summary.json").read_text())["n_iterations"] == 12


def test_solve_rejects_zero_cost(tmp_path: Path):
    assert main(["solve", *FAST, "--c", "0", "--out", str(tmp_path)]) == ExitCode.CONFIG_ERROR


def test_variational_needs_alpha(tmp_path: Path):
    assert main(["variational", "--out", str(tmp_path)]) == ExitCode.CONFIG_ERROR


def test_variational_trivial_budget(tmp_path: Path):
    assert main(["variational", "--alpha", "0.6", "--out", str(tmp_path)]) == ExitCode.OK
    solution = json.loads((tmp_path / "variational.json").read_text())
    assert solution["kind"] == "stop_at_first_arrival"
    assert solution["expected_delay"] == 0.0


def test_variational_search_failure(tmp_path: Path):
    code = main(["variational", *FAST, "--alpha", "1e-6", "--out", str(tmp_path)])
    assert code == ExitCode.SEARCH_FAILURE
    diagnostics = json.loads((tmp_path / "variational_diagnostics.json").read_text())
    assert "scan_excess" in diagnostics["diagnostics"]
    assert not (tmp_path / "variational.json").exists()


def test_simulate_is_reproducible(tmp_path: Path):
    first, second = tmp_path / "first", tmp_path / "second"
    for out in (first, second):
        assert main(["simulate", "--r", "0.8", *FAST_SIM, "--out", str(out)]) == ExitCode.OK
    text = (first / "simulation.json").read_text()
    assert text == (second / "simulation.json").read_text()
    estimates = json.loads(text)
    assert estimates["r"] == 0.8
    assert estimates["n_paths"] == 20
    assert {"bayes_risk", "false_alarm", "delay", "alarm_time"} <= set(estimates)


def test_simulate_dumps_paths(tmp_path: Path):
    assert main(["simulate", "--r", "0.8", *FAST_SIM, "--dump-paths", "2", "--out", str(tmp_path)]) == ExitCode.OK
    paths = sorted(path.name for path in (tmp_path / "paths").iterdir())
    assert paths == ["path_00000.csv", "path_00001.csv"]
    assert pl.read_csv(tmp_path / "paths" / "path_00001.csv").columns == ["t", "X", "N", "Pi"]


def test_simulate_uses_the_optimal_threshold(tmp_path: Path, caplog):
    assert main(["simulate", *FAST, *FAST_SIM, "--out", str(tmp_path)]) == ExitCode.OK
    assert "Using the optimal threshold" in caplog.text
    assert 0.76 < json.loads((tmp_path / "simulation.json").read_text())["r"] < 0.87


def test_figure1_writes_curves_and_thresholds(tmp_path: Path):
    assert main(["figure1", "--grid-size", "401", "--out", str(tmp_path)]) == ExitCode.OK
    frame = pl.read_csv(tmp_path / "figure1.csv")
    assert frame.columns == ["pi", *(f"v_{n}" for n in range(11))]
    side = json.loads((tmp_path / "figure1_thresholds.json").read_text())
    assert len(side["thresholds"]) == 10
    assert side["bound"] == pytest.approx(0.5**10)
    assert side["sup_distance_to_reference"] <= side["bound"]
    assert side["thresholds"] == sorted(side["thresholds"])


def test_selftest_negative_control(capsys):
    code = main(["selftest", "--grid-size", "201", "--quadrature-tol", "1", "--n-paths", "100", "--dt", "0.01"])
    assert code == ExitCode.SELFTEST_FAILURE
    table = capsys.readouterr().out
    assert "closed-form B" in table
    assert "FAIL" in table


def test_selftest_writes_report(tmp_path: Path):
    args = ["selftest", "--grid-size", "201", "--quadrature-tol", "1", "--n-paths", "100", "--dt", "0.01"]
    main([*args, "--out", str(tmp_path)])
    report = json.loads((tmp_path / "selftest.json").read_text())
    assert len(report["checks"]) == 10
