"""Tests for exporter utility helpers."""

import json
from pathlib import Path

import numpy as np
import polars as pl
import pytest

from poisson_disorder.models.results import ValueIteration
from poisson_disorder.models.simulation import MCEstimate
from poisson_disorder.monte_carlo import simulate_pi_path
from poisson_disorder.utils_exporter import (
    generate_path_filename,
    get_output_directory,
    iterates_frame,
    to_jsonable,
    write_frame_csv,
    write_json,
    write_path_csv,
)
from poisson_disorder.utils_simulation import path_streams


def test_get_output_directory_creates_subfolders(tmp_path: Path):
    directory = get_output_directory(tmp_path / "run", "paths")
    assert directory == tmp_path / "run" / "paths"
    assert directory.is_dir()


def test_write_frame_csv_keeps_twelve_significant_digits(tmp_path: Path):
    values = [0.0, 1.0 / 3.0, 6.168502750680849e-7]
    filepath = write_frame_csv(pl.DataFrame({"pi": values}), tmp_path / "values.csv")
    lines = filepath.read_text().splitlines()
    assert lines[0] == "pi"
    assert "e" in lines[2]
    written = [float(line) for line in lines[1:]]
    assert written[0] == 0.0
    for value, expected in zip(written[1:], values[1:], strict=True):
        assert value == pytest.approx(expected, rel=1e-11)


def test_write_json_keeps_full_precision(tmp_path: Path):
    value = 1.0 / 3.0
    filepath = write_json({"value": value, "items": [1, 2]}, tmp_path / "out.json")
    assert json.loads(filepath.read_text())["value"] == value
    assert filepath.read_text().endswith("\n")


def test_write_json_rejects_nan(tmp_path: Path):
    with pytest.raises(ValueError):
        write_json({"value": float("nan")}, tmp_path / "nan.json")


def test_to_jsonable_dumps_models():
    estimate = MCEstimate(mean=0.25, stderr=0.01, n=10, censor_fraction=0.0)
    assert to_jsonable(estimate) == {"mean": 0.25, "stderr": 0.01, "n": 10, "censor_fraction": 0.0}


def test_iterates_frame_columns(figure_iteration: ValueIteration):
    frame = iterates_frame(figure_iteration, [0, 3])
    assert frame.columns == ["pi", "v_0", "v_3", "v_final"]
    np.testing.assert_array_equal(frame["v_3"].to_numpy(), figure_iteration.iterate(3).ordinates)
    assert iterates_frame(figure_iteration, range(2), include_final=False).columns == ["pi", "v_0", "v_1"]


def test_iterates_frame_rejects_missing_iterates(figure_iteration: ValueIteration):
    with pytest.raises(IndexError, match="v_21"):
        iterates_frame(figure_iteration, [21])


def test_write_path_csv(tmp_path: Path, figure_params, tiny_sim_config):
    trajectory = simulate_pi_path(figure_params, tiny_sim_config, path_streams(0, 3), horizon=0.5)
    filepath = write_path_csv(trajectory, tmp_path, 3)
    assert filepath.name == generate_path_filename(3) == "path_00003.csv"
    frame = pl.read_csv(filepath)
    assert frame.columns == ["t", "X", "N", "Pi"]
    assert frame.height == trajectory.t.size
