"""Utility functions for writing solver and simulation results."""

import json
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any

import polars as pl
from loguru import logger
from pydantic import BaseModel

from .models.results import ValueIteration
from .models.simulation import PiTrajectory

CSV_SIGNIFICANT_DIGITS = 12


def get_output_directory(out: Path | str | None, subdirectory: str | None = None) -> Path:
    """Return (and create) the directory results are written to."""
    base_folder = Path(out) if out is not None else Path.cwd()
    directory = base_folder / subdirectory if subdirectory else base_folder
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def write_frame_csv(frame: pl.DataFrame, filepath: Path) -> Path:
    """Write ``frame`` with a header and floats in scientific notation with 12 significant digits."""
    frame.write_csv(filepath, float_scientific=True, float_precision=CSV_SIGNIFICANT_DIGITS - 1)
    logger.info("Wrote {} rows to {}", frame.height, filepath)
    return filepath


def to_jsonable(payload: BaseModel | Mapping[str, Any]) -> dict[str, Any]:
    """Plain JSON types; floats keep their shortest round-trip representation."""
    if isinstance(payload, BaseModel):
        return payload.model_dump(mode="json", by_alias=True)
    return json.loads(json.dumps(payload, allow_nan=False))


def write_json(payload: BaseModel | Mapping[str, Any], filepath: Path) -> Path:
    """Write ``payload`` as indented JSON.

    Python writes every float with the shortest representation that round-trips exactly, which is at
    most 17 significant digits. Nothing run-specific such as a timestamp is written, so a fixed seed
    gives byte-identical files.
    """
    text = json.dumps(to_jsonable(payload), indent=2, allow_nan=False)
    filepath.write_text(text + "\n", encoding="utf-8")
    logger.info("Wrote {}", filepath)
    return filepath


def iterates_frame(vi: ValueIteration, iterations: Iterable[int], *, include_final: bool = True) -> pl.DataFrame:
    """Table with ``pi`` and one ``v_n`` column per requested iteration (plus ``v_final``).

    Raises
    ------
    IndexError
        If an iteration beyond ``vi.n_final`` is requested.
    """
    columns: dict[str, Any] = {"pi": vi.final.abscissae}
    for n in iterations:
        if not 0 <= n <= vi.n_final:
            raise IndexError(f"iterate v_{n} was not computed (last is v_{vi.n_final})")
        columns[f"v_{n}"] = vi.iterate(n).ordinates
    if include_final:
        columns["v_final"] = vi.final.ordinates
    return pl.DataFrame(columns)


def generate_path_filename(index: int) -> str:
    """File name of the dumped path ``index``."""
    return f"path_{index:05d}.csv"


def write_path_csv(trajectory: PiTrajectory, directory: Path, index: int) -> Path:
    """Write one simulated path as ``t, X, N, Pi``."""
    return write_frame_csv(trajectory.to_frame(), directory / generate_path_filename(index))
