"""Solver settings and the run configuration of the command line tool."""

import json
from importlib.resources import files
from pathlib import Path
from typing import Annotated, Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from r2x_core import Err, Ok, Result

from .exceptions import ConfigError
from .models.params import ModelParams
from .models.simulation import SimConfig

DEFAULTS_FILE = "defaults.json"


class SolverSettings(BaseModel):
    """Numerical settings shared by the value and false-alarm solvers."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    grid_size: Annotated[int, Field(ge=3, description="Number of cosine-spaced knots on [0, 1].")] = 2001
    quadrature_tol: Annotated[
        float, Field(gt=0, description="Target relative accuracy of the cell quadrature.")
    ] = 1e-10
    bisect_tol: Annotated[float, Field(gt=0, description="Absolute tolerance of the threshold root.")] = 1e-12
    max_bisect_iterations: Annotated[int, Field(ge=1)] = 200
    epsilon: Annotated[float, Field(gt=0, lt=1, description="Target accuracy of the value iteration.")] = 1e-3
    sign_tol: Annotated[
        float, Field(ge=0, description="Relative slack of the sign conditions at the bracket ends.")
    ] = 1e-8
    concavity_tol: Annotated[float, Field(ge=0, description="Chord defect that triggers a repair.")] = 1e-8
    consistency_tol: Annotated[
        float, Field(ge=0, description="Slack of the bound and monotonicity checks on iterates.")
    ] = 1e-6
    max_extra_iterations: Annotated[
        int, Field(ge=0, description="Iterations allowed past the certified count to settle noise.")
    ] = 50
    alpha_tol: Annotated[float, Field(gt=0, description="Accuracy of the false-alarm match.")] = 1e-4
    threshold_tol: Annotated[float, Field(gt=0, description="Accuracy of the threshold match.")] = 1e-6
    scan_points: Annotated[int, Field(ge=2, description="Coarse scan size of the threshold search.")] = 16
    cost_bounds: Annotated[
        tuple[float, float], Field(description="Search interval of the delay cost.")
    ] = (1e-4, 1e4)

    @model_validator(mode="after")
    def _check_cost_bounds(self) -> "SolverSettings":
        low, high = self.cost_bounds
        if not 0 < low < high:
            raise ValueError(f"cost_bounds must satisfy 0 < low < high, got {self.cost_bounds}")
        return self


class RunConfig(BaseModel):
    """Everything a command needs: model, solver and simulation settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    model: Annotated[ModelParams, Field(description="Model parameters.")]
    solver: Annotated[SolverSettings, Field(description="Solver settings.")] = SolverSettings()
    sim: Annotated[SimConfig, Field(description="Simulation settings.")] = SimConfig()
    alpha: Annotated[
        float | None, Field(gt=0, lt=1, description="False-alarm budget of the variational command.")
    ] = None
    r: Annotated[float | None, Field(gt=0, lt=1, description="Threshold override for simulate.")] = None
    report_iterations: Annotated[
        list[int], Field(description="Iterates v_n written next to the final value function.")
    ] = []


def get_defaults() -> dict[str, Any]:
    """Read the packaged default configuration document."""
    text = files("poisson_disorder").joinpath("config", DEFAULTS_FILE).read_text(encoding="utf-8")
    defaults: dict[str, Any] = json.loads(text)
    return defaults


def deep_merge(base: dict[str, Any], update: dict[str, Any]) -> dict[str, Any]:
    """Merge ``update`` into a copy of ``base``, recursing into nested mappings."""
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_run_config(
    path: Path | None = None, overrides: dict[str, Any] | None = None
) -> Result[RunConfig, ConfigError]:
    """Build a :class:`RunConfig` from the defaults, an optional JSON file and overrides.

    Parameters
    ----------
    path : Path | None
        JSON document merged onto the packaged defaults.
    overrides : dict[str, Any] | None
        Nested mapping applied last (typically from command line flags).

    Returns
    -------
    Result[RunConfig, ConfigError]
        ``Ok`` with the validated configuration, ``Err`` describing the first problem found.
    """
    document = get_defaults()
    if path is not None:
        try:
            user = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            return Err(ConfigError(f"Could not read configuration {path}: {exc}"))
        if not isinstance(user, dict):
            return Err(ConfigError(f"Configuration {path} must be a JSON object"))
        document = deep_merge(document, user)
    if overrides:
        document = deep_merge(document, overrides)
    try:
        return Ok(RunConfig.model_validate(document))
    except ValidationError as exc:
        return Err(ConfigError(f"Invalid configuration: {exc}"))


def serialize_run_config(config: RunConfig) -> str:
    """Serialize to the JSON document accepted by :func:`parse_run_config`."""
    return config.model_dump_json(by_alias=True, indent=2)


def parse_run_config(text: str) -> Result[RunConfig, ConfigError]:
    """Parse a complete JSON configuration document (no defaults merged)."""
    try:
        return Ok(RunConfig.model_validate_json(text))
    except ValidationError as exc:
        return Err(ConfigError(f"Invalid configuration: {exc}"))
