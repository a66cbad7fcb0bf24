# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""YAML run configuration: loading, validation and object construction.

Scalar options and their defaults live in the packaged ``config.yaml``; the
structured sections (initial data, sweep, batch) are described by the packaged
``schema.yaml``. Both are combined into one JSON schema that rejects unknown
keys.
"""

import dataclasses
import itertools
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import yaml
from jsonschema import Draft7Validator, ValidationError
from scipy.interpolate import PchipInterpolator

from nskbench.exceptions import ConfigError, DomainError
from nskbench.geometry import RadialGrid, State
from nskbench.integrate import RunConfig
from nskbench.model import ModelParams, validate
from nskbench.regime import Theorem
from nskbench.spatial import extended_fields

logger = logging.getLogger(__name__)

PACKAGE_DIR = Path(__file__).parent
OPTIONS_FILE = PACKAGE_DIR / "config.yaml"
SCHEMA_FILE = PACKAGE_DIR / "schema.yaml"
OUTPUT_DIR_ENV = "NSKBENCH_OUTPUT_DIR"
BOUNDARY_PROJECTION_TOL = 1e-8

_JSON_TYPES = {"string": "string", "int": "integer", "float": "number", "boolean": "boolean"}

DEFAULT_INITIAL = {
    "v": {"kind": "constant", "value": 1.0},
    "u": {"kind": "constant", "value": 0.0},
}


@dataclasses.dataclass(frozen=True)
class OutputConfig:
    """Where and what to write."""

    directory: Path
    snapshots: bool = True
    eulerian: bool = False


@dataclasses.dataclass(frozen=True)
class SweepConfig:
    """Regime raster over an (alpha, beta) rectangle at fixed gamma."""

    alpha_range: Tuple[float, float]
    beta_range: Tuple[float, float]
    gamma: float
    theorems: Tuple[Theorem, ...] = (Theorem.T1_1, Theorem.T1_2)
    resolution: Union[int, Tuple[int, int]] = 11
    workers: int = 1


@dataclasses.dataclass(frozen=True)
class BatchConfig:
    """Cartesian grid of model overrides, one simulation each."""

    parameters: Dict[str, List[Any]]
    workers: int = 1

    def members(self) -> List[Dict[str, Any]]:
        """Model overrides of every member in deterministic order."""
        names = list(self.parameters)
        return [
            dict(zip(names, values))
            for values in itertools.product(*(self.parameters[name] for name in names))
        ]


@dataclasses.dataclass(frozen=True)
class WorkbenchConfig:
    """Fully validated configuration of one invocation."""

    params: ModelParams
    grid: RadialGrid
    run: RunConfig
    initial: Dict[str, Any]
    output: OutputConfig
    ledger_tol: float
    sweep: Optional[SweepConfig] = None
    batch: Optional[BatchConfig] = None
    base_dir: Path = Path(".")
    sections: Dict[str, Dict[str, Any]] = dataclasses.field(default_factory=dict)

    def with_model(self, **overrides) -> "WorkbenchConfig":
        """Copy with hyphenated model options overridden; re-validates the model."""
        model = dict(self.sections["model"])
        model.update(overrides)
        sections = dict(self.sections, model=model)
        return dataclasses.replace(self, params=build_params(model), sections=sections)

    def with_output(self, directory: Path) -> "WorkbenchConfig":
        """Copy writing into another directory."""
        return dataclasses.replace(
            self, output=dataclasses.replace(self.output, directory=Path(directory))
        )


def load_options() -> Dict[str, Dict[str, Dict[str, Any]]]:
    """Packaged option declarations, section -> option -> {type, default, description}."""
    return yaml.safe_load(OPTIONS_FILE.read_text())


def _option_schema(option: Dict[str, Any]) -> Dict[str, Any]:
    json_type = _JSON_TYPES[option["type"]]
    nullable = option["default"] is None
    schema: Dict[str, Any] = {"type": [json_type, "null"] if nullable else json_type}
    if "enum" in option:
        schema["enum"] = option["enum"]
    if option.get("description"):
        schema["description"] = option["description"].strip()
    return schema


def config_schema() -> Dict[str, Any]:
    """JSON schema of a whole config file."""
    options = load_options()
    structured = yaml.safe_load(SCHEMA_FILE.read_text())
    properties = {
        section: {
            "type": "object",
            "properties": {name: _option_schema(option) for name, option in declared.items()},
            "additionalProperties": False,
        }
        for section, declared in options.items()
    }
    for section in ("initial", "sweep", "batch"):
        properties[section] = structured[section]
    return {
        "type": "object",
        "definitions": structured["definitions"],
        "properties": properties,
        "additionalProperties": False,
    }


def _with_defaults(section: str, values: Dict[str, Any]) -> Dict[str, Any]:
    options = load_options()[section]
    merged = {name: option["default"] for name, option in options.items()}
    merged.update(values or {})
    return merged


def build_params(model: Dict[str, Any]) -> ModelParams:
    """ModelParams from a hyphenated model section.

    Raises:
        ConfigError: if the coefficients are inadmissible.
    """
    model = _with_defaults("model", model)
    try:
        params = ModelParams(
            kind=model["kind"],
            alpha=float(model["alpha"]),
            beta=float(model["beta"]),
            gamma=float(model["gamma"]),
            mu_tilde=float(model["mu-tilde"]),
            lambda_tilde=float(model["lambda-tilde"]),
            dim=int(model["dim"]),
            a=float(model["a"]),
        )
    except (DomainError, ValueError) as error:
        raise ConfigError(f"Invalid model section: {error}") from error
    violations = validate(params)
    if violations:
        raise ConfigError(f"Inadmissible model parameters: {', '.join(violations)}")
    return params


def _build_run(run: Dict[str, Any]) -> RunConfig:
    try:
        return RunConfig(
            t_end=float(run["t-end"]),
            cfl_visc=float(run["cfl-visc"]),
            cfl_cap=float(run["cfl-cap"]),
            dt_min=float(run["dt-min"]),
            dt_init=float(run["dt-init"]),
            dt_max=float(run["dt-max"]),
            dt_fixed=None if run["dt-fixed"] is None else float(run["dt-fixed"]),
            v_floor=float(run["v-floor"]),
            snapshot_every=int(run["snapshot-every"]),
        )
    except DomainError as error:
        raise ConfigError(f"Invalid run section: {error.msg}") from error


def _build_sweep(sweep: Optional[Dict[str, Any]]) -> Optional[SweepConfig]:
    if sweep is None:
        return None
    theorems = sweep.get("theorem", [Theorem.T1_1.value, Theorem.T1_2.value])
    if isinstance(theorems, str):
        theorems = [theorems]
    resolution = sweep.get("resolution", 11)
    return SweepConfig(
        alpha_range=tuple(sweep["alpha"]),
        beta_range=tuple(sweep["beta"]),
        gamma=float(sweep["gamma"]),
        theorems=tuple(Theorem(theorem) for theorem in theorems),
        resolution=resolution if isinstance(resolution, int) else tuple(resolution),
        workers=int(sweep.get("workers", 1)),
    )


def _build_batch(batch: Optional[Dict[str, Any]]) -> Optional[BatchConfig]:
    if batch is None:
        return None
    return BatchConfig(parameters=dict(batch["parameters"]), workers=int(batch.get("workers", 1)))


def parse_config(data: Any, base_dir: Path = Path(".")) -> WorkbenchConfig:
    """Validate a parsed config document and build the workbench objects.

    Raises:
        ConfigError: on schema violations or inadmissible parameters.
    """
    if data is None:
        data = {}
    try:
        Draft7Validator(config_schema()).validate(data)
    except ValidationError as val_error:
        logger.error(val_error)
        location = "/".join(str(part) for part in val_error.absolute_path) or "<root>"
        raise ConfigError(f"Invalid config at {location}: {val_error.message}") from val_error

    sections = {name: _with_defaults(name, data.get(name)) for name in load_options()}
    params = build_params(sections["model"])
    try:
        grid = RadialGrid(n=int(sections["grid"]["n"]), x_max=float(sections["grid"]["x-max"]))
    except DomainError as error:
        raise ConfigError(f"Invalid grid section: {error.msg}") from error

    directory = Path(os.environ.get(OUTPUT_DIR_ENV) or sections["output"]["directory"])
    if not directory.is_absolute() and OUTPUT_DIR_ENV not in os.environ:
        directory = base_dir / directory
    output = OutputConfig(
        directory=directory,
        snapshots=bool(sections["output"]["snapshots"]),
        eulerian=bool(sections["output"]["eulerian"]),
    )
    return WorkbenchConfig(
        params=params,
        grid=grid,
        run=_build_run(sections["run"]),
        initial=data.get("initial") or DEFAULT_INITIAL,
        output=output,
        ledger_tol=float(sections["run"]["ledger-tol"]),
        sweep=_build_sweep(data.get("sweep")),
        batch=_build_batch(data.get("batch")),
        base_dir=base_dir,
        sections=sections,
    )


def load_config(path: Union[str, Path]) -> WorkbenchConfig:
    """Read and validate a YAML config file.

    Relative paths inside the file (output directory, initial data file) are
    resolved against the file's directory.

    Raises:
        ConfigError: if the file cannot be read, parsed or validated.
    """
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as error:
        raise ConfigError(f"Cannot read config {path}: {error}") from error
    except yaml.YAMLError as error:
        logger.error(error)
        raise ConfigError(f"Config {path} is not valid YAML") from error
    logger.info(f"Loaded config {path}")
    return parse_config(data, base_dir=path.parent)


def _profile(descriptor: Dict[str, Any], x: np.ndarray, base: float) -> np.ndarray:
    kind = descriptor["kind"]
    if kind == "constant":
        return np.full_like(x, float(descriptor["value"]))
    if kind == "gaussian-bump":
        shape = np.exp(-(((x - descriptor["center"]) / descriptor["width"]) ** 2))
        return base + descriptor["amplitude"] * shape
    if kind == "tanh-front":
        left, right = descriptor["left"], descriptor["right"]
        front = 0.5 * (1.0 + np.tanh((x - descriptor["center"]) / descriptor["width"]))
        return left + (right - left) * front
    raise ConfigError(f"Unknown initial profile kind {kind!r}")


def read_state_table(path: Path) -> Dict[str, np.ndarray]:
    """Columns of a CSV state table with at least x, v and u.

    Raises:
        ConfigError: if the file is missing, malformed or lacks a column.
    """
    try:
        table = np.genfromtxt(path, delimiter=",", names=True, dtype=float, ndmin=1)
    except (OSError, ValueError) as error:
        raise ConfigError(f"Cannot read initial data {path}: {error}") from error
    names = table.dtype.names or ()
    missing = [column for column in ("x", "v", "u") if column not in names]
    if missing:
        raise ConfigError(f"Initial data {path} lacks column(s) {', '.join(missing)}")
    return {name: np.asarray(table[name], dtype=float) for name in names}


def _from_file(
    path: Path, grid: RadialGrid
) -> Tuple[np.ndarray, np.ndarray, float]:
    columns = read_state_table(path)
    x = columns["x"]
    if x.shape[0] < 2 or not np.all(np.diff(x) > 0):
        raise ConfigError(f"Initial data {path} needs strictly increasing x")
    t = float(columns["t"][0]) if "t" in columns else 0.0
    nodes = grid.nodes
    if x.shape == nodes.shape and np.allclose(x, nodes, rtol=0.0, atol=1e-12 * grid.x_max):
        return columns["v"], columns["u"], t
    if abs(x[0]) > 1e-12 * grid.x_max:
        raise ConfigError(f"Initial data {path} must start at x = 0, got {x[0]}")
    logger.info(f"Resampling {x.shape[0]} rows of {path} onto {grid.n} nodes")
    # the far field (1, 0) continues the table past its last row
    v = PchipInterpolator(x, columns["v"], extrapolate=False)(nodes)
    u = PchipInterpolator(x, columns["u"], extrapolate=False)(nodes)
    return np.nan_to_num(v, nan=1.0), np.nan_to_num(u, nan=0.0), t


def _project_boundary(v: np.ndarray, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    v, u = np.array(v, dtype=float), np.array(u, dtype=float)
    moves = {"u(0)": abs(u[0]), "u(x_max)": abs(u[-1]), "v(x_max)": abs(v[-1] - 1.0)}
    for where, move in moves.items():
        if move > BOUNDARY_PROJECTION_TOL:
            logger.warning(
                f"Initial data moved by {move:.3g} to satisfy the boundary value {where}"
            )
    u[0] = 0.0
    u[-1] = 0.0
    v[-1] = 1.0
    return v, u


def build_initial_state(
    descriptor: Dict[str, Any],
    grid: RadialGrid,
    params: ModelParams,
    base_dir: Path = Path("."),
) -> State:
    """Initial state from an initial-section descriptor.

    Profiles default to v = 1 and u = 0; Gaussian bumps sit on those bases.
    Boundary values are projected onto u(0) = u(x_max) = 0 and v(x_max) = 1.

    Raises:
        ConfigError: if the data cannot be built or v is not positive.
    """
    t = 0.0
    if descriptor.get("kind") == "file":
        path = Path(descriptor["path"])
        if not path.is_absolute():
            path = base_dir / path
        v, u, t = _from_file(path, grid)
    else:
        x = grid.nodes
        v = _profile(descriptor.get("v", DEFAULT_INITIAL["v"]), x, base=1.0)
        u = _profile(descriptor.get("u", DEFAULT_INITIAL["u"]), x, base=0.0)
    v, u = _project_boundary(v, u)
    try:
        state = State.build(v, u, grid, params, t=t)
        extended_fields(state, grid, params)
    except DomainError as error:
        raise ConfigError(f"Invalid initial data: {error.msg}") from error
    return state

