# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""File artifacts of simulations, sweeps and convergence studies.

Every real is written with 17 significant digits so that a value read back
from a CSV file is bit-identical to the one that was written.
"""

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from nskbench.geometry import EulerianTable, RadialGrid, State
from nskbench.regime import CASES, RegimeVerdict, Theorem

logger = logging.getLogger(__name__)

TEMPLATES_DIR = Path(__file__).parent / "templates"
SUMMARY_TEMPLATE = "summary.txt.j2"

STATE_COLUMNS = ("t", "x", "v", "u", "r")
EULERIAN_COLUMNS = ("t", "r", "rho", "u_radial")
RASTER_PREFIX = ("alpha", "beta", "gamma", "theorem", "matched_cases")


def format_value(value: Any) -> str:
    """CSV cell text; floats use 17 significant digits, nan and inf included."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "{:.17g}".format(float(value))
    if value is None:
        return ""
    return str(value)


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> Path:
    """Write rows under a fixed header; the header is written even without rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(columns), extrasaction="raise")
        writer.writeheader()
        for row in rows:
            writer.writerow({column: format_value(row[column]) for column in columns})
    logger.debug(f"Wrote {path}")
    return path


def _finite_or_none(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_finite_or_none(item) for item in value.tolist()]
    if isinstance(value, Mapping):
        return {str(key): _finite_or_none(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite_or_none(item) for item in value]
    return value


def write_json(path: Path, data: Mapping[str, Any]) -> Path:
    """Strict JSON; non-finite reals become null."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_finite_or_none(data), indent=2, allow_nan=False) + "\n")
    logger.debug(f"Wrote {path}")
    return path


def state_rows(state: State, grid: RadialGrid) -> List[Dict[str, float]]:
    """One row per mass node with columns t, x, v, u, r."""
    return [
        {"t": state.t, "x": x, "v": v, "u": u, "r": r}
        for x, v, u, r in zip(grid.nodes, state.v, state.u, state.r)
    ]


def write_state(path: Path, state: State, grid: RadialGrid) -> Path:
    """State table readable by the ``file`` initial-data descriptor."""
    return write_csv(path, STATE_COLUMNS, state_rows(state, grid))


class SnapshotWriter:
    """Snapshot callback writing ``snapshots/state_<step>.csv`` under a run directory."""

    def __init__(self, directory: Path, grid: RadialGrid):
        self.directory = Path(directory) / "snapshots"
        self.grid = grid
        self.written: List[Path] = []

    def path(self, step: int) -> Path:
        """File of a given step index."""
        return self.directory / f"state_{step:08d}.csv"

    def __call__(self, step: int, state: State) -> None:
        self.written.append(write_state(self.path(step), state, self.grid))


def write_eulerian(path: Path, table: EulerianTable) -> Path:
    """Eulerian table with columns t, r, rho, u_radial."""
    rows = (
        {"t": table.t, "r": r, "rho": rho, "u_radial": u}
        for r, rho, u in zip(table.r, table.rho, table.u)
    )
    return write_csv(path, EULERIAN_COLUMNS, rows)


def write_timeseries(
    path: Path, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]
) -> Path:
    """Diagnostics time series, one row per snapshot."""
    return write_csv(path, columns, rows)


def raster_columns(theorem: Theorem) -> List[str]:
    """Header of a regime raster: fixed prefix plus one slack column per case."""
    return list(RASTER_PREFIX) + [f"slack_{case}" for case in CASES[Theorem(theorem)]]


def raster_rows(theorem: Theorem, verdicts: Iterable[Iterable[RegimeVerdict]]) -> List[dict]:
    """Flatten a sweep raster row by row; slack_<case> is the smallest slack of that case."""
    rows = []
    for line in verdicts:
        for verdict in line:
            row = {
                "alpha": verdict.alpha,
                "beta": verdict.beta,
                "gamma": verdict.gamma,
                "theorem": verdict.theorem.value,
                "matched_cases": ";".join(verdict.matched_cases),
            }
            for case in CASES[Theorem(theorem)]:
                row[f"slack_{case}"] = verdict.case_slack_min(case)
            rows.append(row)
    return rows


def write_raster(
    path: Path, theorem: Theorem, verdicts: Iterable[Iterable[RegimeVerdict]]
) -> Path:
    """Regime raster CSV; an empty raster still carries the header."""
    return write_csv(path, raster_columns(theorem), raster_rows(theorem, verdicts))


def render_summary(context: Mapping[str, Any], template: Optional[str] = None) -> str:
    """Human readable run report rendered from the packaged template."""
    environment = Environment(
        loader=FileSystemLoader(str(TEMPLATES_DIR)),
        undefined=StrictUndefined,
        keep_trailing_newline=True,
    )
    environment.filters["real"] = _real
    return environment.get_template(template or SUMMARY_TEMPLATE).render(**context)


def _real(value: Any, digits: int = 6) -> str:
    if value is None:
        return "n/a"
    return f"{float(value):.{digits}g}"


def write_summary_text(path: Path, context: Mapping[str, Any]) -> Path:
    """Render the run report into a file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_summary(context))
    logger.debug(f"Wrote {path}")
    return path
