# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Conftest for the long acceptance runs."""

from pathlib import Path

import pytest

from nskbench.config import build_initial_state
from nskbench.geometry import RadialGrid
from nskbench.model import ModelKind, ModelParams

CONFIGS_DIR = Path(__file__).parents[2] / "configs"

# a = 2 keeps the ghost radius positive on the coarsest grids used here
ACCEPTANCE_X_MAX = 2.0
BUMP = {
    "v": {"kind": "gaussian-bump", "center": 0.0, "width": 0.5, "amplitude": 0.1},
    "u": {"kind": "gaussian-bump", "center": 1.0, "width": 0.3, "amplitude": 0.05},
}


@pytest.fixture(scope="session")
def configs_dir():
    """Directory of the sample configs shipped with the repository."""
    yield CONFIGS_DIR


@pytest.fixture()
def kazhikhov():
    """Parameters of the first Kazhikhov case on a wide inner boundary."""
    yield ModelParams(kind=ModelKind.KAZHIKHOV, alpha=0.0, beta=-2.5, gamma=1.4, a=2.0)


@pytest.fixture()
def density_dependent():
    """Density dependent parameters matching a T1.2 case."""
    yield ModelParams(
        kind=ModelKind.DENSITY_DEPENDENT, alpha=0.5, beta=-2.5, gamma=1.4, lambda_tilde=0.1, a=2.0
    )


@pytest.fixture()
def bump_run():
    """Yields a builder of (grid, initial state) pairs for the smooth bump."""

    def build(params, n):
        grid = RadialGrid(n=n, x_max=ACCEPTANCE_X_MAX)
        return grid, build_initial_state(BUMP, grid, params)

    yield build
