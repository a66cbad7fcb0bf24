# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Shared fixtures of the unit tests."""

import numpy as np
import pytest

from nskbench.geometry import RadialGrid, State
from nskbench.model import ModelKind, ModelParams


def bump_fields(x: np.ndarray, amplitude_v: float = 0.2, amplitude_u: float = 0.1, width=0.8):
    """Smooth even v and odd u that decay to the far field (1, 0)."""
    shape = np.exp(-((x / width) ** 2))
    v = 1.0 + amplitude_v * shape
    u = amplitude_u * x * shape
    u[0] = 0.0
    u[-1] = 0.0
    v[-1] = 1.0
    return v, u


@pytest.fixture()
def make_bump():
    """Yields the bump factory for tests that need their own grid."""
    yield bump_fields


@pytest.fixture()
def kazhikhov_params() -> ModelParams:
    """Yields the Kazhikhov model at (0, -2.5, 1.4), inside the first case."""
    yield ModelParams(kind=ModelKind.KAZHIKHOV, alpha=0.0, beta=-2.5, gamma=1.4)


@pytest.fixture()
def density_params() -> ModelParams:
    """Yields the density dependent model at (0.5, -2.5, 1.4)."""
    yield ModelParams(
        kind=ModelKind.DENSITY_DEPENDENT, alpha=0.5, beta=-2.5, gamma=1.4, lambda_tilde=0.1
    )


@pytest.fixture()
def grid() -> RadialGrid:
    """Yields a grid fine enough for the ghost radius at a = 1."""
    yield RadialGrid(n=129, x_max=4.0)


@pytest.fixture()
def equilibrium_state(grid, kazhikhov_params) -> State:
    """Yields the rest state (1, 0)."""
    yield State.build(np.ones(grid.n), np.zeros(grid.n), grid, kazhikhov_params)


@pytest.fixture()
def bump_state(grid, kazhikhov_params) -> State:
    """Yields a small Gaussian perturbation of the rest state."""
    v, u = bump_fields(grid.nodes)
    yield State.build(v, u, grid, kazhikhov_params)
