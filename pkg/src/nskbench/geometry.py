# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Lagrangian mass grid, discrete state and the Eulerian <-> Lagrangian maps.

The mass coordinate of a radius r is ``h(r) = int_a^r z^m rho0(z) dz``. Along a
solution the radius of a mass particle obeys ``d(r^{m+1})/dx = (m+1) v``, which
is integrated here with the composite trapezoid rule so that ``r(0) = a``
holds exactly.
"""

import dataclasses
import logging
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad
from scipy.interpolate import PchipInterpolator

from nskbench.exceptions import DomainError
from nskbench.model import ModelParams, require_positive

logger = logging.getLogger(__name__)

DEFAULT_QUAD_TOL = 1e-12


@dataclasses.dataclass(frozen=True)
class RadialGrid:
    """Uniform mass grid x_i = i * dx on [0, x_max]."""

    n: int
    x_max: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise DomainError(f"Grid needs at least 3 nodes, got {self.n}")
        if not self.x_max > 0:
            raise DomainError(f"Grid truncation x_max must be positive, got {self.x_max}")

    @property
    def dx(self) -> float:
        """Uniform spacing."""
        return self.x_max / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        """Node coordinates, x_0 = 0 and x_{n-1} = x_max."""
        return np.arange(self.n) * self.dx

    def refined(self) -> "RadialGrid":
        """Grid with half the spacing on the same interval."""
        return RadialGrid(n=2 * self.n - 1, x_max=self.x_max)


def _frozen_copy(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclasses.dataclass(frozen=True)
class State:
    """Specific volume v, velocity u and cached radius r at time t.

    Arrays are copied on construction and made read-only, so a State can be
    handed to observers without further copying.
    """

    t: float
    v: np.ndarray
    u: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        for name in ("v", "u", "r"):
            object.__setattr__(self, name, _frozen_copy(getattr(self, name)))
        if not (self.v.shape == self.u.shape == self.r.shape) or self.v.ndim != 1:
            raise DomainError(
                f"State fields must be 1-d arrays of equal length, got "
                f"{self.v.shape}, {self.u.shape}, {self.r.shape}"
            )

    @classmethod
    def build(
        cls, v, u, grid: RadialGrid, params: ModelParams, t: float = 0.0
    ) -> "State":
        """Create a state and reconstruct its radius from v."""
        v = np.asarray(v, dtype=float)
        if v.shape != (grid.n,):
            raise DomainError(f"Field of length {v.shape} does not match grid with {grid.n} nodes")
        return cls(t=t, v=v, u=u, r=radius_from_state(v, grid, params))

    @property
    def n(self) -> int:
        """Number of nodes."""
        return self.v.shape[0]


def mass_coordinate(
    r: Union[float, np.ndarray],
    rho0: Callable[[float], float],
    params: ModelParams,
    quad_tol: float = DEFAULT_QUAD_TOL,
) -> Union[float, np.ndarray]:
    """Return h(r) = int_a^r z^m rho0(z) dz by adaptive quadrature.

    Raises:
        DomainError: if r < a or rho0 is not positive at the integration ends.
    """
    radii = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(radii < params.a):
        raise DomainError(f"Radius {radii.min()} lies inside the inner boundary a={params.a}")
    m = params.m

    def integrand(z: float) -> float:
        return z**m * rho0(z)

    values = np.empty_like(radii)
    for index, radius in enumerate(radii):
        if radius == params.a:
            values[index] = 0.0
            continue
        if rho0(params.a) <= 0 or rho0(radius) <= 0:
            raise DomainError(f"Initial density must be positive on [{params.a}, {radius}]")
        values[index], _ = quad(
            integrand, params.a, radius, epsabs=quad_tol, epsrel=1e-13, limit=200
        )
    if np.ndim(r) == 0:
        return float(values[0])
    return values


def radius_from_state(v: np.ndarray, grid: RadialGrid, params: ModelParams) -> np.ndarray:
    """Reconstruct r from v by trapezoid integration of d(r^{m+1})/dx = (m+1) v.

    Raises:
        DomainError: if v is not positive or the radius fails to increase.
    """
    require_positive(v)
    q = params.m + 1
    volume = cumulative_trapezoid(np.asarray(v, dtype=float), dx=grid.dx, initial=0.0)
    r = (params.a**q + q * volume) ** (1.0 / q)
    r[0] = params.a
    if not np.all(np.diff(r) > 0):
        raise DomainError("Reconstructed radius is not strictly increasing")
    return r


@dataclasses.dataclass(frozen=True)
class EulerianTable:
    """Eulerian sampling (r, rho, u) of a state, one row per mass node."""

    t: float
    r: np.ndarray
    rho: np.ndarray
    u: np.ndarray


def to_eulerian(state: State, grid: RadialGrid, params: ModelParams) -> EulerianTable:
    """Sample a Lagrangian state at the radii of its mass nodes; rho = 1 / v."""
    if state.n != grid.n:
        raise DomainError(f"State with {state.n} nodes does not match grid with {grid.n} nodes")
    return EulerianTable(t=state.t, r=np.array(state.r), rho=1.0 / state.v, u=np.array(state.u))


def eulerian_mass_coordinates(table: EulerianTable, params: ModelParams) -> np.ndarray:
    """Mass coordinates of the table radii.

    Uses the exact inverse of the trapezoid radius recursion, so a table
    produced by to_eulerian maps back onto its own grid nodes.
    """
    r = np.asarray(table.r, dtype=float)
    if r.ndim != 1 or r.shape[0] < 2:
        raise DomainError("Eulerian table needs at least two radii")
    if not np.all(np.diff(r) > 0):
        raise DomainError("Eulerian radius table must be strictly increasing")
    if abs(r[0] - params.a) > 1e-12 * max(1.0, params.a):
        raise DomainError(
            f"Eulerian table must start at the inner boundary a={params.a}, got {r[0]}"
        )
    require_positive(table.rho, "density")
    q = params.m + 1
    v = 1.0 / np.asarray(table.rho, dtype=float)
    increments = np.diff(r**q) / (q * 0.5 * (v[1:] + v[:-1]))
    return np.concatenate(([0.0], np.cumsum(increments)))


def from_eulerian(
    table: EulerianTable, params: ModelParams, grid: Optional[RadialGrid] = None
) -> State:
    """Map an Eulerian table back onto a uniform mass grid.

    v and u are resampled with monotone piecewise cubic interpolation in the
    mass coordinate. Without a grid the table length and total mass define one.

    Raises:
        DomainError: if the radii are not increasing or the grid exceeds the table.
    """
    x_table = eulerian_mass_coordinates(table, params)
    if grid is None:
        grid = RadialGrid(n=len(x_table), x_max=float(x_table[-1]))
    elif grid.x_max > x_table[-1] * (1.0 + 1e-12):
        raise DomainError(
            f"Grid extends to x={grid.x_max} beyond the table mass {x_table[-1]}"
        )
    nodes = np.minimum(grid.nodes, x_table[-1])
    v = PchipInterpolator(x_table, 1.0 / np.asarray(table.rho, dtype=float))(nodes)
    u = PchipInterpolator(x_table, np.asarray(table.u, dtype=float))(nodes)
    logger.debug(f"Resampled Eulerian table of {len(x_table)} rows onto {grid.n} mass nodes")
    return State.build(v, u, grid, params, t=table.t)
