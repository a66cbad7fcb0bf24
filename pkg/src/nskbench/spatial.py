# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Discrete right-hand side of the Lagrangian NSK system.

The momentum equation is kept in flux-divergence form::

    u_t = -r^m D(p) + r^m D(F) + S
    F   = sigma - D(G) - H
    G   = r^{2m} v^{-(beta+5)} D(v)
    H   = (beta+5)/2 r^{2m} v^{-(beta+6)} D(v)^2

with ``sigma`` the viscous stress, ``S`` the non-divergence terms and ``D`` the
centered first difference. ``D(F)`` reaches three nodes to each side, so the
fields are padded with ``GHOST_LAYERS`` ghost nodes: even reflection of v and
odd reflection of u at x = 0, the far field (1, 0) past x_max.
"""

import logging
from typing import Tuple

import numpy as np

from nskbench.exceptions import DomainError, PositivityFault
from nskbench.geometry import RadialGrid, State
from nskbench.model import ModelKind, ModelParams, power, pressure, stress_coefficient

logger = logging.getLogger(__name__)

GHOST_LAYERS = 3
MIN_NODES = 5


def centered_difference(f: np.ndarray, dx: float) -> np.ndarray:
    """Second-order centered first difference; the result is one node shorter at each end."""
    return (f[2:] - f[:-2]) / (2.0 * dx)


def ghost_fill(state: State, grid: RadialGrid) -> Tuple[np.ndarray, np.ndarray]:
    """Pad v and u with GHOST_LAYERS ghost nodes on each side.

    Index GHOST_LAYERS + i of the returned arrays holds node i.
    """
    g = GHOST_LAYERS
    v = np.asarray(state.v)
    u = np.asarray(state.u)
    v_ext = np.concatenate((v[g:0:-1], v, np.ones(g)))
    u_ext = np.concatenate((-u[g:0:-1], [0.0], u[1:], np.zeros(g)))
    return v_ext, u_ext


def extend_radius(
    state: State, v_ext: np.ndarray, grid: RadialGrid, params: ModelParams
) -> np.ndarray:
    """Continue the trapezoid recursion for r^{m+1} into the ghost nodes."""
    g = GHOST_LAYERS
    q = params.m + 1
    step = 0.5 * q * grid.dx * (v_ext[1:] + v_ext[:-1])
    inner = state.r[0] ** q - np.cumsum(step[g - 1 :: -1])[:g]
    outer = state.r[-1] ** q + np.cumsum(step[-g:])
    if np.any(inner <= 0):
        raise DomainError("Ghost radius collapsed below zero; refine the grid or enlarge a")
    return np.concatenate((inner[::-1] ** (1.0 / q), state.r, outer ** (1.0 / q)))


def extended_fields(
    state: State, grid: RadialGrid, params: ModelParams
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Ghost-padded (v, u, r)."""
    v_ext, u_ext = ghost_fill(state, grid)
    return v_ext, u_ext, extend_radius(state, v_ext, grid, params)


def volume_derivatives(
    state: State, grid: RadialGrid, params: ModelParams
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(D v, D D v, D D D v) at the nodes, with the solver's ghost closure."""
    g = GHOST_LAYERS
    v_ext, _ = ghost_fill(state, grid)
    first = centered_difference(v_ext, grid.dx)
    second = centered_difference(first, grid.dx)
    third = centered_difference(second, grid.dx)
    return first[g - 1 : 1 - g], second[g - 2 : 2 - g], third


def _check_state(state: State, grid: RadialGrid) -> None:
    if grid.n < MIN_NODES:
        raise DomainError(f"Spatial operator needs at least {MIN_NODES} nodes, got {grid.n}")
    if state.n != grid.n:
        raise DomainError(f"State with {state.n} nodes does not match grid with {grid.n} nodes")
    if not (np.all(np.isfinite(state.u)) and np.all(np.isfinite(state.r))):
        raise DomainError("State contains non-finite velocity or radius")
    if np.any(np.isnan(state.v)):
        raise DomainError("State contains NaN specific volume")
    if np.any(state.v <= 0):
        raise PositivityFault(f"Specific volume reached {state.v.min()} <= 0")


def rhs(state: State, grid: RadialGrid, params: ModelParams) -> Tuple[np.ndarray, np.ndarray]:
    """Time derivatives (dv/dt, du/dt) at the nodes.

    The radius is taken from the state as is. The velocity at both ends and the
    far-field specific volume are Dirichlet data and get zero time derivative.

    Raises:
        PositivityFault: if v is not strictly positive.
        DomainError: if the state has NaN entries or does not match the grid.
    """
    _check_state(state, grid)
    g = GHOST_LAYERS
    dx = grid.dx
    m = params.m
    capillary = params.beta + 5.0

    v_ext, u_ext, r_ext = extended_fields(state, grid, params)
    rm_ext = power(r_ext, m)
    r2m_ext = rm_ext * rm_ext

    # nodes -2 .. n+1
    inner = slice(1, -1)
    v_x = centered_difference(v_ext, dx)
    w = centered_difference(rm_ext * u_ext, dx)
    weight = r2m_ext[inner] * power(v_ext[inner], -capillary)
    flux_g = weight * v_x
    flux_h = 0.5 * capillary * weight / v_ext[inner] * v_x * v_x

    # nodes -1 .. n
    sigma = stress_coefficient(v_ext[2:-2], params) * w[1:-1]
    flux = sigma - centered_difference(flux_g, dx) - flux_h[1:-1]

    # nodes 0 .. n-1
    nodes = slice(g, -g)
    v = v_ext[nodes]
    u = u_ext[nodes]
    r = r_ext[nodes]
    rm = rm_ext[nodes]
    v_x_nodes = v_x[g - 1 : 1 - g]
    p_x = centered_difference(pressure(v_ext, params), dx)[g - 1 : 1 - g]

    du = -rm * p_x + rm * centered_difference(flux, dx)
    if m:
        du -= m * r2m_ext[nodes] / r * power(v, -capillary) * v_x_nodes * v_x_nodes
    if params.kind is ModelKind.DENSITY_DEPENDENT and m:
        du += (
            2.0 * m * params.mu_tilde * params.alpha
            * power(v, -params.alpha - 1.0) * rm / r * u * v_x_nodes
        )
    dv = np.array(w[g - 1 : 1 - g])

    du[0] = 0.0
    du[-1] = 0.0
    dv[-1] = 0.0
    return dv, du
