# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Explicit time integration, step-size control and the run loop."""

import dataclasses
import logging
import math
from typing import Callable, Optional, Protocol, Sequence, Tuple

import numpy as np

from nskbench.exceptions import (
    DomainError,
    DtUnderflowFault,
    NonFiniteFault,
    PositivityFault,
    SimulationFault,
    Termination,
)
from nskbench.geometry import RadialGrid, State, radius_from_state
from nskbench.model import ModelParams, power, stress_coefficient
from nskbench.spatial import rhs

logger = logging.getLogger(__name__)

Fields = Tuple[np.ndarray, ...]
Forcing = Callable[[float], Tuple[np.ndarray, np.ndarray]]


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Run horizon, step-size controller and positivity settings."""

    t_end: float = 1.0
    cfl_visc: float = 0.4
    cfl_cap: float = 0.25
    dt_min: float = 1e-12
    dt_init: float = 1e-3
    dt_max: float = 1e-2
    dt_fixed: Optional[float] = None
    v_floor: float = 1e-8
    snapshot_every: int = 100

    def __post_init__(self):
        if not self.t_end >= 0:
            raise DomainError(f"t_end must be non-negative, got {self.t_end}")
        for name in ("cfl_visc", "cfl_cap"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise DomainError(f"{name} must lie in (0, 1], got {value}")
        for name in ("dt_min", "dt_init", "dt_max", "v_floor"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")
        if self.dt_min > self.dt_init:
            raise DomainError(f"dt_min={self.dt_min} exceeds dt_init={self.dt_init}")
        if self.dt_fixed is not None and not self.dt_fixed > 0:
            raise DomainError(f"dt_fixed must be positive, got {self.dt_fixed}")
        if self.snapshot_every < 1:
            raise DomainError(f"snapshot_every must be at least 1, got {self.snapshot_every}")


@dataclasses.dataclass(frozen=True)
class RunSummary:
    """End-of-run report."""

    termination: Termination
    steps: int
    v_min_global: float
    v_max_global: float
    final_time: float
    message: str = ""

    def to_dict(self) -> dict:
        """Plain dictionary suitable for JSON output."""
        summary = dataclasses.asdict(self)
        summary["termination"] = self.termination.value
        summary["exit_code"] = self.termination.exit_code
        return summary


class DiagnosticsSink(Protocol):
    """Observer of the run loop.

    ``observe`` is called after every accepted step (and once with step 0 and
    dt 0 for the initial state); ``snapshot`` at the configured cadence and
    for the final state. Calls are synchronous and states are read-only.
    """

    def observe(self, step: int, state: State, dt: float) -> None:
        ...  # pragma: no cover

    def snapshot(self, step: int, state: State) -> None:
        ...  # pragma: no cover


class NullSink:
    """Sink that ignores everything."""

    def observe(self, step: int, state: State, dt: float) -> None:
        return None

    def snapshot(self, step: int, state: State) -> None:
        return None


def rk4(
    derivative: Callable[[float, Fields], Fields],
    fields: Fields,
    dt: float,
    t: float = 0.0,
    project: Optional[Callable[[Fields], Fields]] = None,
) -> Fields:
    """Classical four-stage Runge-Kutta step.

    Args:
        derivative: f(t, fields) returning one slope per field.
        fields: values at time t.
        dt: step size, may be negative to step backwards.
        t: time of the initial values.
        project: applied to every stage value and to the result, used to
            re-impose boundary conditions.

    Returns:
        the fields at t + dt.
    """
    if project is None:

        def project(values: Fields) -> Fields:
            return values

    def advance(slopes: Fields, h: float) -> Fields:
        return project(tuple(base + h * slope for base, slope in zip(fields, slopes)))

    k1 = derivative(t, fields)
    k2 = derivative(t + 0.5 * dt, advance(k1, 0.5 * dt))
    k3 = derivative(t + 0.5 * dt, advance(k2, 0.5 * dt))
    k4 = derivative(t + dt, advance(k3, dt))
    combined = tuple(
        (a + 2.0 * b + 2.0 * c + d) / 6.0 for a, b, c, d in zip(k1, k2, k3, k4)
    )
    return advance(combined, dt)


def impose_boundary(fields: Fields) -> Fields:
    """Set u = 0 at both ends and v = 1 at the far field."""
    v, u = (np.array(values, dtype=float) for values in fields)
    v[-1] = 1.0
    u[0] = 0.0
    u[-1] = 0.0
    return v, u


def _require_finite(fields: Sequence[np.ndarray], when: str) -> None:
    if not all(np.all(np.isfinite(values)) for values in fields):
        raise NonFiniteFault(f"Non-finite value in {when}")


def step(
    state: State,
    grid: RadialGrid,
    params: ModelParams,
    dt: float,
    forcing: Optional[Forcing] = None,
    v_floor: float = RunConfig.v_floor,
) -> State:
    """Advance the state by one RK4 step of size dt.

    The radius stays frozen at its value from the start of the step and is
    rebuilt from the new specific volume afterwards.

    Args:
        state: state at the start of the step.
        grid: mass grid.
        params: model parameters.
        dt: step size.
        forcing: optional source terms f(t) -> (s_v, s_u) added to the rhs.
        v_floor: smallest specific volume accepted at the end of the step.

    Raises:
        NonFiniteFault: if any stage or the result is not finite.
        PositivityFault: if v drops to or below zero in a stage or below v_floor at the end.
    """
    if not dt > 0:
        raise DomainError(f"Step size must be positive, got {dt}")

    def derivative(t: float, fields: Fields) -> Fields:
        _require_finite(fields, f"Runge-Kutta stage at t={t}")
        stage = State(t=t, v=fields[0], u=fields[1], r=state.r)
        try:
            dv, du = rhs(stage, grid, params)
        except DomainError as error:
            raise NonFiniteFault(f"Runge-Kutta stage at t={t} blew up: {error.msg}") from error
        if forcing is not None:
            source_v, source_u = forcing(t)
            dv, du = dv + source_v, du + source_u
        return dv, du

    v, u = rk4(derivative, (state.v, state.u), dt, t=state.t, project=impose_boundary)
    _require_finite((v, u), f"step ending at t={state.t + dt}")
    if v.min() < v_floor:
        raise PositivityFault(f"Specific volume {v.min()} fell below v_floor={v_floor}")
    try:
        r = radius_from_state(v, grid, params)
    except DomainError as error:
        raise NonFiniteFault(
            f"Radius reconstruction failed at t={state.t + dt}: {error.msg}"
        ) from error
    return State(t=state.t + dt, v=v, u=u, r=r)


def stable_dt(
    state: State, grid: RadialGrid, params: ModelParams, config: Optional[RunConfig] = None
) -> float:
    """Largest step the controller allows for this state.

    The viscous limit uses max (2 mu + lambda) r^{2m} / v, the capillary limit
    the dispersion frequency sqrt(max r^{4m} v^{-(beta+5)}) / dx^2.
    """
    config = config or RunConfig()
    dx2 = grid.dx * grid.dx
    r2m = power(state.r, 2 * params.m)
    viscous = float(np.max(np.abs(stress_coefficient(state.v, params)) * r2m))
    capillary = float(np.max(r2m * r2m * power(state.v, -(params.beta + 5.0))))
    limits = [config.dt_max, config.cfl_cap * dx2 / math.sqrt(capillary)]
    if viscous > 0:
        limits.append(config.cfl_visc * dx2 / viscous)
    return min(limits)


def _next_dt(
    state: State, grid: RadialGrid, params: ModelParams, config: RunConfig, steps: int
) -> float:
    remaining = config.t_end - state.t
    if config.dt_fixed is not None:
        return min(config.dt_fixed, remaining)
    dt = stable_dt(state, grid, params, config)
    if dt < config.dt_min:
        raise DtUnderflowFault(
            f"Stable step {dt} fell below dt_min={config.dt_min} at t={state.t}"
        )
    if steps == 0:
        dt = min(dt, config.dt_init)
    return min(dt, remaining)


def run(
    initial: State,
    grid: RadialGrid,
    params: ModelParams,
    config: RunConfig,
    sink: Optional[DiagnosticsSink] = None,
) -> RunSummary:
    """Integrate from the initial state to config.t_end.

    Faults do not propagate: they end the loop and become the termination
    reason of the returned summary. The last state reached is always passed to
    the sink as a snapshot.
    """
    sink = sink or NullSink()
    state = initial
    steps = 0
    last_snapshot = 0
    v_min, v_max = float(state.v.min()), float(state.v.max())
    termination, message = Termination.COMPLETED, ""
    tolerance = 1e-12 * max(1.0, config.t_end)

    logger.info(
        f"Starting {params.kind.value} run: n={grid.n}, x_max={grid.x_max}, t_end={config.t_end}"
    )
    sink.observe(0, state, 0.0)
    sink.snapshot(0, state)
    try:
        while config.t_end - state.t > tolerance:
            dt = _next_dt(state, grid, params, config, steps)
            state = step(state, grid, params, dt, v_floor=config.v_floor)
            steps += 1
            v_min = min(v_min, float(state.v.min()))
            v_max = max(v_max, float(state.v.max()))
            sink.observe(steps, state, dt)
            if steps % config.snapshot_every == 0:
                sink.snapshot(steps, state)
                last_snapshot = steps
    except SimulationFault as fault:
        termination, message = fault.status, fault.msg
        logger.error(f"Run stopped after {steps} steps at t={state.t}: {fault.msg}")

    if last_snapshot != steps:
        sink.snapshot(steps, state)
    logger.info(f"Run finished: {termination.value} after {steps} steps, t={state.t}")
    return RunSummary(
        termination=termination,
        steps=steps,
        v_min_global=v_min,
        v_max_global=v_max,
        final_time=state.t,
        message=message,
    )
