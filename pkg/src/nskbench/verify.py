# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Manufactured-solution convergence studies and a brute-force rhs oracle.

A manufactured case prescribes exact (v, u) as closed-form functions of (t, x).
The forcing that makes the pair an exact solution is obtained by evaluating
the continuum right-hand side with sixth-order central differences of the
exact functions, nested once per derivative level.
"""

import dataclasses
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import comb

from nskbench.exceptions import DomainError, SimulationFault
from nskbench.geometry import RadialGrid, State
from nskbench.integrate import step, stable_dt
from nskbench.model import (
    ModelKind,
    ModelParams,
    power,
    pressure,
    pressure_derivative,
    stress_coefficient,
)
from nskbench.spatial import MIN_NODES, rhs

logger = logging.getLogger(__name__)

# weights of f'(x) ~ sum_k c_k (f(x + k h) - f(x - k h)) / h, sixth order
STENCIL_OFFSETS = np.array([1.0, 2.0, 3.0])
STENCIL_WEIGHTS = np.array([3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0])
SPACE_STEP = 4e-3
TIME_STEP = 1e-3

PRE_ASYMPTOTIC_NODES = 16
EXACT_ERROR = 1e-13
SPATIAL_BAND = (1.8, 2.2)
FULL_BAND = (1.7, math.inf)
BRUTE_FORCE_MAX_NODES = 64

Profile = Callable[[float, np.ndarray], np.ndarray]


@dataclasses.dataclass(frozen=True)
class ManufacturedCase:
    """Exact (v, u) pair and the mass integral of v.

    ``v_mass(t, x)`` must equal int_0^x v_exact(t, y) dy; it gives the exact
    radius. All callables act elementwise on arrays of any shape.
    """

    name: str
    v_exact: Profile
    u_exact: Profile
    v_mass: Profile

    def radius(self, t: float, x: np.ndarray, params: ModelParams) -> np.ndarray:
        """Exact radius (a^{m+1} + (m+1) int_0^x v)^{1/(m+1)}."""
        q = params.m + 1
        return (params.a**q + q * self.v_mass(t, x)) ** (1.0 / q)


def equilibrium_case() -> ManufacturedCase:
    """The rest state (1, 0)."""
    return ManufacturedCase(
        name="equilibrium",
        v_exact=lambda t, x: np.ones_like(np.asarray(x, dtype=float)),
        u_exact=lambda t, x: np.zeros_like(np.asarray(x, dtype=float)),
        v_mass=lambda t, x: np.asarray(x, dtype=float),
    )


def _cos_power_integral(x: np.ndarray, c: float, k: int) -> np.ndarray:
    """int_0^x cos^{2k}(c s) ds."""
    total = comb(2 * k, k, exact=True) * x
    for j in range(k):
        harmonic = k - j
        total = total + comb(2 * k, j, exact=True) * np.sin(2 * harmonic * c * x) / (harmonic * c)
    return total / 4.0**k


def bump_case(
    amplitude_v: float = 0.2,
    amplitude_u: float = 0.1,
    width: float = 3.0,
    frequency: float = 1.0,
) -> ManufacturedCase:
    """Compactly supported bumps, equal to (1, 0) for |x| >= width.

    v = 1 + A cos(w t) cos^10(pi x / (2 L)) and
    u = B cos(w t) sin(pi x / L) cos^8(pi x / (2 L)) inside |x| < L. v is even
    and u odd in x, so both inner boundary conditions hold for all t.
    """
    if not 0 <= amplitude_v < 1:
        raise DomainError(
            f"Bump amplitude must lie in [0, 1) to keep v positive, got {amplitude_v}"
        )
    if not width > 0:
        raise DomainError(f"Bump width must be positive, got {width}")
    c = math.pi / (2.0 * width)

    def inside(x: np.ndarray) -> np.ndarray:
        return np.abs(x) < width

    def v_exact(t: float, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        bump = np.where(inside(x), np.cos(c * x) ** 10, 0.0)
        return 1.0 + amplitude_v * np.cos(frequency * t) * bump

    def u_exact(t: float, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        bump = np.where(inside(x), np.sin(2.0 * c * x) * np.cos(c * x) ** 8, 0.0)
        return amplitude_u * np.cos(frequency * t) * bump

    def v_mass(t: float, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        clipped = np.clip(x, -width, width)
        return x + amplitude_v * np.cos(frequency * t) * _cos_power_integral(clipped, c, 5)

    return ManufacturedCase(name="bump", v_exact=v_exact, u_exact=u_exact, v_mass=v_mass)


def central_derivative(f: Callable[[np.ndarray], np.ndarray], h: float = SPACE_STEP):
    """Sixth-order central derivative of an elementwise function.

    The returned function appends one axis for the stencil offsets, so nested
    derivatives are evaluated in a single vectorised call per level.
    """

    def derivative(x: np.ndarray) -> np.ndarray:
        shifted = np.asarray(x, dtype=float)[..., np.newaxis]
        offsets = STENCIL_OFFSETS * h
        return np.sum(STENCIL_WEIGHTS * (f(shifted + offsets) - f(shifted - offsets)), axis=-1) / h

    return derivative


def continuum_rhs(
    case: ManufacturedCase, params: ModelParams, t: float, x: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Right-hand side of the Lagrangian system applied to the exact pair at time t."""
    m = params.m
    capillary = params.beta + 5.0

    def v(y):
        return case.v_exact(t, y)

    def u(y):
        return case.u_exact(t, y)

    def r(y):
        return case.radius(t, y, params)

    divergence = central_derivative(lambda y: power(r(y), m) * u(y))
    v_x = central_derivative(v)

    def capillary_flux(y):
        return power(r(y), 2 * m) * power(v(y), -capillary) * v_x(y)

    capillary_flux_x = central_derivative(capillary_flux)

    def flux(y):
        volume = v(y)
        slope = v_x(y)
        sigma = stress_coefficient(volume, params) * divergence(y)
        korteweg = 0.5 * capillary * power(r(y), 2 * m) * power(volume, -capillary - 1.0)
        return sigma - capillary_flux_x(y) - korteweg * slope * slope

    flux_x = central_derivative(flux)
    pressure_x = central_derivative(lambda y: pressure(v(y), params))

    x = np.asarray(x, dtype=float)
    volume, velocity, radius, slope = v(x), u(x), r(x), v_x(x)
    rm = power(radius, m)
    du = -rm * pressure_x(x) + rm * flux_x(x)
    if m:
        du = du - m * rm * rm / radius * power(volume, -capillary) * slope * slope
    if params.kind is ModelKind.DENSITY_DEPENDENT and m:
        du = du + (
            2.0 * m * params.mu_tilde * params.alpha
            * power(volume, -params.alpha - 1.0) * rm / radius * velocity * slope
        )
    return divergence(x), du


def time_derivative(
    case: ManufacturedCase, t: float, x: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Sixth-order central time derivative of the exact pair."""
    dv = np.zeros_like(np.asarray(x, dtype=float))
    du = np.zeros_like(dv)
    for offset, weight in zip(STENCIL_OFFSETS * TIME_STEP, STENCIL_WEIGHTS):
        dv = dv + weight * (case.v_exact(t + offset, x) - case.v_exact(t - offset, x))
        du = du + weight * (case.u_exact(t + offset, x) - case.u_exact(t - offset, x))
    return dv / TIME_STEP, du / TIME_STEP


def manufactured_sources(
    case: ManufacturedCase, params: ModelParams, t: float, x: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Forcing (s_v, s_u) = d/dt exact - rhs(exact)."""
    dv_dt, du_dt = time_derivative(case, t, x)
    dv, du = continuum_rhs(case, params, t, x)
    return dv_dt - dv, du_dt - du


@dataclasses.dataclass(frozen=True)
class MMSLevel:
    """Error of one refinement level."""

    n: int
    dx: float
    dt: Optional[float]
    error: float
    rate: Optional[float] = None


@dataclasses.dataclass(frozen=True)
class MMSReport:
    """Outcome of a convergence study.

    verdict is one of pass, fail, exact, insufficient-levels or fault.
    """

    kind: str
    case: str
    model: str
    dim: int
    levels: List[MMSLevel]
    order: Optional[float]
    verdict: str
    band: Tuple[float, float]
    message: str = ""

    @property
    def passed(self) -> bool:
        """Whether the study supports the expected order."""
        return self.verdict in ("pass", "exact")

    def to_dict(self) -> dict:
        """Plain dictionary for the JSON report."""
        report = dataclasses.asdict(self)
        report["band"] = [self.band[0], None if math.isinf(self.band[1]) else self.band[1]]
        report["passed"] = self.passed
        return report


def observed_order(dx: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(dx)."""
    logs = np.log(np.maximum(np.asarray(errors, dtype=float), np.finfo(float).tiny))
    return float(np.polyfit(np.log(np.asarray(dx, dtype=float)), logs, 1)[0])


def _with_rates(levels: List[MMSLevel]) -> List[MMSLevel]:
    rated = levels[:1]
    for previous, level in zip(levels, levels[1:]):
        rate = None
        if previous.error > 0 and level.error > 0:
            rate = math.log(previous.error / level.error) / math.log(previous.dx / level.dx)
        rated.append(dataclasses.replace(level, rate=rate))
    return rated


def _judge(
    kind: str,
    case: ManufacturedCase,
    params: ModelParams,
    levels: List[MMSLevel],
    band: Tuple[float, float],
) -> MMSReport:
    levels = _with_rates(levels)
    report = dict(
        kind=kind,
        case=case.name,
        model=params.kind.value,
        dim=params.dim,
        levels=levels,
        band=band,
    )
    kept = [level for level in levels if level.n > PRE_ASYMPTOTIC_NODES]
    if levels and all(level.error <= EXACT_ERROR for level in levels):
        return MMSReport(order=None, verdict="exact", **report)
    if len(kept) < 3:
        return MMSReport(
            order=None,
            verdict="insufficient-levels",
            message=f"{len(kept)} levels above n={PRE_ASYMPTOTIC_NODES}, need 3",
            **report,
        )
    order = observed_order([level.dx for level in kept], [level.error for level in kept])
    verdict = "pass" if band[0] <= order <= band[1] else "fail"
    logger.info(f"{kind} order on {case.name} ({params.kind.value}, d={params.dim}): {order:.3f}")
    return MMSReport(order=order, verdict=verdict, **report)


def mms_spatial_order(
    case: ManufacturedCase,
    params: ModelParams,
    n_list: Sequence[int],
    x_max: float = 4.0,
    t: float = 0.0,
) -> MMSReport:
    """Truncation error of spatial.rhs against the forced continuum operator.

    Each level reports max |rhs(exact) + source - d/dt exact| over the nodes
    where the equations are solved: v on 0..n-2 and u on 1..n-2.
    """
    if list(n_list) != sorted(set(n_list)):
        raise DomainError(f"Node counts must be strictly increasing, got {list(n_list)}")
    levels = []
    for n in n_list:
        grid = RadialGrid(n=n, x_max=x_max)
        x = grid.nodes
        state = State.build(case.v_exact(t, x), case.u_exact(t, x), grid, params, t=t)
        dv, du = rhs(state, grid, params)
        source_v, source_u = manufactured_sources(case, params, t, x)
        dv_dt, du_dt = time_derivative(case, t, x)
        residual_v = np.abs(dv + source_v - dv_dt)[:-1]
        residual_u = np.abs(du + source_u - du_dt)[1:-1]
        error = float(max(residual_v.max(), residual_u.max()))
        logger.debug(f"Spatial level n={n}: residual {error:.3e}")
        levels.append(MMSLevel(n=n, dx=grid.dx, dt=None, error=error))
    return _judge("spatial", case, params, levels, SPATIAL_BAND)


def _forcing(case: ManufacturedCase, params: ModelParams, x: np.ndarray):
    cache: Dict[float, Tuple[np.ndarray, np.ndarray]] = {}

    def forcing(t: float) -> Tuple[np.ndarray, np.ndarray]:
        if t not in cache:
            cache.clear()
            cache[t] = manufactured_sources(case, params, t, x)
        return cache[t]

    return forcing


def _forced_error(
    case: ManufacturedCase, params: ModelParams, n: int, dt: float, t_end: float, x_max: float
) -> float:
    grid = RadialGrid(n=n, x_max=x_max)
    x = grid.nodes
    state = State.build(case.v_exact(0.0, x), case.u_exact(0.0, x), grid, params)
    forcing = _forcing(case, params, x)
    steps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    for _ in range(steps):
        state = step(state, grid, params, t_end / steps, forcing=forcing)
    return float(
        max(
            np.abs(state.v - case.v_exact(state.t, x)).max(),
            np.abs(state.u - case.u_exact(state.t, x)).max(),
        )
    )


def default_ladder(
    case: ManufacturedCase,
    params: ModelParams,
    n_list: Sequence[int],
    x_max: float = 4.0,
    safety: float = 0.5,
) -> List[Tuple[int, float]]:
    """Pair each n with dt proportional to dx^2, anchored on the finest grid's stable step."""
    finest = RadialGrid(n=max(n_list), x_max=x_max)
    x = finest.nodes
    state = State.build(case.v_exact(0.0, x), case.u_exact(0.0, x), finest, params)
    dt_finest = safety * stable_dt(state, finest, params)
    return [
        (n, dt_finest * (RadialGrid(n=n, x_max=x_max).dx / finest.dx) ** 2) for n in n_list
    ]


def mms_full_order(
    case: ManufacturedCase,
    params: ModelParams,
    ladder: Sequence[Tuple[int, float]],
    t_end: float = 0.01,
    x_max: float = 4.0,
) -> MMSReport:
    """Forced runs to t_end along an (n, dt) ladder; error is the max node error at t_end.

    A fault on any level ends the study with the verdict "fault".
    """
    levels = []
    for n, dt in ladder:
        try:
            error = _forced_error(case, params, n, dt, t_end, x_max)
        except SimulationFault as fault:
            logger.error(f"Forced run n={n}, dt={dt:.3e} faulted: {fault.msg}")
            return MMSReport(
                kind="full",
                case=case.name,
                model=params.kind.value,
                dim=params.dim,
                levels=_with_rates(levels),
                order=None,
                verdict="fault",
                band=FULL_BAND,
                message=fault.msg,
            )
        logger.info(f"Forced level n={n}, dt={dt:.3e}: error {error:.3e}")
        levels.append(MMSLevel(n=n, dx=x_max / (n - 1), dt=dt, error=error))
    return _judge("full", case, params, levels, FULL_BAND)


def brute_force_rhs(
    state: State, grid: RadialGrid, params: ModelParams
) -> Tuple[np.ndarray, np.ndarray]:
    """Expanded, non-conservative discretisation of the same equations.

    Every derivative of the flux form is expanded by the product and chain
    rules, using r_x = v / r^m, and evaluated with explicit wide stencils
    (first, second and third differences of half-width 1, 2 and 3). Only meant
    as an independent cross-check on small grids.

    The planar case (m = 0) is instead evaluated node by node with nested
    compact first differences of the flux form, so it reproduces the solver
    to rounding.

    Raises:
        DomainError: if the grid has more than BRUTE_FORCE_MAX_NODES nodes.
    """
    n = grid.n
    if n > BRUTE_FORCE_MAX_NODES:
        raise DomainError(f"Brute-force rhs is limited to {BRUTE_FORCE_MAX_NODES} nodes, got {n}")
    if n < MIN_NODES or state.n != n:
        raise DomainError(f"Brute-force rhs needs a state on a grid of at least {MIN_NODES} nodes")
    dx = grid.dx
    m = params.m
    b = params.beta
    alpha = params.alpha

    pad = 3
    v_pad = np.concatenate((np.pad(state.v, (pad, 0), mode="reflect"), np.ones(pad)))
    u_pad = np.concatenate(
        (np.pad(state.u, (pad, 0), mode="reflect", reflect_type="odd"), np.zeros(pad))
    )
    if m == 0:
        return _planar_brute_force(v_pad, u_pad, n, dx, params)
    j = np.arange(n) + pad

    def d1(f):
        return (f[j + 1] - f[j - 1]) / (2.0 * dx)

    def d2(f):
        return (f[j + 2] - 2.0 * f[j] + f[j - 2]) / (4.0 * dx**2)

    def d3(f):
        return (f[j + 3] - 3.0 * f[j + 1] + 3.0 * f[j - 1] - f[j - 3]) / (8.0 * dx**3)

    v, u, r = state.v, state.u, state.r
    v_x, v_xx, v_xxx = d1(v_pad), d2(v_pad), d3(v_pad)
    u_x, u_xx = d1(u_pad), d2(u_pad)
    rm = r**m
    r2m = rm * rm

    k = v ** -(b + 5.0)
    k1 = -(b + 5.0) * v ** -(b + 6.0)
    k2 = (b + 5.0) * (b + 6.0) * v ** -(b + 7.0)
    c = 0.5 * (b + 5.0)
    jv = v ** -(b + 6.0)
    jv1 = -(b + 6.0) * v ** -(b + 7.0)

    if params.kind is ModelKind.KAZHIKHOV:
        coefficient = 2.0 * params.mu_tilde / v + params.lambda_tilde * v ** -(alpha + 1.0)
        coefficient_v = (
            -2.0 * params.mu_tilde / v**2
            - (alpha + 1.0) * params.lambda_tilde * v ** -(alpha + 2.0)
        )
    else:
        total = 2.0 * params.mu_tilde + params.lambda_tilde
        coefficient = total * v ** -(alpha + 1.0)
        coefficient_v = -(alpha + 1.0) * total * v ** -(alpha + 2.0)

    w = m * v * u / r + rm * u_x
    w_x = (
        m * (v_x * u + v * u_x) / r
        - m * v**2 * u / r ** (m + 2)
        + m * v * u_x / r
        + rm * u_xx
    )
    stress_x = coefficient_v * v_x * w + coefficient * w_x

    g_xx = (
        2.0 * m * (m - 1) * v**2 * k * v_x / r**2
        + 2.0 * m * r ** (m - 1) * (k * v_x**2 + v * k1 * v_x**2 + v * k * v_xx)
        + 2.0 * m * r ** (m - 1) * v * (k1 * v_x**2 + k * v_xx)
        + r2m * (k2 * v_x**3 + 3.0 * k1 * v_x * v_xx + k * v_xxx)
    )
    h_x = c * (
        2.0 * m * r ** (m - 1) * v * jv * v_x**2 + r2m * (jv1 * v_x**3 + 2.0 * jv * v_x * v_xx)
    )

    du = (
        -rm * pressure_derivative(v, params) * v_x
        + rm * (stress_x - g_xx - h_x)
        - m * r ** (2 * m - 1) * k * v_x**2
    )
    if params.kind is ModelKind.DENSITY_DEPENDENT:
        du = du + 2.0 * m * params.mu_tilde * alpha * v ** -(alpha + 1.0) * r ** (m - 1) * u * v_x
    dv = np.array(w)

    du[0] = 0.0
    du[-1] = 0.0
    dv[-1] = 0.0
    return dv, du


def _planar_brute_force(
    v: np.ndarray, u: np.ndarray, n: int, dx: float, params: ModelParams
) -> Tuple[np.ndarray, np.ndarray]:
    """Scalar loop over the planar flux form on ghost-padded v and u."""
    b5 = params.beta + 5.0
    alpha = params.alpha
    if params.kind is ModelKind.KAZHIKHOV:

        def coefficient(value):
            return 2.0 * params.mu_tilde / value + params.lambda_tilde * value ** -(alpha + 1.0)

    else:

        def coefficient(value):
            return (2.0 * params.mu_tilde + params.lambda_tilde) * value ** -(alpha + 1.0)

    def diff(f, k):
        return (f[k + 1] - f[k - 1]) / (2.0 * dx)

    def korteweg(k):
        return v[k] ** -b5 * diff(v, k)

    def flux(k):
        stress = coefficient(v[k]) * diff(u, k)
        capillary = 0.5 * b5 * v[k] ** -b5 / v[k] * diff(v, k) ** 2
        return stress - (korteweg(k + 1) - korteweg(k - 1)) / (2.0 * dx) - capillary

    pad = 3
    dv = np.zeros(n)
    du = np.zeros(n)
    for i in range(n):
        k = i + pad
        pressure_x = (v[k + 1] ** -params.gamma - v[k - 1] ** -params.gamma) / (2.0 * dx)
        du[i] = -pressure_x + (flux(k + 1) - flux(k - 1)) / (2.0 * dx)
        dv[i] = diff(u, k)
    du[0] = 0.0
    du[-1] = 0.0
    dv[-1] = 0.0
    return dv, du
