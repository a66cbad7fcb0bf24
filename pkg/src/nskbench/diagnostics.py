# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Functionals of the a priori estimate chain, evaluated on discrete states.

All spatial quadratures are composite trapezoid on the solver grid and every
derivative uses the ghost closure of :mod:`nskbench.spatial`, so the energy
ledger compares like with like.
"""

import dataclasses
import logging
import math
from typing import Callable, Dict, List, NamedTuple, Optional, Set, Tuple

import numpy as np
from scipy.integrate import quad, trapezoid
from scipy.optimize import brentq

from nskbench.exceptions import DomainError
from nskbench.geometry import RadialGrid, State
from nskbench.model import (
    ArrayLike,
    ModelKind,
    ModelParams,
    power,
    pressure,
    require_positive,
    stress_coefficient,
)
from nskbench.spatial import GHOST_LAYERS, centered_difference, extended_fields, volume_derivatives

logger = logging.getLogger(__name__)

# log-volume reach of the Kanel inversion, |ln v| <= 700 stays inside double range
MAX_LOG_VOLUME = 700.0

MONITORED_INTEGRALS = (
    "vx2_v2a2",
    "vx2_va2",
    "vx2_vag2",
    "vxx2_weighted",
    "capillary_composite",
)

TIMESERIES_COLUMNS = (
    "step",
    "t",
    "E",
    "D_cum",
    "boundary_leak",
    "defect",
    "v_min",
    "v_max",
    "kanel_lower",
    "kanel_upper",
    "norm_v_minus_1_H1",
    "norm_u_H1",
    "norm_vx_1r",
) + tuple(f"acc_{name}" for name in MONITORED_INTEGRALS)


def phi(v: ArrayLike, gamma: float) -> ArrayLike:
    """Relative entropy Phi(v) = int_1^v (p(1) - p(s)) ds in closed form.

    Raises:
        DomainError: if any v is not strictly positive.
    """
    require_positive(v)
    values = np.asarray(v, dtype=float)
    if gamma == 1:
        result = (values - 1.0) - np.log(values)
    else:
        result = (values - 1.0) + (power(values, 1.0 - gamma) - 1.0) / (gamma - 1.0)
    if np.ndim(result) == 0:
        return float(result)
    return result


def psi(v: ArrayLike) -> ArrayLike:
    """Lower comparison function (1 - v)^2 / (1 + v)."""
    require_positive(v)
    values = np.asarray(v, dtype=float)
    result = (1.0 - values) ** 2 / (1.0 + values)
    if np.ndim(result) == 0:
        return float(result)
    return result


class PsiPhiConstants(NamedTuple):
    """Empirical constants relating Phi and Psi on a sampled range of v."""

    c0: float
    c_psi: float


def psi_phi_constants(
    gamma: float, v_range: Tuple[float, float] = (0.05, 20.0), samples: int = 4001
) -> PsiPhiConstants:
    """Return c0 = min rho Phi / Psi and C_Psi = max Psi / Phi over v_range.

    Nodes within 1e-6 of v = 1, where both functions vanish, are skipped.
    """
    lower, upper = v_range
    if not 0 < lower < upper:
        raise DomainError(f"Invalid v range {v_range}")
    v = np.geomspace(lower, upper, samples)
    v = v[np.abs(v - 1.0) > 1e-6]
    entropy = phi(v, gamma)
    comparison = psi(v)
    return PsiPhiConstants(
        c0=float(np.min(entropy / (v * comparison))),
        c_psi=float(np.max(comparison / entropy)),
    )


def _node_derivatives(
    state: State, grid: RadialGrid, params: ModelParams
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(v_x, (r^m u)_x, u_x) at the nodes with the solver's ghost closure."""
    g = GHOST_LAYERS
    v_ext, u_ext, r_ext = extended_fields(state, grid, params)
    rm_ext = power(r_ext, params.m)
    nodes = slice(g - 1, 1 - g)
    v_x = centered_difference(v_ext, grid.dx)[nodes]
    w = centered_difference(rm_ext * u_ext, grid.dx)[nodes]
    u_x = centered_difference(u_ext, grid.dx)[nodes]
    return v_x, w, u_x


def energy_density(state: State, grid: RadialGrid, params: ModelParams) -> np.ndarray:
    """Phi(v) + u^2 / 2 + r^{2m} v_x^2 / (2 v^{beta+5}) at the nodes."""
    v_x, _, _ = volume_derivatives(state, grid, params)
    r2m = power(state.r, 2 * params.m)
    capillary = r2m * v_x * v_x * power(state.v, -(params.beta + 5.0))
    return phi(state.v, params.gamma) + 0.5 * state.u * state.u + 0.5 * capillary


def energy(state: State, grid: RadialGrid, params: ModelParams) -> float:
    """Total energy: trapezoid integral of the energy density."""
    return float(trapezoid(energy_density(state, grid, params), dx=grid.dx))


def dissipation_density(state: State, grid: RadialGrid, params: ModelParams) -> np.ndarray:
    """Pointwise viscous dissipation.

    Kazhikhov: (2 mu + lambda(v)) w^2 / v with w = (r^m u)_x.
    Density dependent: [lambda w^2 + 2 mu ((r^m u_x)^2 + m (u v / r)^2)] / v^{alpha+1}.
    """
    _, w, u_x = _node_derivatives(state, grid, params)
    v = state.v
    if params.kind is ModelKind.KAZHIKHOV:
        return stress_coefficient(v, params) * w * w
    m = params.m
    rm_ux = power(state.r, m) * u_x
    hoop = state.u * v / state.r
    shear = rm_ux * rm_ux + m * hoop * hoop
    return (params.lambda_tilde * w * w + 2.0 * params.mu_tilde * shear) * power(
        v, -params.alpha - 1.0
    )


def dissipation_rate(state: State, grid: RadialGrid, params: ModelParams) -> float:
    """Instantaneous dissipation, the integral of dissipation_density."""
    return float(trapezoid(dissipation_density(state, grid, params), dx=grid.dx))


def boundary_flux(state: State, grid: RadialGrid, params: ModelParams) -> float:
    """Energy flux entering through the two ends, R(x_max) - R(0).

    With E the total energy and D the dissipation rate, the semi-discrete
    balance reads dE/dt + D = boundary_flux.
    """
    g = GHOST_LAYERS
    dx = grid.dx
    m = params.m
    capillary = params.beta + 5.0
    v_ext, u_ext, r_ext = extended_fields(state, grid, params)
    r2m_ext = power(r_ext, 2 * m)

    v_x_ext = centered_difference(v_ext, dx)
    flux_g = r2m_ext[1:-1] * power(v_ext[1:-1], -capillary) * v_x_ext
    flux_g_x = centered_difference(flux_g, dx)[g - 2 : 2 - g]
    flux_g = flux_g[g - 1 : 1 - g]
    v_x = v_x_ext[g - 1 : 1 - g]

    v, u, r = state.v, state.u, state.r
    rm = power(r, m)
    _, w, _ = _node_derivatives(state, grid, params)
    flux_h = 0.5 * capillary * rm * rm * power(v, -(capillary + 1.0)) * v_x * v_x
    sigma = stress_coefficient(v, params) * w

    rm_u = rm * u
    flux = rm_u * (1.0 - pressure(v, params)) + rm_u * sigma + w * flux_g
    flux -= rm_u * (flux_g_x + flux_h)
    if params.kind is ModelKind.DENSITY_DEPENDENT and m:
        flux -= 2.0 * m * params.mu_tilde * rm / r * u * u * power(v, -params.alpha)
    return float(flux[-1] - flux[0])


@dataclasses.dataclass(frozen=True)
class EnergyLedger:
    """Running energy balance E + D_cum - boundary_leak = E0 + defect."""

    E: float
    D_cum: float
    boundary_leak: float
    defect: float
    E0: float

    @classmethod
    def start(cls, initial_energy: float) -> "EnergyLedger":
        """Ledger of a run that has not advanced yet."""
        return cls(E=initial_energy, D_cum=0.0, boundary_leak=0.0, defect=0.0, E0=initial_energy)

    def advance(self, energy_now: float, dissipated: float, leaked: float) -> "EnergyLedger":
        """Ledger after one step that dissipated and leaked the given amounts."""
        d_cum = self.D_cum + dissipated
        leak = self.boundary_leak + leaked
        return EnergyLedger(
            E=energy_now,
            D_cum=d_cum,
            boundary_leak=leak,
            defect=energy_now + d_cum - leak - self.E0,
            E0=self.E0,
        )

    def holds(self, kind: ModelKind, tol: float) -> bool:
        """Equality within tol for Kazhikhov runs, the one-sided inequality otherwise."""
        if ModelKind(kind) is ModelKind.KAZHIKHOV:
            return abs(self.defect) <= tol
        return self.defect <= tol


def _kanel_integrand(y: float, beta: float) -> float:
    # sqrt(Psi(e^y)) e^{-y (beta+3)/2}, assembled in logs to stay finite for |y| up to 700
    if y == 0:
        return 0.0
    if y > 0:
        log_root = y + math.log1p(-math.exp(-y)) - 0.5 * (y + math.log1p(math.exp(-y)))
    else:
        s = math.exp(y)
        log_root = math.log1p(-s) - 0.5 * math.log1p(s)
    return math.exp(min(log_root - 0.5 * y * (beta + 3.0), MAX_LOG_VOLUME))


def _kanel_log(y: float, beta: float) -> float:
    if y == 0:
        return 0.0
    value, _ = quad(_kanel_integrand, 0.0, y, args=(beta,), epsabs=1e-13, epsrel=1e-12, limit=200)
    return value


def kanel(v: float, beta: float) -> float:
    """Kanel functional int_1^v sqrt(Psi(s)) s^{-(beta+5)/2} ds.

    Evaluated in the log variable y = ln s; negative for v < 1.
    """
    require_positive(v)
    return _kanel_log(math.log(v), beta)


class KanelBracket(NamedTuple):
    """Predicted pointwise bounds of v; None when a side is unavailable."""

    lower: Optional[float]
    upper: Optional[float]

    def contains(self, v_min: float, v_max: float, rtol: float = 1e-9) -> bool:
        """Whether [v_min, v_max] lies inside the available sides of the bracket."""
        if self.lower is not None and v_min < self.lower * (1.0 - rtol):
            return False
        if self.upper is not None and v_max > self.upper * (1.0 + rtol):
            return False
        return True


def _invert_side(bound: float, beta: float, direction: float) -> Optional[float]:
    def excess(y: float) -> float:
        return direction * _kanel_log(y, beta) - bound

    reach = 1.0
    while excess(direction * reach) < 0:
        if reach >= MAX_LOG_VOLUME:
            return None
        reach = min(2.0 * reach, MAX_LOG_VOLUME)
    ends = sorted((0.0, direction * reach))
    return math.exp(brentq(excess, ends[0], ends[1], xtol=1e-14, rtol=1e-13))


def invert_kanel(bound: float, beta: float) -> KanelBracket:
    """Solve |kanel(v)| = bound on each side of v = 1.

    A side is unavailable when the functional stays below the bound on it.
    """
    if not bound >= 0:
        raise DomainError(f"Kanel bound must be non-negative, got {bound}")
    if bound == 0:
        return KanelBracket(1.0, 1.0)
    bracket = KanelBracket(
        lower=_invert_side(bound, beta, -1.0), upper=_invert_side(bound, beta, 1.0)
    )
    for side in unavailable_sides(bracket):
        logger.debug(f"Kanel functional stays below {bound:.6g} on the {side} side (beta={beta})")
    return bracket


def unavailable_sides(bracket: KanelBracket) -> List[str]:
    """Names of the bracket sides that could not be inverted."""
    return [side for side, value in bracket._asdict().items() if value is None]


def kanel_bound(state: State, grid: RadialGrid, params: ModelParams) -> float:
    """B = ||sqrt(Psi(v))|| * ||v_x / v^{(beta+5)/2}||, both plain L2 norms."""
    v_x, _, _ = volume_derivatives(state, grid, params)
    scaled = v_x * power(state.v, -0.5 * (params.beta + 5.0))
    psi_norm = math.sqrt(trapezoid(psi(state.v), dx=grid.dx))
    slope_norm = math.sqrt(trapezoid(scaled * scaled, dx=grid.dx))
    return psi_norm * slope_norm


def kanel_bracket(state: State, grid: RadialGrid, params: ModelParams) -> KanelBracket:
    """Pointwise bounds of v predicted from the current state."""
    return invert_kanel(kanel_bound(state, grid, params), params.beta)


def uniform_bracket(energy_bound: float, params: ModelParams) -> KanelBracket:
    """Time-uniform bracket implied by an energy bound alone.

    Uses ||sqrt(Psi)||^2 <= C_Psi E and ||v_x / v^{(beta+5)/2}||^2 <= 2 E / a^{2m}
    with C_Psi the supremum of Psi / Phi.
    """
    if not energy_bound >= 0:
        raise DomainError(f"Energy bound must be non-negative, got {energy_bound}")
    sampled = psi_phi_constants(params.gamma, v_range=(1e-6, 1e6)).c_psi
    # the ratio tends to 1/gamma at v = 1 and to 1 as v grows
    c_psi = max(sampled, 1.0, 1.0 / params.gamma)
    bound = energy_bound * math.sqrt(2.0 * c_psi) / params.a**params.m
    return invert_kanel(bound, params.beta)


def weighted_norm(f: np.ndarray, r: np.ndarray, k: int, grid: RadialGrid, m: int) -> float:
    """||f||_{k,r}: sqrt(int r^{2m} f^2 dx), plus int r^{2m} f_x^2 dx when k = 1."""
    f = np.asarray(f, dtype=float)
    r = np.asarray(r, dtype=float)
    if f.shape != r.shape or f.shape != (grid.n,):
        raise DomainError(f"Field of shape {f.shape} and radius {r.shape} do not match the grid")
    if k not in (0, 1):
        raise DomainError(f"Norm order must be 0 or 1, got {k}")
    weight = power(r, 2 * m)
    integrand = weight * f * f
    if k == 1:
        f_x = np.gradient(f, grid.dx, edge_order=2)
        integrand = integrand + weight * f_x * f_x
    return math.sqrt(trapezoid(integrand, dx=grid.dx))


def phi_roots(level: float, gamma: float) -> Tuple[float, float]:
    """Roots alpha_1 <= 1 <= alpha_2 of Phi(x) = level."""
    if not level >= 0:
        raise DomainError(f"Entropy level must be non-negative, got {level}")
    if level == 0:
        return 1.0, 1.0

    def excess(x: float) -> float:
        return phi(x, gamma) - level

    low = 0.5
    while excess(low) < 0:
        low *= 0.5
    high = 2.0
    while excess(high) < 0:
        high *= 2.0
    return (
        brentq(excess, low, 1.0, xtol=1e-15, rtol=1e-14),
        brentq(excess, 1.0, high, xtol=1e-15, rtol=1e-14),
    )


@dataclasses.dataclass(frozen=True)
class JensenWindow:
    """Convexity check on one window of nodes [start, stop]."""

    start: int
    stop: int
    v_mean: float
    phi_of_mean: float
    mean_phi: float
    ok: bool
    mean_value_node: int
    oscillation: float
    lower_bound: float


@dataclasses.dataclass(frozen=True)
class JensenReport:
    """Per-window Jensen checks and the roots of Phi = eps0."""

    eps0: float
    alpha1: float
    alpha2: float
    windows: List[JensenWindow]

    @property
    def ok(self) -> bool:
        """Whether every window satisfies Phi(mean v) <= mean Phi(v)."""
        return all(window.ok for window in self.windows)


def jensen_check(
    v: np.ndarray,
    grid: RadialGrid,
    gamma: float,
    window: Optional[int] = None,
    eps0: Optional[float] = None,
) -> JensenReport:
    """Compare Phi of window averages of v with the window averages of Phi(v).

    Consecutive windows share their end nodes. The default window spans unit
    mass length (the whole grid when x_max < 1). eps0 defaults to int Phi(v) dx.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (grid.n,):
        raise DomainError(f"Field of length {v.shape} does not match grid with {grid.n} nodes")
    if window is None:
        window = min(grid.n, max(2, int(round(1.0 / grid.dx)) + 1))
    if window < 2:
        raise DomainError(f"Jensen window needs at least 2 nodes, got {window}")
    entropy = phi(v, gamma)
    if eps0 is None:
        eps0 = float(trapezoid(entropy, dx=grid.dx))
    alpha1, alpha2 = phi_roots(eps0, gamma)
    v_x = np.gradient(v, grid.dx, edge_order=2)

    windows = []
    start = 0
    while start < grid.n - 1:
        stop = min(start + window - 1, grid.n - 1)
        cells = slice(start, stop + 1)
        length = (stop - start) * grid.dx
        v_mean = float(trapezoid(v[cells], dx=grid.dx)) / length
        mean_phi = float(trapezoid(entropy[cells], dx=grid.dx)) / length
        phi_of_mean = phi(v_mean, gamma)
        oscillation = float(trapezoid(np.abs(v_x[cells]) / v[cells] ** 2, dx=grid.dx))
        windows.append(
            JensenWindow(
                start=start,
                stop=stop,
                v_mean=v_mean,
                phi_of_mean=phi_of_mean,
                mean_phi=mean_phi,
                ok=phi_of_mean <= mean_phi + 1e-12 * max(1.0, mean_phi),
                mean_value_node=start + int(np.argmin(np.abs(v[cells] - v_mean))),
                oscillation=oscillation,
                lower_bound=1.0 / (1.0 / alpha1 + oscillation),
            )
        )
        start = stop
    return JensenReport(eps0=eps0, alpha1=alpha1, alpha2=alpha2, windows=windows)


def monitor_dissipation_integrals(
    state: State, grid: RadialGrid, params: ModelParams
) -> Dict[str, float]:
    """Instantaneous integrals bounded in time by the higher-order energy estimates.

    Keys follow MONITORED_INTEGRALS:

    * ``vx2_v2a2``: int v_x^2 / v^{2 alpha + 2}
    * ``vx2_va2``: int v_x^2 / v^{alpha + 2}
    * ``vx2_vag2``: int v_x^2 / v^{alpha + gamma + 2}
    * ``vxx2_weighted``: int r^{2m} v_xx^2 / v^{alpha + beta + 6}
    * ``capillary_composite``: int [(r^m v^{-(alpha + beta + 6)/2} v_x)_x]^2
    """
    g = GHOST_LAYERS
    alpha, beta, gamma = params.alpha, params.beta, params.gamma
    v = state.v
    v_x, v_xx, _ = volume_derivatives(state, grid, params)
    vx2 = v_x * v_x

    v_ext, _, r_ext = extended_fields(state, grid, params)
    v_x_ext = centered_difference(v_ext, grid.dx)
    inner = slice(1, -1)
    composite_flux = (
        power(r_ext[inner], params.m) * power(v_ext[inner], -0.5 * (alpha + beta + 6.0)) * v_x_ext
    )
    composite = centered_difference(composite_flux, grid.dx)[g - 2 : 2 - g]

    def integral(values: np.ndarray) -> float:
        return float(trapezoid(values, dx=grid.dx))

    return {
        "vx2_v2a2": integral(vx2 * power(v, -(2.0 * alpha + 2.0))),
        "vx2_va2": integral(vx2 * power(v, -(alpha + 2.0))),
        "vx2_vag2": integral(vx2 * power(v, -(alpha + gamma + 2.0))),
        "vxx2_weighted": integral(
            power(state.r, 2 * params.m) * v_xx * v_xx * power(v, -(alpha + beta + 6.0))
        ),
        "capillary_composite": integral(composite * composite),
    }


def higher_order_functionals(
    state: State, grid: RadialGrid, params: ModelParams
) -> Dict[str, float]:
    """||(r^m u)_x / r^m|| and ||v_xxx||^2_{0,r}; reported without thresholds."""
    _, w, _ = _node_derivatives(state, grid, params)
    _, _, v_xxx = volume_derivatives(state, grid, params)
    divergence = w / power(state.r, params.m)
    return {
        "velocity_divergence_norm": math.sqrt(trapezoid(divergence * divergence, dx=grid.dx)),
        "vxxx_weighted_sq": weighted_norm(v_xxx, state.r, 0, grid, params.m) ** 2,
    }


class DiagnosticsRecorder:
    """Run-loop sink that keeps the energy ledger and the time-series rows.

    ``observe`` integrates the dissipation, boundary flux and monitored
    integrals in time with the trapezoid rule over every accepted step.
    ``snapshot`` evaluates the Kanel bracket, appends a time-series row and
    forwards the state to the optional snapshot callback.
    """

    def __init__(
        self,
        grid: RadialGrid,
        params: ModelParams,
        ledger_tol: float = 1e-3,
        on_snapshot: Optional[Callable[[int, State], None]] = None,
    ):
        self.grid = grid
        self.params = params
        self.ledger_tol = ledger_tol
        self.on_snapshot = on_snapshot

        self.ledger: Optional[EnergyLedger] = None
        self.accumulated = {name: 0.0 for name in MONITORED_INTEGRALS}
        self.rows: List[Dict[str, float]] = []
        self.max_abs_defect = 0.0
        self.max_defect = -math.inf
        self.bracket: Optional[KanelBracket] = None
        self.bracket_envelope = KanelBracket(None, None)
        self.bracket_violations = 0
        self.final_state: Optional[State] = None
        self._rates: Optional[Tuple[float, float, Dict[str, float]]] = None
        self._unavailable: Set[str] = set()

    def _evaluate(self, state: State) -> Tuple[float, float, Dict[str, float]]:
        return (
            dissipation_rate(state, self.grid, self.params),
            boundary_flux(state, self.grid, self.params),
            monitor_dissipation_integrals(state, self.grid, self.params),
        )

    def observe(self, step: int, state: State, dt: float) -> None:
        """Advance the ledger and the time integrals to the given state."""
        rates = self._evaluate(state)
        energy_now = energy(state, self.grid, self.params)
        if self.ledger is None or self._rates is None:
            self.ledger = EnergyLedger.start(energy_now)
        else:
            dissipation_prev, leak_prev, monitored_prev = self._rates
            dissipation_now, leak_now, monitored_now = rates
            self.ledger = self.ledger.advance(
                energy_now,
                dissipated=0.5 * dt * (dissipation_prev + dissipation_now),
                leaked=0.5 * dt * (leak_prev + leak_now),
            )
            for name in MONITORED_INTEGRALS:
                self.accumulated[name] += 0.5 * dt * (monitored_prev[name] + monitored_now[name])
        self._rates = rates
        self.max_abs_defect = max(self.max_abs_defect, abs(self.ledger.defect))
        self.max_defect = max(self.max_defect, self.ledger.defect)
        self.final_state = state

    def snapshot(self, step: int, state: State) -> None:
        """Record a time-series row for the most recently observed state."""
        if self.ledger is None:
            self.observe(step, state, 0.0)
        bracket = kanel_bracket(state, self.grid, self.params)
        for side in unavailable_sides(bracket):
            if side not in self._unavailable:
                self._unavailable.add(side)
                logger.warning(
                    f"Kanel bracket has no {side} side for beta={self.params.beta}"
                    f" (from step {step})"
                )
        v_min, v_max = float(state.v.min()), float(state.v.max())
        if not bracket.contains(v_min, v_max):
            self.bracket_violations += 1
            logger.warning(
                f"Step {step}: v range [{v_min:.6g}, {v_max:.6g}] leaves the Kanel bracket "
                f"[{bracket.lower}, {bracket.upper}]"
            )
        self.bracket = bracket
        self.bracket_envelope = KanelBracket(
            lower=_envelope(min, self.bracket_envelope.lower, bracket.lower),
            upper=_envelope(max, self.bracket_envelope.upper, bracket.upper),
        )

        r = state.r
        m = self.params.m
        v_x, _, _ = volume_derivatives(state, self.grid, self.params)
        row = {
            "step": step,
            "t": state.t,
            "E": self.ledger.E,
            "D_cum": self.ledger.D_cum,
            "boundary_leak": self.ledger.boundary_leak,
            "defect": self.ledger.defect,
            "v_min": v_min,
            "v_max": v_max,
            "kanel_lower": _or_nan(bracket.lower),
            "kanel_upper": _or_nan(bracket.upper),
            "norm_v_minus_1_H1": weighted_norm(state.v - 1.0, r, 1, self.grid, m),
            "norm_u_H1": weighted_norm(state.u, r, 1, self.grid, m),
            "norm_vx_1r": weighted_norm(v_x, r, 1, self.grid, m),
        }
        row.update({f"acc_{name}": value for name, value in self.accumulated.items()})
        self.rows.append(row)
        if self.on_snapshot is not None:
            self.on_snapshot(step, state)

    @property
    def ledger_ok(self) -> bool:
        """Whether the balance held within ledger_tol at every observed step."""
        if self.ledger is None:
            return True
        if self.params.kind is ModelKind.KAZHIKHOV:
            return self.max_abs_defect <= self.ledger_tol
        return self.max_defect <= self.ledger_tol

    def summary(self) -> dict:
        """Final ledger, brackets and functionals for the run report."""
        report = {
            "ledger": dataclasses.asdict(self.ledger) if self.ledger else None,
            "ledger_tol": self.ledger_tol,
            "ledger_ok": self.ledger_ok,
            "max_abs_defect": self.max_abs_defect,
            "kanel_bracket": self.bracket._asdict() if self.bracket else None,
            "kanel_envelope": self.bracket_envelope._asdict(),
            "kanel_violations": self.bracket_violations,
            "accumulated": dict(self.accumulated),
        }
        if self.ledger is not None:
            report["uniform_bracket"] = uniform_bracket(
                max(self.ledger.E0, self.ledger.E0 + self.ledger.boundary_leak), self.params
            )._asdict()
        if self.final_state is not None:
            report["higher_order"] = higher_order_functionals(
                self.final_state, self.grid, self.params
            )
        return report


def _envelope(
    pick: Callable[[float, float], float], current: Optional[float], new: Optional[float]
) -> Optional[float]:
    if current is None:
        return new
    if new is None:
        return current
    return pick(current, new)


def _or_nan(value: Optional[float]) -> float:
    return math.nan if value is None else value
