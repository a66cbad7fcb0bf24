# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Admissible parameter regions for global strong solutions.

The classifier reads every case as a conjunction of scalar inequalities in
(alpha, beta, gamma). Each inequality reports a slack: positive when it holds
strictly, zero on its boundary and negative when it fails. Strict inequalities
are matched only with positive slack; non-strict ones accept zero. Equality
conditions are matched within an absolute tolerance and report
``eq_tol - |lhs - rhs|``.

Three tables are known:

* ``T1.1``: Kazhikhov viscosity, cases i-iii;
* ``T1.2``: density dependent viscosity, cases i-v;
* ``BD``: density dependent viscosity with the Bresch-Desjardins entropy pair
  ``mu_tilde = 1``, ``lambda_tilde = 2 (alpha - 1)``, cases i-ii.
"""

import dataclasses
import functools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from nskbench.exceptions import DomainError

logger = logging.getLogger(__name__)

DEFAULT_EQ_TOL = 1e-12

SQRT3 = math.sqrt(3.0)


class Theorem(str, Enum):
    """Case table used by the classifier."""

    T1_1 = "T1.1"
    T1_2 = "T1.2"
    BD = "BD"


@dataclasses.dataclass(frozen=True)
class Condition:
    """One scalar inequality ``lhs <relation> rhs`` of a case."""

    label: str
    relation: str
    lhs: Callable[[float, float, float], float]
    rhs: Callable[[float, float, float], float]

    def slack(self, alpha: float, beta: float, gamma: float, eq_tol: float) -> float:
        """Signed distance to the boundary of the condition, positive inside."""
        lhs = self.lhs(alpha, beta, gamma)
        rhs = self.rhs(alpha, beta, gamma)
        if math.isnan(lhs) or math.isnan(rhs):
            return -math.inf
        if self.relation in ("<", "<="):
            return rhs - lhs
        if self.relation in (">", ">="):
            return lhs - rhs
        return eq_tol - abs(lhs - rhs)

    def holds(self, slack: float) -> bool:
        """Whether a slack value satisfies the condition."""
        if self.relation in ("<", ">"):
            return slack > 0
        return slack >= 0


@dataclasses.dataclass(frozen=True)
class RegimeVerdict:
    """Classification of one (alpha, beta, gamma) triple against a case table."""

    theorem: Theorem
    alpha: float
    beta: float
    gamma: float
    matched_cases: List[str]
    slacks: Dict[str, float]

    @property
    def matched(self) -> bool:
        """Whether any case of the table holds."""
        return bool(self.matched_cases)

    def case_slack_min(self, case: str) -> float:
        """Smallest slack among the conditions of one case."""
        prefix = f"{case}:"
        return min(value for label, value in self.slacks.items() if label.startswith(prefix))

    def describe(self) -> str:
        """One line summary such as ``T1.1 case i`` or ``T1.1 no case``."""
        if not self.matched_cases:
            return f"{self.theorem.value} no case"
        return f"{self.theorem.value} case {','.join(self.matched_cases)}"


# sign-condition polynomials


def f1(alpha: float, beta: float) -> float:
    """Polynomial whose positivity yields the Kazhikhov case with beta in [-5, -14/3]."""
    return (
        (beta + 5) * (alpha + beta + 7) / 6
        + (alpha + 1) * (beta + 5) / 2
        - (alpha + beta + 6) * (alpha + beta + 7) / 3
    )


def f2(m: int, alpha: float, beta: float) -> float:
    """Companion polynomial of f1 collecting the geometric terms."""
    return (
        -m * (2 * alpha + 3)
        + 2 * m * (alpha + beta + 6) / 3
        + m * (alpha + beta + 5)
        - m * (beta + 5) / 3
    )


def f1p(alpha: float, beta: float) -> float:
    """Polynomial of the Kazhikhov case with beta in [(-7 - sqrt 3)/2, -3)."""
    return (
        (beta + 5) * (alpha + beta + 7) / 6
        + (alpha + 1) * (beta + 5) / 2
        - ((alpha + beta + 6) / 2) ** 2
    )


def f2p(m: int, alpha: float, beta: float) -> float:
    """Companion polynomial of f1p."""
    return m * (alpha + beta + 5) - 2 * m * (alpha + 1) - m * (beta + 5) / 3


# the density dependent sign polynomials coincide with the Kazhikhov ones
f3 = f1
f4 = f2
f3p = f1p
f4p = f2p


def positivity_interval(
    polynomial: Callable[[float, float], float], beta: float
) -> Optional[Tuple[float, float]]:
    """Open alpha-interval on which a concave quadratic sign polynomial is positive.

    The quadratic in alpha is recovered exactly from three samples, so the
    interval is computed from the polynomial itself rather than from any
    printed bound.

    Returns:
        the pair of roots, or None when the polynomial is not a concave
        quadratic in alpha or never positive at this beta.
    """
    samples = np.array([-1.0, 0.0, 1.0])
    values = np.array([polynomial(alpha, beta) for alpha in samples])
    leading, linear, constant = np.polyfit(samples, values, 2)
    if leading >= 0:
        return None
    discriminant = linear * linear - 4 * leading * constant
    if discriminant <= 0:
        return None
    root = math.sqrt(discriminant)
    first, second = (-linear + root) / (2 * leading), (-linear - root) / (2 * leading)
    return (min(first, second), max(first, second))


# bounds shared by several cases


def _radicand_two(beta: float) -> float:
    return -2.0 * (beta + 2) * (beta + 5)


def _radicand_three(beta: float) -> float:
    return -2.0 * beta * beta - 22.0 * beta - 59.0


def _root_bound(center: float, radicand: float, sign: float) -> float:
    if radicand < 0:
        return math.nan
    return (center + sign * math.sqrt(radicand)) / 2


def _lower_two(alpha, beta, gamma):
    return _root_bound(beta + 2, _radicand_two(beta), -1.0)


def _upper_two(alpha, beta, gamma):
    return _root_bound(beta + 2, _radicand_two(beta), 1.0)


def _lower_three(alpha, beta, gamma):
    return _root_bound(-3.0, _radicand_three(beta), -1.0)


def _upper_three(alpha, beta, gamma):
    return _root_bound(-3.0, _radicand_three(beta), 1.0)


def _alpha(alpha, beta, gamma):
    return alpha


def _beta(alpha, beta, gamma):
    return beta


def _gamma(alpha, beta, gamma):
    return gamma


def _const(value: float) -> Callable[[float, float, float], float]:
    return lambda alpha, beta, gamma: value


def _cases_t11() -> Dict[str, List[Condition]]:
    return {
        "i": [
            Condition("beta >= -3", ">=", _beta, _const(-3.0)),
            Condition("beta <= -2", "<=", _beta, _const(-2.0)),
            Condition("gamma >= 1", ">=", _gamma, _const(1.0)),
        ],
        "ii": [
            Condition(
                "-2(beta+2)(beta+5) >= 0", ">=", lambda a, b, g: _radicand_two(b), _const(0.0)
            ),
            Condition("alpha > (beta+2-sqrt(-2(beta+2)(beta+5)))/2", ">", _alpha, _lower_two),
            Condition("alpha <= beta+3", "<=", _alpha, lambda a, b, g: b + 3),
            Condition("beta >= (-7-sqrt3)/2", ">=", _beta, _const((-7.0 - SQRT3) / 2)),
            Condition("beta < -3", "<", _beta, _const(-3.0)),
            Condition("gamma > -beta-2", ">", _gamma, lambda a, b, g: -b - 2),
        ],
        "iii": [
            Condition(
                "-2beta^2-22beta-59 >= 0", ">=", lambda a, b, g: _radicand_three(b), _const(0.0)
            ),
            Condition("alpha > (-3-sqrt(-2beta^2-22beta-59))/2", ">", _alpha, _lower_three),
            Condition("alpha <= beta+3", "<=", _alpha, lambda a, b, g: b + 3),
            Condition("beta >= -5", ">=", _beta, _const(-5.0)),
            Condition("beta <= -14/3", "<=", _beta, _const(-14.0 / 3.0)),
            Condition("gamma > -beta-2", ">", _gamma, lambda a, b, g: -b - 2),
        ],
    }


def _cases_t12() -> Dict[str, List[Condition]]:
    return {
        "i": _cases_t11()["i"],
        "ii": [
            Condition("alpha = (beta+3)/2", "==", _alpha, lambda a, b, g: (b + 3) / 2),
            Condition("beta < -3", "<", _beta, _const(-3.0)),
            Condition("gamma > -beta-2", ">", _gamma, lambda a, b, g: -b - 2),
        ],
        "iii": [
            Condition(
                "-2(beta+2)(beta+5) >= 0", ">=", lambda a, b, g: _radicand_two(b), _const(0.0)
            ),
            Condition("alpha > (beta+2-sqrt(-2(beta+2)(beta+5)))/2", ">", _alpha, _lower_two),
            Condition("alpha <= (beta+4)/3", "<=", _alpha, lambda a, b, g: (b + 4) / 3),
            Condition("beta >= -4", ">=", _beta, _const(-4.0)),
            Condition("beta < -3", "<", _beta, _const(-3.0)),
            Condition("gamma > -beta-2", ">", _gamma, lambda a, b, g: -b - 2),
        ],
        "iv": [
            Condition(
                "-2(beta+2)(beta+5) >= 0", ">=", lambda a, b, g: _radicand_two(b), _const(0.0)
            ),
            Condition("alpha > (beta+2-sqrt(-2(beta+2)(beta+5)))/2", ">", _alpha, _lower_two),
            Condition("alpha < (beta+2+sqrt(-2(beta+2)(beta+5)))/2", "<", _alpha, _upper_two),
            Condition("beta >= -5", ">=", _beta, _const(-5.0)),
            Condition("beta < -4", "<", _beta, _const(-4.0)),
            Condition("gamma > -beta-2", ">", _gamma, lambda a, b, g: -b - 2),
        ],
        "v": [
            Condition(
                "-2beta^2-22beta-59 >= 0", ">=", lambda a, b, g: _radicand_three(b), _const(0.0)
            ),
            Condition("alpha > (-3-sqrt(-2beta^2-22beta-59))/2", ">", _alpha, _lower_three),
            Condition("alpha < (-3+sqrt(-2beta^2-22beta-59))/2", "<", _alpha, _upper_three),
            Condition("beta >= (-11-sqrt3)/2", ">=", _beta, _const((-11.0 - SQRT3) / 2)),
            Condition("beta <= (-11+sqrt3)/2", "<=", _beta, _const((-11.0 + SQRT3) / 2)),
            Condition("gamma > -beta-2", ">", _gamma, lambda a, b, g: -b - 2),
        ],
    }


def _cases_bd() -> Dict[str, List[Condition]]:
    return {
        "i": [
            Condition("alpha > 0", ">", _alpha, _const(0.0)),
            Condition("beta >= -3", ">=", _beta, _const(-3.0)),
            Condition("beta <= -2", "<=", _beta, _const(-2.0)),
            Condition("gamma >= 1", ">=", _gamma, _const(1.0)),
        ],
        "ii": [
            Condition("alpha > 0", ">", _alpha, _const(0.0)),
            Condition("alpha < (beta+4)/3", "<", _alpha, lambda a, b, g: (b + 4) / 3),
            Condition("beta > -4", ">", _beta, _const(-4.0)),
            Condition("beta < -3", "<", _beta, _const(-3.0)),
            Condition("gamma > -beta-2", ">", _gamma, lambda a, b, g: -b - 2),
        ],
    }


CASES: Dict[Theorem, Dict[str, List[Condition]]] = {
    Theorem.T1_1: _cases_t11(),
    Theorem.T1_2: _cases_t12(),
    Theorem.BD: _cases_bd(),
}


def bd_coefficients(alpha: float) -> Tuple[float, float]:
    """Viscosity coefficients (mu_tilde, lambda_tilde) of the Bresch-Desjardins pair."""
    return 1.0, 2.0 * (alpha - 1.0)


def classify(
    alpha: float,
    beta: float,
    gamma: float,
    theorem: Union[Theorem, str],
    eq_tol: float = DEFAULT_EQ_TOL,
) -> RegimeVerdict:
    """Classify a parameter triple against one case table.

    Raises:
        DomainError: if any of alpha, beta, gamma is NaN.
    """
    theorem = Theorem(theorem)
    if any(math.isnan(float(value)) for value in (alpha, beta, gamma)):
        raise DomainError(f"Cannot classify NaN triple ({alpha}, {beta}, {gamma})")

    slacks: Dict[str, float] = {}
    matched = []
    for case, conditions in CASES[theorem].items():
        holds = True
        for condition in conditions:
            slack = condition.slack(alpha, beta, gamma, eq_tol)
            slacks[f"{case}:{condition.label}"] = slack
            holds = holds and condition.holds(slack)
        if holds:
            matched.append(case)
    return RegimeVerdict(
        theorem=theorem,
        alpha=float(alpha),
        beta=float(beta),
        gamma=float(gamma),
        matched_cases=matched,
        slacks=slacks,
    )


def _axis(bounds: Sequence[float], count: int, name: str) -> np.ndarray:
    low, high = float(bounds[0]), float(bounds[1])
    if not (math.isfinite(low) and math.isfinite(high)):
        raise DomainError(f"{name} range must be finite, got ({low}, {high})")
    if count < 1:
        raise DomainError(f"{name} resolution must be at least 1, got {count}")
    if high < low or (high == low and count > 1):
        raise DomainError(f"{name} range ({low}, {high}) has zero size")
    if count == 1:
        return np.array([(low + high) / 2])
    return np.linspace(low, high, count)


def _sweep_row(
    beta: float, alphas: np.ndarray, gamma: float, theorem: Union[Theorem, str], eq_tol: float
) -> List[RegimeVerdict]:
    return [classify(alpha, beta, gamma, theorem, eq_tol) for alpha in alphas]


def sweep_regions(
    alpha_range: Sequence[float],
    beta_range: Sequence[float],
    gamma: float,
    theorem: Union[Theorem, str],
    resolution: Union[int, Tuple[int, int]],
    eq_tol: float = DEFAULT_EQ_TOL,
    workers: int = 1,
) -> List[List[RegimeVerdict]]:
    """Classify a raster of (alpha, beta) points at fixed gamma.

    Rows run over beta and columns over alpha, both ascending. Rows may be
    computed in worker processes; the assembly order never depends on it.

    Raises:
        DomainError: if a range is not finite or has zero size.
    """
    n_alpha, n_beta = (resolution, resolution) if isinstance(resolution, int) else resolution
    alphas = _axis(alpha_range, n_alpha, "alpha")
    betas = _axis(beta_range, n_beta, "beta")
    logger.info(
        f"Sweeping {theorem} over {len(alphas)}x{len(betas)} points at gamma={gamma}"
    )

    row = functools.partial(
        _sweep_row, alphas=alphas, gamma=gamma, theorem=theorem, eq_tol=eq_tol
    )
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(row, betas))
    return [row(beta) for beta in betas]
