# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Parameter sets and constitutive laws of the isentropic NSK system.

Two constitutive models are supported:

* Kazhikhov: constant shear viscosity, power-law bulk viscosity
  ``mu(v) = mu_tilde``, ``lambda(v) = lambda_tilde * v**-alpha``;
* density dependent: both viscosities follow the power law
  ``mu(v) = mu_tilde * v**-alpha``, ``lambda(v) = lambda_tilde * v**-alpha``.

Both use the pressure ``p(v) = v**-gamma`` and the capillarity
``kappa(v) = v**-beta`` with the capillary constant normalised to one.
"""

import dataclasses
import logging
import math
from enum import Enum
from typing import List, Union

import numpy as np

from nskbench.exceptions import DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# integer exponents up to this size are expanded into products
_MAX_UNROLLED_EXPONENT = 64


class ModelKind(str, Enum):
    """Constitutive model selector."""

    KAZHIKHOV = "kazhikhov"
    DENSITY_DEPENDENT = "density-dependent"


@dataclasses.dataclass(frozen=True)
class ModelParams:
    """Exponents, coefficients and geometry of one NSK configuration."""

    kind: ModelKind
    alpha: float
    beta: float
    gamma: float
    mu_tilde: float = 1.0
    lambda_tilde: float = 0.0
    dim: int = 3
    a: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        for name in ("alpha", "beta", "gamma", "mu_tilde", "lambda_tilde", "a"):
            if math.isnan(float(getattr(self, name))):
                raise DomainError(f"Model parameter {name} is NaN")

    @property
    def m(self) -> int:
        """Geometric exponent m = d - 1."""
        return self.dim - 1

    def replace(self, **changes) -> "ModelParams":
        """Return a copy with the given fields changed."""
        return dataclasses.replace(self, **changes)


def power(v: ArrayLike, exponent: float) -> ArrayLike:
    """Evaluate v**exponent, exactly by repeated multiplication for integer exponents."""
    base = np.asarray(v, dtype=float)
    if float(exponent).is_integer() and abs(exponent) <= _MAX_UNROLLED_EXPONENT:
        remaining = int(abs(exponent))
        result = np.ones_like(base)
        while remaining:
            if remaining & 1:
                result = result * base
            base = base * base
            remaining >>= 1
        if exponent < 0:
            result = 1.0 / result
    else:
        result = np.power(base, float(exponent))
    if result.ndim == 0:
        return float(result)
    return result


def require_positive(v: ArrayLike, what: str = "specific volume") -> None:
    """Raise DomainError unless every entry of v is finite and strictly positive."""
    values = np.asarray(v, dtype=float)
    if np.any(np.isnan(values)):
        raise DomainError(f"{what} contains NaN")
    if np.any(values <= 0.0):
        raise DomainError(f"{what} must be strictly positive, min is {values.min()}")


def pressure(v: ArrayLike, params: ModelParams) -> ArrayLike:
    """Return p(v) = v**-gamma.

    Raises:
        DomainError: if any v is not strictly positive.
    """
    require_positive(v)
    return power(v, -params.gamma)


def pressure_derivative(v: ArrayLike, params: ModelParams) -> ArrayLike:
    """Return p'(v) = -gamma * v**(-gamma - 1)."""
    require_positive(v)
    return -params.gamma * power(v, -params.gamma - 1.0)


def shear_viscosity(v: ArrayLike, params: ModelParams) -> ArrayLike:
    """Return mu(v) for the configured model kind."""
    require_positive(v)
    if params.kind is ModelKind.KAZHIKHOV:
        return params.mu_tilde * power(v, 0)
    return params.mu_tilde * power(v, -params.alpha)


def bulk_viscosity(v: ArrayLike, params: ModelParams) -> ArrayLike:
    """Return lambda(v); both model kinds use lambda_tilde * v**-alpha."""
    require_positive(v)
    return params.lambda_tilde * power(v, -params.alpha)


def capillarity(v: ArrayLike, params: ModelParams) -> ArrayLike:
    """Return kappa(v) = v**-beta."""
    require_positive(v)
    return power(v, -params.beta)


def stress_coefficient(v: ArrayLike, params: ModelParams) -> ArrayLike:
    """Coefficient of (r^m u)_x in the viscous stress, (2 mu(v) + lambda(v)) / v."""
    if params.kind is ModelKind.KAZHIKHOV:
        return (2.0 * params.mu_tilde + params.lambda_tilde * power(v, -params.alpha)) / v
    return (2.0 * params.mu_tilde + params.lambda_tilde) * power(v, -params.alpha - 1.0)


def validate(params: ModelParams) -> List[str]:
    """Return every violated coefficient constraint; an empty list means admissible."""
    violations = []
    if params.mu_tilde <= 0:
        violations.append("μ̃ ≤ 0")
    if 2.0 * params.mu_tilde + params.dim * params.lambda_tilde <= 0:
        violations.append("2μ̃+dλ̃ ≤ 0")
    if params.gamma < 1:
        violations.append("γ < 1")
    if params.dim < 2:
        violations.append("d < 2")
    if params.a <= 0:
        violations.append("a ≤ 0")
    for violation in violations:
        logger.debug(f"Model parameters violate {violation}")
    return violations
