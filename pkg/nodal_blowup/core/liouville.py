"""
Closed-form solutions of the Liouville equation -z'' - z'/r = e^z.

Four families are provided: the planar bubble, the one-dimensional traveling
solution of -z'' = e^z, the singular annular family fixed by Z(m) = Z'(m) = 0,
and the general two-parameter radial family. Every radial family is assembled
in log-radius t = log r, where all four are shifted, rescaled copies of the
traveling solution; residuals and masses are computed in that variable.
"""

import logging
import math
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import integrate

from .exceptions import DomainError, QuadratureNonConvergence

logger = logging.getLogger(__name__)

LOG2 = math.log(2.0)
LOG4 = math.log(4.0)
SQRT2 = math.sqrt(2.0)

# Finite-difference step in the profile's natural variable
RESIDUAL_STEP = 0.02
# Central 8th-order stencils for the first and second derivative
_D1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
_D2 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])
_OFFSETS = np.arange(-4, 5)

# Window half-width for mass integrals, in units of the tail decay length
MASS_WINDOW = 40.0
MASS_TOL = 1e-12


class LiouvilleFamily(str, Enum):
    BUBBLE = "bubble"
    TRAVELING = "traveling"
    ANNULAR = "annular"
    GENERAL = "general"


class ProfileKind(BaseModel):
    """A member of one of the closed-form families."""

    model_config = ConfigDict(frozen=True)

    family: LiouvilleFamily
    m: Optional[float] = None
    delta: Optional[float] = None
    y: Optional[float] = None

    @classmethod
    def bubble(cls) -> "ProfileKind":
        return cls(family=LiouvilleFamily.BUBBLE)

    @classmethod
    def traveling(cls) -> "ProfileKind":
        return cls(family=LiouvilleFamily.TRAVELING)

    @classmethod
    def annular(cls, m: float) -> "ProfileKind":
        if not (math.isfinite(m) and m > 0.0):
            raise DomainError(f"annular family requires m > 0, got {m}", m=m)
        return cls(family=LiouvilleFamily.ANNULAR, m=m)

    @classmethod
    def general(cls, delta: float, y: float) -> "ProfileKind":
        if not math.isfinite(delta) or delta == 0.0:
            raise DomainError(f"general family requires delta != 0, got {delta}", delta=delta)
        if not math.isfinite(y):
            raise DomainError("general family requires a finite shift y", y=y)
        return cls(family=LiouvilleFamily.GENERAL, delta=delta, y=y)

    @property
    def radial(self) -> bool:
        return self.family is not LiouvilleFamily.TRAVELING

    @property
    def alpha(self) -> float:
        """alpha = sqrt(2 m^2 + 4) of the annular family."""
        if self.family is not LiouvilleFamily.ANNULAR:
            raise DomainError("alpha is defined for the annular family only", family=self.family.value)
        return math.sqrt(2.0 * self.m * self.m + 4.0)

    def label(self) -> str:
        if self.family is LiouvilleFamily.ANNULAR:
            return f"annular(m={self.m:g})"
        if self.family is LiouvilleFamily.GENERAL:
            return f"general(delta={self.delta:g}, y={self.y:g})"
        return self.family.value


def _traveling(s: float) -> float:
    t = SQRT2 * s
    return LOG4 + t - 2.0 * np.logaddexp(0.0, t)


def _log_radius_value(kind: ProfileKind, t: float) -> float:
    """Profile value at r = e^t for the radial families."""
    if kind.family is LiouvilleFamily.BUBBLE:
        return -2.0 * math.log1p(math.exp(2.0 * t) / 8.0)
    if kind.family is LiouvilleFamily.ANNULAR:
        m, alpha = kind.m, kind.alpha
        log_m = math.log(m)
        numerator = math.log(4.0 * alpha * alpha) + (alpha + 2.0) * log_m + (alpha - 2.0) * t
        denominator = np.logaddexp(math.log(alpha + 2.0) + alpha * log_m,
                                   math.log(alpha - 2.0) + alpha * t)
        return float(numerator - 2.0 * denominator)
    # general: a rescaled traveling solution in t, minus the 2t of the planar measure
    x = SQRT2 * (t - kind.y) / kind.delta
    return float(LOG4 - 2.0 * math.log(abs(kind.delta)) + x - 2.0 * np.logaddexp(0.0, x) - 2.0 * t)


def _check_domain(kind: ProfileKind, x: float, allow_origin: bool) -> None:
    if not math.isfinite(x):
        raise DomainError(f"{kind.label()} evaluated at non-finite point {x}", x=x)
    if not kind.radial:
        return
    if x < 0.0 or (x == 0.0 and not (allow_origin and kind.family is LiouvilleFamily.BUBBLE)):
        raise DomainError(f"{kind.label()} is defined for r > 0, got {x}", x=x)


def eval_profile(kind: ProfileKind, x: float) -> float:
    """
    Exact value of a closed-form profile.

    Args:
        kind: Family member
        x: Radius r > 0 for radial families (r = 0 allowed for the bubble),
           line coordinate s for the traveling solution

    Raises:
        DomainError: x outside the natural domain
    """
    _check_domain(kind, x, allow_origin=True)
    if kind.family is LiouvilleFamily.TRAVELING:
        return float(_traveling(x))
    if x == 0.0:
        return 0.0
    return _log_radius_value(kind, math.log(x))


def bubble(rho: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Vectorized bubble log 1/(1 + rho^2/8)^2."""
    return -2.0 * np.log1p(np.square(rho) / 8.0)


def bubble_mass_fraction(rho: float) -> float:
    """Share of the bubble mass 4 carried by the disk of radius rho."""
    return 1.0 - 1.0 / (1.0 + rho * rho / 8.0)


def _stencil(g, x0: float, h: float) -> Tuple[float, float]:
    values = np.array([g(x0 + j * h) for j in _OFFSETS])
    return float(_D1 @ values) / h, float(_D2 @ values) / (h * h)


def _residual_step(kind: ProfileKind) -> float:
    if kind.family is LiouvilleFamily.GENERAL:
        # constant step in the traveling variable sqrt(2) (t - y) / delta
        return min(RESIDUAL_STEP, SQRT2 * RESIDUAL_STEP * abs(kind.delta))
    return RESIDUAL_STEP


def ode_residual(kind: ProfileKind, x: float) -> float:
    """
    Residual of the limit equation at x.

    Returns -z'' - z'/r - e^z for the radial families and -z'' - e^z for the
    traveling solution. Radial derivatives are taken in t = log r, where
    -z'' - z'/r = -e^{-2t} d^2z/dt^2.

    Raises:
        DomainError: x outside the open domain
    """
    _check_domain(kind, x, allow_origin=False)
    h = _residual_step(kind)
    if kind.family is LiouvilleFamily.TRAVELING:
        _, d2 = _stencil(lambda s: float(_traveling(s)), x, h)
        return -d2 - math.exp(float(_traveling(x)))
    t = math.log(x)
    _, d2 = _stencil(lambda tt: _log_radius_value(kind, tt), t, h)
    return -math.exp(-2.0 * t) * d2 - math.exp(_log_radius_value(kind, t))


def mass_closed_form(kind: ProfileKind) -> float:
    """Analytic value of the mass integral."""
    if kind.family is LiouvilleFamily.BUBBLE:
        return 4.0
    if kind.family is LiouvilleFamily.ANNULAR:
        return 2.0 * kind.alpha
    if kind.family is LiouvilleFamily.TRAVELING:
        return 2.0 * SQRT2
    return 2.0 * SQRT2 / abs(kind.delta)


def _mass_layout(kind: ProfileKind) -> Tuple[float, float, float, float]:
    """(left anchor, right anchor, left decay rate, right decay rate) of the integrand."""
    if kind.family is LiouvilleFamily.BUBBLE:
        center = 0.5 * math.log(8.0)
        return center, center, 2.0, 2.0
    if kind.family is LiouvilleFamily.ANNULAR:
        alpha, log_m = kind.alpha, math.log(kind.m)
        # transition of the denominator from its m-term to its s-term
        log_cross = log_m + (math.log(alpha + 2.0) - math.log(alpha - 2.0)) / alpha
        return log_m, log_cross, alpha, alpha
    if kind.family is LiouvilleFamily.TRAVELING:
        return 0.0, 0.0, SQRT2, SQRT2
    rate = SQRT2 / abs(kind.delta)
    return kind.y, kind.y, rate, rate


def mass(kind: ProfileKind, tol: float = MASS_TOL) -> float:
    """
    Mass integral of a profile by adaptive quadrature.

    Radial families return int_0^inf e^z r dr, computed as int e^{z + 2t} dt
    in t = log r; the traveling solution returns int_R e^z ds. The integrand
    decays exponentially at both ends, so a finite window plus the
    exponential tail bound g(end)/rate is exact to roundoff.

    Raises:
        QuadratureNonConvergence: quad error estimate above tol
    """
    if kind.radial:
        def integrand(t: float) -> float:
            return math.exp(_log_radius_value(kind, t) + 2.0 * t)
    else:
        def integrand(t: float) -> float:
            return math.exp(float(_traveling(t)))

    left, right, rate_lo, rate_hi = _mass_layout(kind)
    lo = left - MASS_WINDOW / rate_lo
    hi = right + MASS_WINDOW / rate_hi
    points = sorted({left, right})
    value, abserr = integrate.quad(integrand, lo, hi, points=points, epsabs=tol, epsrel=tol, limit=400)
    tails = integrand(lo) / rate_lo + integrand(hi) / rate_hi
    if abserr > 10.0 * max(tol, tol * abs(value)):
        raise QuadratureNonConvergence(
            f"mass of {kind.label()} reached only {abserr:.3e}",
            family=kind.family.value,
            abserr=abserr,
            tol=tol,
        )
    logger.debug(f"Mass of {kind.label()}: {value + tails:.15g} (tail {tails:.2e})")
    return value + tails
