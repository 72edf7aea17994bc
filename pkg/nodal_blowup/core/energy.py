"""
Dirichlet energy, the functional I and Nehari residuals in radial coordinates.

Planar integrals over B are reduced to 2*pi * int g(u) r^2 dt in log-radius
t = log r, the variable the profiles are integrated in. Nonnegative densities
are passed around as log-densities so that tall plateaus and vanishing
measures combine without overflow; the overflow guard applies to the
combined exponent, measure included.
"""

import logging
import math
from typing import Callable, List, Optional, Protocol, Sequence, Tuple

from pydantic import BaseModel, ConfigDict
from scipy import integrate

from .config import config
from .exceptions import OverflowGuard, PreconditionError, QuadratureNonConvergence
from .nonlinearity import Nonlinearity, NonlinearityParams, get_nonlinearity
from .radial_ode import RadialProfile

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
ENERGY_TOL = 1e-9
ENERGY_EPSREL = 1e-11

LogDensity = Callable[[float], float]


class RegionEnergy(BaseModel):
    """Energies of u restricted to one nodal region."""

    model_config = ConfigDict(frozen=True)

    region_index: int
    r_lo: float
    r_hi: float
    log_lo: float
    log_hi: float
    dirichlet: float
    potential: float
    functional: float
    nehari_residual: float

    @classmethod
    def build(cls, region_index: int, log_lo: float, log_hi: float, dirichlet: float,
              potential: float, nehari_term: float) -> "RegionEnergy":
        return cls(
            region_index=region_index,
            r_lo=math.exp(log_lo),
            r_hi=math.exp(log_hi),
            log_lo=log_lo,
            log_hi=log_hi,
            dirichlet=dirichlet,
            potential=potential,
            functional=dirichlet / 2.0 - potential,
            nehari_residual=dirichlet - nehari_term,
        )

    @property
    def relative_nehari(self) -> float:
        if self.dirichlet == 0.0:
            return abs(self.nehari_residual)
        return abs(self.nehari_residual) / self.dirichlet

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")


class RadialFunction(Protocol):
    """A radial function on B that can be integrated against the plane measure."""

    def dirichlet(self) -> float:
        """int_B |grad w|^2."""
        ...

    def planar_integral(self, log_density: LogDensity) -> float:
        """int_B exp(log_density(w(x))) dx for a nonnegative density."""
        ...

    def scale(self, c: float) -> "RadialFunction":
        ...


def log_of(value: float) -> float:
    return math.log(value) if value > 0.0 else -math.inf


def guarded_exp(value: float, what: str = "integrand") -> float:
    """exp(value), refusing exponents above the configured overflow guard."""
    if not value <= config.overflow_guard:
        raise OverflowGuard(
            f"{what} exponent {value:.3f} exceeds guard {config.overflow_guard:g}",
            exponent=value,
            guard=config.overflow_guard,
        )
    return math.exp(value)


def potential_log_density(nl: Nonlinearity) -> LogDensity:
    """v -> log F(v)."""
    return nl.log_F


def nehari_log_density(nl: Nonlinearity, t: float = 1.0) -> LogDensity:
    """v -> log(lambda v^2 e^{E(t v)}), the Nehari density f(t v) t v / t^2."""
    log_lam = nl.log_coefficient

    def density(v: float) -> float:
        if v == 0.0:
            return -math.inf
        return log_lam + 2.0 * math.log(abs(v)) + nl.exponent(t * v)

    return density


def _checked_quad(func, lo: float, hi: float, points: Optional[List[float]], tol: float, what: str) -> float:
    limit = 50 * (len(points or []) + 1)
    value, abserr = integrate.quad(func, lo, hi, points=points or None, epsabs=tol,
                                   epsrel=ENERGY_EPSREL, limit=limit)
    if abserr > 10.0 * max(tol, ENERGY_EPSREL * abs(value)):
        raise QuadratureNonConvergence(
            f"{what} on [{lo:.6g}, {hi:.6g}] reached only {abserr:.3e}",
            lo=lo,
            hi=hi,
            abserr=abserr,
            tol=tol,
        )
    return value


class ProfileRegion:
    """
    Handle on c * u restricted to log r in (log_lo, log_hi) and extended by zero.

    A region reaching the origin has log_lo = -inf; its integrals run from the
    first integrator node, below which every integrand grows like r^2 or r^4
    and the remainder is added in closed form.
    """

    def __init__(self, profile: RadialProfile, log_lo: float, log_hi: float,
                 factor: float = 1.0, tol: float = ENERGY_TOL):
        if math.isnan(log_lo) or not log_lo < log_hi <= profile.log_r_end + 1e-12:
            raise PreconditionError(
                f"region log r in [{log_lo}, {log_hi}] is not inside [-inf, {profile.log_r_end}]",
                log_lo=log_lo,
                log_hi=log_hi,
            )
        self.profile = profile
        self.log_lo = log_lo
        self.log_hi = min(log_hi, profile.log_r_end)
        self.factor = factor
        self.tol = tol
        self._start = max(log_lo, float(profile.log_nodes[1])) if len(profile.log_nodes) > 1 else log_lo
        if self._start >= self.log_hi:
            self._start = log_lo if math.isfinite(log_lo) else self.log_hi - 1.0
        self._points = profile.breakpoints(self._start, self.log_hi)

    @classmethod
    def from_radii(cls, profile: RadialProfile, r_lo: float, r_hi: float, **kwargs) -> "ProfileRegion":
        with_origin = -math.inf if r_lo == 0.0 else math.log(r_lo)
        return cls(profile, with_origin, math.log(r_hi), **kwargs)

    @property
    def r_lo(self) -> float:
        return math.exp(self.log_lo)

    @property
    def r_hi(self) -> float:
        return math.exp(self.log_hi)

    @property
    def support(self) -> Tuple[float, float]:
        """(log_lo, log_hi) of the region."""
        return self.log_lo, self.log_hi

    def scale(self, c: float) -> "ProfileRegion":
        return ProfileRegion(self.profile, self.log_lo, self.log_hi, self.factor * c, self.tol)

    def _integral(self, integrand: Callable[[float], float], tail_power: float, what: str) -> float:
        raw = _checked_quad(integrand, self._start, self.log_hi, self._points, self.tol / TWO_PI, what)
        if self._start > self.log_lo:
            raw += integrand(self._start) / tail_power
        return TWO_PI * raw

    def dirichlet(self) -> float:
        def integrand(t: float) -> float:
            return self.profile.state(t)[1] ** 2

        return self.factor**2 * self._integral(integrand, 4.0, "Dirichlet energy")

    def planar_integral(self, log_density: LogDensity) -> float:
        def integrand(t: float) -> float:
            value = log_density(self.factor * self.profile.state(t)[0])
            if value == -math.inf:
                return 0.0
            return guarded_exp(value + 2.0 * t, "planar integral")

        return self._integral(integrand, 2.0, "planar integral")

    def nehari_term(self, nl: Nonlinearity) -> float:
        """int f(u) u over the region, with r^2 f(u) taken from the profile's log forcing."""
        if self.factor != 1.0:
            return self.planar_integral(nehari_log_density(nl))

        def integrand(t: float) -> float:
            u = self.profile.state(t)[0]
            if u == 0.0:
                return 0.0
            return guarded_exp(self.profile.log_forcing(t) + math.log(abs(u)), "Nehari term")

        return self._integral(integrand, 2.0, "Nehari term")

    def potential(self, nl: Nonlinearity) -> float:
        """int F(u) over the region, as r^2 |f(u)| times F/|f|."""
        if self.factor != 1.0:
            return self.planar_integral(potential_log_density(nl))

        def integrand(t: float) -> float:
            u = self.profile.state(t)[0]
            if u == 0.0:
                return 0.0
            return guarded_exp(self.profile.log_forcing(t), "potential") * nl.primitive_ratio(u)

        return self._integral(integrand, 2.0, "potential")


def _log_bound(r: float) -> float:
    return -math.inf if r == 0.0 else math.log(r)


def region_energy(
    profile: RadialProfile,
    p: NonlinearityParams,
    r_lo: float,
    r_hi: float,
    tol: float = ENERGY_TOL,
    region_index: int = 1,
) -> RegionEnergy:
    """
    Energies of the profile restricted to (r_lo, r_hi).

    Args:
        profile: Integrated profile covering [r_lo, r_hi]
        p: Nonlinearity parameters
        r_lo: Inner radius, >= 0
        r_hi: Outer radius, <= the profile's r_max
        tol: Absolute quadrature tolerance
        region_index: Index recorded in the result (1 = innermost)

    Raises:
        PreconditionError: Bad interval
        QuadratureNonConvergence: Quadrature could not reach tol
    """
    if not 0.0 <= r_lo < r_hi <= profile.r_max:
        raise PreconditionError(
            f"need 0 <= r_lo < r_hi <= r_max, got [{r_lo}, {r_hi}] with r_max={profile.r_max}",
            r_lo=r_lo,
            r_hi=r_hi,
        )
    return log_region_energy(profile, p, _log_bound(r_lo), math.log(r_hi), tol, region_index)


def log_region_energy(
    profile: RadialProfile,
    p: NonlinearityParams,
    log_lo: float,
    log_hi: float,
    tol: float = ENERGY_TOL,
    region_index: int = 1,
) -> RegionEnergy:
    """region_energy with the region given by log radii, for regions whose radii underflow."""
    if math.isnan(log_lo) or not log_lo < log_hi <= profile.log_r_max + 1e-12:
        raise PreconditionError(
            f"need log_lo < log_hi <= log r_max, got [{log_lo}, {log_hi}]",
            log_lo=log_lo,
            log_hi=log_hi,
        )
    nl = get_nonlinearity(p)
    region = ProfileRegion(profile, log_lo, log_hi, tol=tol)
    dirichlet = region.dirichlet()
    potential = region.potential(nl)
    nehari_term = region.nehari_term(nl)
    return RegionEnergy.build(region_index, log_lo, region.log_hi, dirichlet, potential, nehari_term)


def nodal_energies(profile: RadialProfile, p: NonlinearityParams, log_radii: Sequence[float],
                   tol: float = ENERGY_TOL) -> List[RegionEnergy]:
    """Region energies over the partition [0, r_1, ..., r_k, r_max], given log r_i."""
    edges = [-math.inf, *log_radii, profile.log_r_max]
    return [
        log_region_energy(profile, p, lo, hi, tol=tol, region_index=i)
        for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:]), start=1)
    ]


def functional_value(w: RadialFunction, p: NonlinearityParams) -> float:
    """I(w) = |grad w|^2 / 2 - int F(w) for any radial function handle."""
    nl = get_nonlinearity(p)
    return w.dirichlet() / 2.0 - w.planar_integral(potential_log_density(nl))
