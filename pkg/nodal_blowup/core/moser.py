"""
Moser functions, logarithmic cutoffs and the assembled test function w.

Radii are never exponentiated: every piece is described in rho = log r,
where Moser functions and cutoffs are piecewise linear. Planar integrals use
dx = 2 pi e^{2 rho} d rho and the Dirichlet energy is 2 pi int (dw/drho)^2.
Constant stretches (plateaus) are integrated in closed form, so an
underflowing measure e^{2 log l} contributes exactly zero.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import integrate, optimize

from .energy import RadialFunction, guarded_exp, nehari_log_density, potential_log_density
from .exceptions import (
    LogOverflow,
    NoRoot,
    OverflowGuard,
    PreconditionError,
    QuadratureNonConvergence,
)
from .nonlinearity import NonlinearityParams, get_nonlinearity
from .shooting import NodalSolution

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
LOG_PI = math.log(math.pi)
# Projection coefficient and energy of a piece whose plateau is too deep to represent
ANALYTIC_T = math.sqrt(4.0 * math.pi)
ANALYTIC_ENERGY = 2.0 * math.pi

T_MIN = 1e-6
MAX_EXPANSIONS = 200
PROJECTION_RTOL = 1e-10
QUAD_EPSABS = 1e-14
QUAD_EPSREL = 1e-12
MAX_ASSEMBLY_K = 3
GROUND_BREAKPOINTS = 200


def _check_pair(log_l: float, log_R: float) -> None:
    if not (log_l < log_R <= 0.0) or math.isnan(log_l):
        raise PreconditionError(f"need log_l < log_R <= 0, got ({log_l}, {log_R})", log_l=log_l, log_R=log_R)


def moser_value(log_l: float, log_R: float, log_r: float) -> float:
    """m_{l,R} at r = e^{log_r}."""
    _check_pair(log_l, log_R)
    width = log_R - log_l
    if log_r <= log_l:
        return math.sqrt(width / TWO_PI)
    if log_r >= log_R:
        return 0.0
    return (log_R - log_r) / math.sqrt(TWO_PI * width)


def cutoff_value(log_l: float, log_R: float, log_r: float) -> float:
    """phi_{l,R} at r = e^{log_r}: 0 inside l, linear in log r, 1 beyond R."""
    _check_pair(log_l, log_R)
    if log_r <= log_l:
        return 0.0
    if log_r >= log_R:
        return 1.0
    return (log_r - log_l) / (log_R - log_l)


class LevelParams(BaseModel):
    """log l_i, log R_i, log p_i of one level; -inf marks an unrepresentable value."""

    model_config = ConfigDict(frozen=True)

    index: int
    log_l: float
    log_R: float
    log_p: float

    @property
    def overflowed(self) -> bool:
        return not math.isfinite(self.log_l)


def _neg_exp(x: float, strict: bool, what: str) -> float:
    """-e^{x}, or -inf when it does not fit in a double."""
    try:
        return -math.exp(x)
    except OverflowError:
        if strict:
            raise LogOverflow(f"{what} = -e^{x:.6g} is beyond double range", exponent=x)
        logger.warning(f"{what} = -e^{x:.6g} overflows; using the analytic limit for this level")
        return -math.inf


def nested_params(k: int, log_R_k: float, strict: bool = False) -> List[LevelParams]:
    """
    Nested scales l_i < R_i < p_i < l_{i+1}, built downward from R_k.

    l_i = e^{-1/R_i}, p_{i-1} = l_i^2, R_{i-1} = p_{i-1} e^{-1/l_i} and p_k = 1.

    Args:
        k: Number of Moser levels
        log_R_k: log R_k < 0
        strict: Raise LogOverflow instead of marking a level with -inf

    Returns:
        Levels ordered i = 1..k
    """
    if k < 1:
        raise PreconditionError(f"need k >= 1, got {k}", k=k)
    if not log_R_k < 0.0:
        raise PreconditionError(f"need log_R_k < 0, got {log_R_k}", log_R_k=log_R_k)

    levels = []
    log_R, log_p = log_R_k, 0.0
    for i in range(k, 0, -1):
        if math.isfinite(log_R):
            log_l = _neg_exp(-log_R, strict, f"log l_{i}")
        else:
            log_l = -math.inf
        levels.append(LevelParams(index=i, log_l=log_l, log_R=log_R, log_p=log_p))
        if i == 1:
            break
        log_p = 2.0 * log_l
        if math.isfinite(log_l):
            # log R_{i-1} = log p_{i-1} - e^{-log l_i}
            log_R = log_p + _neg_exp(-log_l, strict, f"log R_{i - 1} increment")
        else:
            log_R = -math.inf
    levels.reverse()
    _check_ordering(levels)
    return levels


def _check_ordering(levels: Sequence[LevelParams]) -> None:
    chain: List[float] = []
    for level in levels:
        chain.extend([level.log_l, level.log_R, level.log_p])
    finite = [x for x in chain if math.isfinite(x)]
    if any(b <= a for a, b in zip(finite[:-1], finite[1:])):
        raise PreconditionError("nested scales are not strictly increasing", chain=finite)


def cutoff_overlap_closed_form(log_l_i: float, log_R_i: float, log_R_prev: float, log_p_prev: float) -> float:
    """log(R_i / l_i) / log(p_{i-1} / R_{i-1})."""
    return (log_R_i - log_l_i) / (log_p_prev - log_R_prev)


def _quad(func, lo: float, hi: float, what: str, points: Optional[List[float]] = None) -> float:
    limit = 50 * (len(points or []) + 1) + 200
    value, abserr = integrate.quad(func, lo, hi, points=points or None, epsabs=QUAD_EPSABS,
                                   epsrel=QUAD_EPSREL, limit=limit)
    if abserr > 10.0 * max(QUAD_EPSABS, QUAD_EPSREL * abs(value), 1e-12):
        raise QuadratureNonConvergence(f"{what} reached only {abserr:.3e}", lo=lo, hi=hi, abserr=abserr)
    return value


class MoserPiece:
    """
    c * phi_{a,b} m_{l,R} in log-radius, or c * m_{l,R} when no inner cutoff is given.

    With a cutoff the support is [a, log R]: a linear ramp on [a, b], the
    plateau on [b, log l] and the Moser slope on [log l, log R].
    """

    def __init__(self, log_l: float, log_R: float, log_a: Optional[float] = None,
                 log_b: Optional[float] = None, factor: float = 1.0):
        _check_pair(log_l, log_R)
        if (log_a is None) != (log_b is None):
            raise PreconditionError("cutoff needs both inner scales")
        if log_a is not None and not (log_a < log_b < log_l):
            raise PreconditionError(
                "cutoff scales must satisfy a < b < l",
                log_a=log_a,
                log_b=log_b,
                log_l=log_l,
            )
        self.log_l = log_l
        self.log_R = log_R
        self.log_a = log_a
        self.log_b = log_b
        self.factor = factor
        self.width = log_R - log_l
        self.plateau = math.sqrt(self.width / TWO_PI)

    def scale(self, c: float) -> "MoserPiece":
        return type(self)(self.log_l, self.log_R, self.log_a, self.log_b, self.factor * c)

    @property
    def support(self) -> Tuple[float, float]:
        """(inner, outer) log radius of the support; -inf when the plateau reaches the origin."""
        return (-math.inf if self.log_a is None else self.log_a), self.log_R

    def _base(self, log_r: float) -> float:
        base = moser_value(self.log_l, self.log_R, log_r)
        if self.log_a is not None:
            base *= cutoff_value(self.log_a, self.log_b, log_r)
        return base

    def value(self, log_r: float) -> float:
        return self.factor * self._base(log_r)

    def _sampled_energy(self, lo: float, hi: float, what: str) -> float:
        """2 pi int (dw/drho)^2 over [lo, hi] from difference quotients of the unscaled piece."""
        h = 1e-3 * (hi - lo)

        def integrand(rho: float) -> float:
            left, right = max(rho - h, lo), min(rho + h, hi)
            slope = (self._base(right) - self._base(left)) / (right - left)
            return slope * slope

        return TWO_PI * _quad(integrand, lo, hi, what, [lo + h, hi - h])

    def _slope_dirichlet(self) -> float:
        return self._sampled_energy(self.log_l, self.log_R, "Moser slope energy")

    def overlap_energy(self) -> float:
        """Dirichlet energy of the unscaled piece on its cutoff ramp."""
        if self.log_a is None:
            return 0.0
        return self._sampled_energy(self.log_a, self.log_b, "cutoff ramp energy")

    def dirichlet(self) -> float:
        return self.factor**2 * (self._slope_dirichlet() + self.overlap_energy())

    def planar_integral(self, log_density) -> float:
        c, top = self.factor, self.factor * self.plateau
        total = 0.0

        if self.log_a is None:
            # disk of radius l: pi l^2 * density
            total += guarded_exp(LOG_PI + 2.0 * self.log_l + log_density(top), "Moser plateau")
        else:
            ramp = self.log_b - self.log_a

            def ramp_integrand(rho: float) -> float:
                return guarded_exp(log_density(top * (rho - self.log_a) / ramp) + 2.0 * rho, "cutoff ramp")

            total += TWO_PI * _quad(ramp_integrand, self.log_a, self.log_b, "cutoff ramp")
            # annulus b < log r < log l: pi (l^2 - b^2) * density
            shell = math.log(-math.expm1(2.0 * (self.log_b - self.log_l)))
            total += guarded_exp(LOG_PI + 2.0 * self.log_l + shell + log_density(top), "Moser plateau")

        def slope_integrand(rho: float) -> float:
            v = c * (self.log_R - rho) / math.sqrt(TWO_PI * self.width)
            return guarded_exp(log_density(v) + 2.0 * rho, "Moser slope")

        total += TWO_PI * _quad(slope_integrand, self.log_l, self.log_R, "Moser slope")
        return total


class GroundPiece:
    """c * phi_{R,1} u0 in log-radius, supported on [log R, 0]."""

    def __init__(self, ground: NodalSolution, log_R: float, factor: float = 1.0):
        if not log_R < 0.0:
            raise PreconditionError(f"need log_R < 0, got {log_R}", log_R=log_R)
        self.ground = ground
        self.log_R = log_R
        self.factor = factor
        self._points = ground.profile.breakpoints(log_R, 0.0, GROUND_BREAKPOINTS)

    def scale(self, c: float) -> "GroundPiece":
        return GroundPiece(self.ground, self.log_R, self.factor * c)

    @property
    def support(self) -> Tuple[float, float]:
        return self.log_R, 0.0

    def _cutoff(self, rho: float) -> float:
        return 1.0 - rho / self.log_R

    def value(self, log_r: float) -> float:
        if log_r <= self.log_R:
            return 0.0
        return self.factor * self._cutoff(log_r) * self.ground.profile.state(min(log_r, 0.0))[0]

    def dirichlet(self) -> float:
        def integrand(rho: float) -> float:
            u, w = self.ground.profile.state(rho)
            slope = -u / self.log_R + self._cutoff(rho) * w
            return slope * slope

        return TWO_PI * self.factor**2 * _quad(integrand, self.log_R, 0.0, "ground piece energy", self._points)

    def planar_integral(self, log_density) -> float:
        def integrand(rho: float) -> float:
            v = self.factor * self._cutoff(rho) * self.ground.profile.state(rho)[0]
            return guarded_exp(log_density(v) + 2.0 * rho, "ground piece")

        return TWO_PI * _quad(integrand, self.log_R, 0.0, "ground piece", self._points)


def moser_dirichlet(log_l: float, log_R: float) -> float:
    """Numerical Dirichlet norm of m_{l,R} in log-radius."""
    return MoserPiece(log_l, log_R).dirichlet()


def cutoff_overlap_energy(log_l_i: float, log_R_i: float, log_R_prev: float, log_p_prev: float) -> float:
    """Numerical energy of phi_{R_prev, p_prev} m_{l_i, R_i} on the cutoff ramp."""
    return MoserPiece(log_l_i, log_R_i, log_R_prev, log_p_prev).overlap_energy()


def nehari_gap(w: RadialFunction, p: NonlinearityParams, t: float) -> float:
    """t^2 |grad w|^2 - int f(t w) t w."""
    nl = get_nonlinearity(p)
    return t * t * (w.dirichlet() - w.planar_integral(nehari_log_density(nl, t)))


def nehari_project(w: RadialFunction, p: NonlinearityParams, rtol: float = PROJECTION_RTOL) -> float:
    """
    The t > 0 with t w on the Nehari manifold.

    Roots of D - int lambda w^2 e^{E(t w)} are bracketed from [1e-6, 1], the
    upper end doubled until the sign changes and pulled back toward the last
    positive point when the overflow guard fires.

    Raises:
        PreconditionError: Dirichlet norm not finite and positive
        NoRoot: The sign change lies beyond the overflow guard
    """
    dirichlet = w.dirichlet()
    if not (math.isfinite(dirichlet) and dirichlet > 0.0):
        raise PreconditionError(f"Dirichlet norm must be finite and positive, got {dirichlet}", dirichlet=dirichlet)
    nl = get_nonlinearity(p)

    def reduced(t: float) -> float:
        return dirichlet - w.planar_integral(nehari_log_density(nl, t))

    lo, hi = T_MIN, 1.0
    for _ in range(MAX_EXPANSIONS):
        try:
            value = reduced(hi)
        except OverflowGuard:
            if hi - lo <= 1e-9 * hi:
                raise NoRoot(
                    "overflow guard reached before the Nehari functional changed sign",
                    t_lo=lo,
                    t_hi=hi,
                    guard=nl.guard,
                )
            hi = 0.5 * (lo + hi)
            continue
        if value <= 0.0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NoRoot("Nehari bracket expansion did not terminate", t_lo=lo, t_hi=hi)

    t = optimize.brentq(reduced, lo, hi, xtol=1e-15, rtol=rtol, maxiter=500)
    logger.debug(f"Nehari projection t={t:.12g} (bracket [{lo:.3g}, {hi:.3g}])")
    return t


class MoserAssembly(BaseModel):
    """The projected test function w = sum t_i w_i and its energy split."""

    model_config = ConfigDict(frozen=True)

    k: int
    params: NonlinearityParams
    log_params: List[LevelParams]
    t: List[float]
    dirichlet: List[float]
    region_energies: List[float]
    analytic: List[bool]
    cutoff_overlaps: List[float] = Field(default_factory=list)
    total_energy: float
    total_dirichlet: float

    def to_dict(self) -> dict:
        data = self.model_dump(mode="json", by_alias=True)
        # -inf markers are not valid JSON numbers
        data["log_params"] = [
            {key: (value if not isinstance(value, float) or math.isfinite(value) else None)
             for key, value in level.items()}
            for level in data["log_params"]
        ]
        return data


def build_pieces(levels: Sequence[LevelParams], ground: NodalSolution) -> List[Union[MoserPiece, GroundPiece, None]]:
    """w_1 .. w_{k+1} without signs; None marks a level beyond double range."""
    pieces: List[Union[MoserPiece, GroundPiece, None]] = []
    for j, level in enumerate(levels):
        if level.overflowed:
            pieces.append(None)
        elif j == 0:
            pieces.append(MoserPiece(level.log_l, level.log_R))
        else:
            previous = levels[j - 1]
            pieces.append(MoserPiece(level.log_l, level.log_R, previous.log_R, previous.log_p))
    pieces.append(GroundPiece(ground, levels[-1].log_R))
    return pieces


def assemble_w(k: int, log_R_k: float, p: NonlinearityParams, u0: NodalSolution,
               strict: bool = False) -> MoserAssembly:
    """
    Project every piece onto the Nehari manifold and add up the energies.

    Pieces whose scales overflow are given t = sqrt(4 pi) and energy 2 pi.

    Raises:
        PreconditionError: k outside 1..3 or u0 not a ground solution at p.lam
        NoRoot: A projection failed
        LogOverflow: Only when strict
    """
    if not 1 <= k <= MAX_ASSEMBLY_K:
        raise PreconditionError(f"assembly supports 1 <= k <= {MAX_ASSEMBLY_K}, got {k}", k=k)
    if u0.k != 0 or abs(u0.params.lam - p.lam) > 1e-12:
        raise PreconditionError("u0 must be the ground solution at the same lambda",
                                u0_k=u0.k, u0_lambda=u0.params.lam, lam=p.lam)
    levels = nested_params(k, log_R_k, strict=strict)
    nl = get_nonlinearity(p)
    ts, dirichlets, energies, analytic, overlaps = [], [], [], [], []
    for i, piece in enumerate(build_pieces(levels, u0), start=1):
        if piece is None:
            ts.append(ANALYTIC_T)
            dirichlets.append(1.0)
            energies.append(ANALYTIC_ENERGY)
            analytic.append(True)
            continue
        t = nehari_project(piece, p)
        scaled = piece.scale(t)
        dirichlet = piece.dirichlet()
        energy = t * t * dirichlet / 2.0 - scaled.planar_integral(potential_log_density(nl))
        ts.append(t)
        dirichlets.append(dirichlet)
        energies.append(energy)
        analytic.append(False)
        if isinstance(piece, MoserPiece) and piece.log_a is not None:
            overlaps.append(piece.overlap_energy())
        logger.info(f"Piece {i}/{k + 1}: t={t:.10g}, energy={energy:.10g}")

    total = float(sum(energies))
    total_dirichlet = float(sum(t * t * d for t, d in zip(ts, dirichlets)))
    return MoserAssembly(
        k=k,
        params=p,
        log_params=levels,
        t=ts,
        dirichlet=dirichlets,
        region_energies=energies,
        analytic=analytic,
        cutoff_overlaps=overlaps,
        total_energy=total,
        total_dirichlet=total_dirichlet,
    )


def sample_assembly(assembly: MoserAssembly, ground: NodalSolution, log_r: np.ndarray) -> np.ndarray:
    """Values of w = sum (-1)^{i-1} t_i w_i on a log-radius grid (analytic levels read as zero)."""
    pieces = build_pieces(assembly.log_params, ground)
    out = np.zeros_like(np.asarray(log_r, dtype=float))
    for i, (piece, t) in enumerate(zip(pieces, assembly.t), start=1):
        if piece is None:
            continue
        sign = 1.0 if i % 2 == 1 else -1.0
        out += sign * t * np.array([piece.value(x) for x in np.atleast_1d(log_r)])
    return out
