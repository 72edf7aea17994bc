"""
Blow-up diagnostics extracted from a nodal solution.

For region i with sup-norm M attained at c and outer edge r_i (r_{k+1} = 1)
the scale gamma solves 2 lambda r_i^2 M^2 e^{E(M)} gamma^2 = 1, delta is
gamma * r_i, and the rescaled profile 2M(|u(c + delta rho)| - M) is compared
against the Liouville bubble.
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from .exceptions import PreconditionError, RegionTooNarrow
from .liouville import bubble
from .nonlinearity import get_nonlinearity
from .shooting import NodalSolution

logger = logging.getLogger(__name__)

DEFAULT_RHO_MAX = 5.0
DEFAULT_SAMPLES = 200
RADIAL_LEMMA_SAMPLES = 2001
LOG_FLOAT_MAX = 700.0


class BubbleReport(BaseModel):
    """Rescaled view of one nodal region."""

    model_config = ConfigDict(frozen=True)

    region_index: int
    max_radius: float
    max_log_radius: float
    amplitude: float
    gamma: float
    log_gamma: float
    delta: float
    log_delta: float
    rho_max: float
    truncated: bool = False
    window: List[Tuple[float, float]]
    sup_deviation: float
    flux_at_outer_zero: Optional[float] = None

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")


class QuantizationGaps(BaseModel):
    """Distance of the total energies from the quantized limits."""

    model_config = ConfigDict(frozen=True)

    k: int
    dirichlet_gap: float
    functional_gap: float


def log_gamma_from(lam: float, log_r_outer: float, amplitude: float, exponent: float) -> float:
    """log gamma with 2 lam r^2 M^2 e^{exponent} gamma^2 = 1, given log r."""
    return -0.5 * (math.log(2.0) + math.log(lam) + 2.0 * log_r_outer
                   + 2.0 * math.log(amplitude) + exponent)


def _region_scaling(sol: NodalSolution, i: int) -> Tuple[float, float]:
    """(log gamma, log delta) of region i."""
    region = sol.region(i)
    if region.amplitude <= 0.0:
        raise PreconditionError(f"region {i} is trivial", i=i)
    nl = get_nonlinearity(sol.params)
    log_gamma = log_gamma_from(sol.params.lam, region.log_hi, region.amplitude, nl.exponent(region.amplitude))
    return log_gamma, log_gamma + region.log_hi


def scaling_params(sol: NodalSolution, i: int) -> Tuple[float, float]:
    """(gamma, delta) of region i; both underflow to 0.0 for deep regions."""
    log_gamma, log_delta = _region_scaling(sol, i)
    return math.exp(log_gamma), math.exp(log_delta)


def log_scaling_params(sol: NodalSolution, i: int) -> Tuple[float, float]:
    """(log gamma, log delta) of region i."""
    return _region_scaling(sol, i)


def boundary_flux(sol: NodalSolution) -> float:
    """r_k u'(r_k) at the outermost interior zero."""
    if sol.k < 1:
        raise PreconditionError("boundary flux needs an interior zero (k >= 1)", k=sol.k)
    return float(sol.profile.state(sol.log_zeros[-1])[1])


def rescaled_profile(
    sol: NodalSolution,
    i: int,
    rho_max: float = DEFAULT_RHO_MAX,
    n_samples: int = DEFAULT_SAMPLES,
) -> BubbleReport:
    """
    Sample z(rho) = 2M(sign * u(c + delta rho) - M) on [0, rho_max].

    Radii are formed as log(c + delta rho) so that regions whose delta
    underflows are sampled as well. rho_max is truncated, with a warning,
    when the window leaves the region.

    Raises:
        RegionTooNarrow: Not even one grid step fits inside the region
    """
    if n_samples < 2 or rho_max <= 0.0:
        raise PreconditionError("need rho_max > 0 and at least two samples",
                                rho_max=rho_max, n_samples=n_samples)
    region = sol.region(i)
    log_gamma, log_delta = _region_scaling(sol, i)
    log_c, m = region.max_log_radius, region.amplitude
    log_width = region.log_hi + math.log1p(-math.exp(log_c - region.log_hi))
    available = math.exp(min(log_width - log_delta, LOG_FLOAT_MAX))
    effective, truncated = rho_max, False
    if available < rho_max:
        if available < rho_max / (n_samples - 1):
            raise RegionTooNarrow(
                f"region {i} admits rho <= {available:.3e}, below one sample step",
                region_index=i,
                available=available,
                rho_max=rho_max,
            )
        logger.warning(f"Region {i}: rho_max truncated from {rho_max:g} to {available:.6g}")
        effective, truncated = available, True

    rho = np.linspace(0.0, effective, n_samples)
    with np.errstate(divide="ignore"):
        log_radii = np.minimum(np.logaddexp(log_c, log_delta + np.log(rho)), region.log_hi)
    values = 2.0 * m * (region.sign * sol.profile.state(log_radii)[0] - m)
    values[0] = 0.0
    deviation = float(np.max(np.abs(values - bubble(rho))))
    flux = boundary_flux(sol) if sol.k >= 1 else None
    return BubbleReport(
        region_index=i,
        max_radius=region.max_radius,
        max_log_radius=log_c,
        amplitude=m,
        gamma=math.exp(log_gamma),
        log_gamma=log_gamma,
        delta=math.exp(log_delta),
        log_delta=log_delta,
        rho_max=effective,
        truncated=truncated,
        window=list(zip(rho.tolist(), values.tolist())),
        sup_deviation=deviation,
        flux_at_outer_zero=flux,
    )


def amplitude_ratios(sol: NodalSolution) -> List[float]:
    """Sup-norm of each region over that of the region inside it."""
    return [outer.amplitude / inner.amplitude for inner, outer in zip(sol.regions[:-1], sol.regions[1:])]


def outer_deviation(sol: NodalSolution, ground: NodalSolution, r_min: float = 0.5, n_samples: int = 401) -> float:
    """sup over [r_min, 1] of |u - (-1)^k u0|."""
    if not 0.0 < r_min < 1.0:
        raise PreconditionError(f"r_min must lie in (0, 1), got {r_min}", r_min=r_min)
    r = np.linspace(r_min, 1.0, n_samples)
    sign = -1.0 if sol.k % 2 else 1.0
    return float(np.max(np.abs(sol.profile.u(r) - sign * ground.profile.u(r))))


def quantization_gaps(sol: NodalSolution, ground: NodalSolution) -> QuantizationGaps:
    """Gaps to |grad u0|^2 + 4k pi and I0(u0) + 2k pi."""
    return QuantizationGaps(
        k=sol.k,
        dirichlet_gap=sol.total_dirichlet - ground.total_dirichlet - 4.0 * math.pi * sol.k,
        functional_gap=sol.total_functional - ground.total_functional - 2.0 * math.pi * sol.k,
    )


def radial_lemma_metric(sol: NodalSolution, n_samples: int = RADIAL_LEMMA_SAMPLES) -> float:
    """sup_r sqrt(r) |u(r)| / |grad u|_2; reported only, the bounding constant is not known."""
    grid = np.log(np.linspace(1.0 / n_samples, 1.0, n_samples))
    t = np.unique(np.concatenate([grid, sol.profile.log_nodes[1:], sol.profile.extremum_log_radii]))
    t = t[t <= 0.0]
    values = np.exp(0.5 * t) * np.abs(sol.profile.state(t)[0])
    return float(np.max(values)) / math.sqrt(sol.total_dirichlet)
