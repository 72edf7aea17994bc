"""
Shooting on the initial amplitude for the nodal Dirichlet problem on the unit disk.

Interior zeros of u(.; a) can only enter or leave (0, 1) through r = 1, so
the solution with exactly k interior zeros and u(1) = 0 sits where the count
on (0, 1) first rises above k. The amplitude is scanned upward on a geometric
grid until that happens and the flip is then refined by bisection.
"""

import logging
import math
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import optimize

from .config import config
from .energy import RegionEnergy, nodal_energies
from .exceptions import NoBracket, PreconditionError, StepSizeUnderflow, Stiffness
from .nonlinearity import LAMBDA_1, Family, NonlinearityParams
from .radial_ode import RadialProfile, integrate

logger = logging.getLogger(__name__)

# Coarsest tolerance used while scanning
SCAN_TOL = 1e-8
GROUND_SCAN_MIN = 1e-3
MAX_BISECTIONS = 200
BRANCH = "smallest_amplitude"


class ScanPoint(BaseModel):
    """One amplitude of the scan and what its profile did."""

    model_config = ConfigDict(frozen=True)

    amplitude: float
    zeros: Optional[int] = None
    terminal: Optional[float] = None
    passed: bool = False
    aborted: bool = False
    reason: Optional[str] = None


class RegionRecord(BaseModel):
    """Bookkeeping for the i-th nodal region (r_{i-1}, r_i)."""

    model_config = ConfigDict(frozen=True)

    index: int
    log_lo: float
    log_hi: float
    sign: int
    max_log_radius: float
    amplitude: float
    energy: RegionEnergy

    @property
    def r_lo(self) -> float:
        return math.exp(self.log_lo)

    @property
    def r_hi(self) -> float:
        return math.exp(self.log_hi)

    @property
    def max_radius(self) -> float:
        return math.exp(self.max_log_radius)

    @property
    def dirichlet(self) -> float:
        return self.energy.dirichlet

    @property
    def functional(self) -> float:
        return self.energy.functional

    @property
    def nehari_residual(self) -> float:
        return self.energy.nehari_residual


class SolveMetadata(BaseModel):
    """How a solution was found; kept with the solution for later study."""

    model_config = ConfigDict(frozen=True)

    branch: str = BRANCH
    bracket: Tuple[float, float]
    bisection_steps: int
    scan_tol: float
    tol: float
    boundary_tol: float
    scan: List[ScanPoint] = Field(default_factory=list)


class NodalSolution(BaseModel):
    """A radial solution with k interior zeros and u(1) = 0."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    params: NonlinearityParams
    k: int
    amplitude: float
    profile: RadialProfile
    log_zeros: List[float]
    regions: List[RegionRecord]
    terminal_value: float
    metadata: SolveMetadata

    @property
    def zeros(self) -> List[float]:
        """Interior zeros r_1 < ... < r_k; deep ones underflow to 0.0, see log_zeros."""
        return [math.exp(t) for t in self.log_zeros]

    def region(self, i: int) -> RegionRecord:
        if not 1 <= i <= len(self.regions):
            raise PreconditionError(f"region index {i} outside 1..{len(self.regions)}", i=i)
        return self.regions[i - 1]

    @property
    def total_dirichlet(self) -> float:
        return sum(r.dirichlet for r in self.regions)

    @property
    def total_functional(self) -> float:
        return sum(r.functional for r in self.regions)

    @property
    def max_relative_nehari(self) -> float:
        return max(r.energy.relative_nehari for r in self.regions)

    def to_dict(self, samples: int = 0) -> Dict[str, Any]:
        data = {
            "params": self.params.to_dict(),
            "k": self.k,
            "amplitude": self.amplitude,
            "zeros": self.zeros,
            "log_zeros": list(self.log_zeros),
            "terminal_value": self.terminal_value,
            "regions": [
                {
                    "index": r.index,
                    "sign": r.sign,
                    "max_radius": r.max_radius,
                    "max_log_radius": r.max_log_radius,
                    "amplitude": r.amplitude,
                    **r.energy.to_dict(),
                }
                for r in self.regions
            ],
            "total_dirichlet": self.total_dirichlet,
            "total_functional": self.total_functional,
            "metadata": self.metadata.model_dump(mode="json", exclude={"scan"}),
        }
        if samples:
            data["profile"] = self.profile.samples(samples)
        return data


class CertificationReport(BaseModel):
    """Re-integration of a solution at a tighter tolerance."""

    model_config = ConfigDict(frozen=True)

    tol: float
    zero_shifts: List[float]
    log_zero_shifts: List[float]
    terminal_value: float
    zero_count: int
    max_relative_nehari: float
    passed: bool


def _check_nodal_preconditions(p: NonlinearityParams, k: int) -> None:
    if k < 1:
        raise PreconditionError(f"nodal solutions need k >= 1, got {k}", k=k)
    if not 0.0 < p.eps < 1.0:
        raise PreconditionError(f"nodal solutions need eps in (0, 1), got {p.eps}", eps=p.eps)
    if not 0.0 < p.lam < LAMBDA_1:
        raise PreconditionError(f"lambda must lie in (0, {LAMBDA_1:.10f})", lam=p.lam)


def _amplitude_grid(a_min: float, a_max: float, ratio: float) -> List[float]:
    if not (0.0 < a_min < a_max and ratio > 1.0):
        raise PreconditionError(
            "scan window needs 0 < min < max and ratio > 1",
            a_min=a_min,
            a_max=a_max,
            ratio=ratio,
        )
    n = int(math.floor(math.log(a_max / a_min) / math.log(ratio))) + 1
    return [a_min * ratio**j for j in range(n)]


def _shoot(a: float, p: NonlinearityParams, k: int, tol: float) -> Tuple[ScanPoint, Optional[RadialProfile]]:
    try:
        profile = integrate(a, p, 1.0, tol, max_zeros=k + 1)
    except PreconditionError:
        raise
    except StepSizeUnderflow as exc:
        logger.debug(f"Step size underflow at a={a}: {exc.message}")
        return ScanPoint(amplitude=a, aborted=True, reason="step_size_underflow"), None
    except (ValueError, FloatingPointError) as exc:
        # solver construction refuses non-finite states
        logger.debug(f"Integrator rejected a={a}: {exc}")
        return ScanPoint(amplitude=a, aborted=True, reason="invalid_state"), None
    if profile.aborted:
        return ScanPoint(amplitude=a, aborted=True, reason=profile.abort_reason), profile
    zeros = len(profile.zero_log_radii)
    terminal = None if profile.terminated_early else profile.u(1.0)
    point = ScanPoint(amplitude=a, zeros=zeros, terminal=terminal, passed=zeros > k)
    return point, profile


def _scan(p: NonlinearityParams, k: int, tol: float, window: Dict[str, float]) -> Tuple[float, float, List[ScanPoint]]:
    trace: List[ScanPoint] = []
    previous: Optional[ScanPoint] = None
    for a in _amplitude_grid(window["min"], window["max"], window["ratio"]):
        point, _ = _shoot(a, p, k, tol)
        trace.append(point)
        if point.aborted:
            break
        if previous is not None and not previous.passed and point.passed:
            logger.info(f"Bracket for k={k} found: [{previous.amplitude:.6g}, {a:.6g}]")
            return previous.amplitude, a, trace
        previous = point

    details = {
        "params": p.to_dict(),
        "k": k,
        "scan": [pt.model_dump(mode="json") for pt in trace],
    }
    if trace and trace[-1].aborted:
        raise Stiffness(
            f"integrator aborted at amplitude {trace[-1].amplitude:.6g} before a bracket was found",
            reason=trace[-1].reason,
            **details,
        )
    raise NoBracket(
        f"no amplitude in [{window['min']}, {window['max']}] yields {k} interior zeros with u(1)=0",
        **details,
    )


def _bisect(p: NonlinearityParams, k: int, lo: float, hi: float, tol: float,
            boundary_tol: float) -> Tuple[RadialProfile, int]:
    point, lo_profile = _shoot(lo, p, k, tol)
    if point.aborted or point.passed:
        raise Stiffness(
            "scan bracket is not reproduced at the integrator tolerance",
            lo=lo,
            hi=hi,
            reason=point.reason,
        )
    for step in range(MAX_BISECTIONS):
        if lo_profile is not None:
            count = len(lo_profile.zero_log_radii)
            if count == k and abs(lo_profile.u(1.0)) <= boundary_tol:
                return lo_profile, step
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        point, profile = _shoot(mid, p, k, tol)
        if point.aborted:
            raise Stiffness(
                f"integrator aborted at amplitude {mid:.17g} during bisection",
                reason=point.reason,
                amplitude=mid,
            )
        if point.passed:
            hi = mid
        else:
            lo, lo_profile = mid, profile
    raise Stiffness(
        "bisection stalled before the boundary condition was met",
        lo=lo,
        hi=hi,
        terminal=None if lo_profile is None else lo_profile.u(1.0),
        zeros=None if lo_profile is None else len(lo_profile.zero_log_radii),
    )


def _region_max(profile: RadialProfile, lo: float, hi: float, sign: int) -> Tuple[float, float]:
    """(log radius, |u|) of the extremum inside log r in (lo, hi)."""
    candidates = [t for t in profile.extremum_log_radii if lo < t < hi]
    if candidates:
        values = [abs(profile.state(t)[0]) for t in candidates]
        j = int(np.argmax(values))
        return candidates[j], values[j]
    result = optimize.minimize_scalar(lambda t: -sign * profile.state(t)[0], bounds=(lo, hi),
                                      method="bounded", options={"xatol": 1e-12})
    return float(result.x), abs(profile.state(float(result.x))[0])


def _region_records(profile: RadialProfile, p: NonlinearityParams, log_zeros: List[float]) -> List[RegionRecord]:
    edges = [-math.inf, *log_zeros, 0.0]
    records = []
    for i, energy in enumerate(nodal_energies(profile, p, log_zeros), start=1):
        lo, hi = edges[i - 1], edges[i]
        sign = 1 if i % 2 == 1 else -1
        if i == 1:
            max_log_radius, amplitude = -math.inf, abs(profile.amplitude)
        else:
            max_log_radius, amplitude = _region_max(profile, lo, hi, sign)
        records.append(RegionRecord(index=i, log_lo=lo, log_hi=hi, sign=sign, max_log_radius=max_log_radius,
                                    amplitude=amplitude, energy=energy))
    return records


def _solve(p: NonlinearityParams, k: int, boundary_tol: float, tol: float,
           window: Dict[str, float]) -> NodalSolution:
    scan_tol = max(tol, SCAN_TOL)
    lo, hi, trace = _scan(p, k, scan_tol, window)
    profile, steps = _bisect(p, k, lo, hi, tol, boundary_tol)
    log_zeros = profile.zero_log_radii
    terminal = profile.u(1.0)
    logger.info(
        f"Converged for k={k}, {p.to_dict()} after {steps} bisections: "
        f"a={profile.amplitude:.12g}, u(1)={terminal:.2e}"
    )
    metadata = SolveMetadata(bracket=(lo, hi), bisection_steps=steps, scan_tol=scan_tol, tol=tol,
                             boundary_tol=boundary_tol, scan=trace)
    return NodalSolution(
        params=p,
        k=k,
        amplitude=profile.amplitude,
        profile=profile,
        log_zeros=log_zeros,
        regions=_region_records(profile, p, log_zeros),
        terminal_value=terminal,
        metadata=metadata,
    )


def solve_nodal(
    p: NonlinearityParams,
    k: int,
    boundary_tol: Optional[float] = None,
    *,
    tol: Optional[float] = None,
    scan: Optional[Dict[str, float]] = None,
) -> NodalSolution:
    """
    Radial solution with exactly k interior zeros and u(1) = 0.

    The smallest amplitude in the scan window with this nodal structure is
    returned; the choice is recorded in ``metadata.branch``.

    Args:
        p: Nonlinearity parameters, eps in (0, 1)
        k: Number of interior zeros, >= 1
        boundary_tol: Accepted |u(1)|
        tol: Integrator tolerance for the final profile
        scan: Override for the amplitude window {"min", "max", "ratio"}

    Raises:
        PreconditionError: k, eps or lambda out of range
        NoBracket: The target structure never appears in the window
        Stiffness: The integrator aborted before r = 1
    """
    _check_nodal_preconditions(p, k)
    boundary_tol = config.tolerances["boundary"] if boundary_tol is None else boundary_tol
    tol = config.tolerances["integrator"] if tol is None else tol
    return _solve(p, k, boundary_tol, tol, dict(scan or config.scan))


def solve_ground(
    lam: float,
    family: Family = Family.MT_PLUS,
    boundary_tol: Optional[float] = None,
    *,
    tol: Optional[float] = None,
    scan: Optional[Dict[str, float]] = None,
) -> Tuple[NodalSolution, float]:
    """
    Positive least-energy solution u0 of the eps = 0 problem.

    Returns:
        (solution with k = 0, I0(u0))
    """
    if not 0.0 < lam < LAMBDA_1:
        raise PreconditionError(f"lambda must lie in (0, {LAMBDA_1:.10f}), got {lam}", lam=lam)
    p = NonlinearityParams(lam=lam, eps=0.0, family=family)
    boundary_tol = config.tolerances["boundary"] if boundary_tol is None else boundary_tol
    tol = config.tolerances["integrator"] if tol is None else tol
    window = dict(scan or config.scan)
    if scan is None:
        # the ground branch bifurcates from zero as lambda approaches lambda_1
        window["min"] = min(window["min"], GROUND_SCAN_MIN)
    solution = _solve(p, 0, boundary_tol, tol, window)
    return solution, solution.total_functional


def certify(sol: NodalSolution, factor: float = 0.1) -> CertificationReport:
    """
    Re-integrate from the certified amplitude at a tighter tolerance.

    Passes when every zero moves by less than 10 * boundary_tol, no extra zero
    appears well inside (0, 1), and every region satisfies the Nehari identity
    to the configured relative tolerance.
    """
    tol = max(sol.metadata.tol * factor, 1e-12)
    boundary_tol = sol.metadata.boundary_tol
    profile = integrate(sol.amplitude, sol.params, 1.0, tol)
    log_zeros = profile.zero_log_radii
    # a zero this close to r = 1 is u(1) changing sign within boundary_tol
    slope = abs(sol.profile.du(1.0))
    margin = 10.0 * boundary_tol / max(slope, boundary_tol)
    inner = [t for t in log_zeros if t < math.log1p(-min(margin, 0.5))]
    log_shifts = [abs(a - b) for a, b in zip(log_zeros, sol.log_zeros)]
    shifts = [abs(math.exp(a) - math.exp(b)) for a, b in zip(log_zeros, sol.log_zeros)]
    nehari = sol.max_relative_nehari
    passed = (
        profile.complete
        and len(inner) == sol.k
        and len(log_zeros) >= sol.k
        and all(s < 10.0 * boundary_tol for s in shifts)
        and nehari < config.tolerances["nehari"]
    )
    report = CertificationReport(tol=tol, zero_shifts=shifts, log_zero_shifts=log_shifts,
                                 terminal_value=profile.u(1.0), zero_count=len(inner),
                                 max_relative_nehari=nehari, passed=passed)
    if not passed:
        logger.warning(f"Certification failed for k={sol.k}, {sol.params.to_dict()}: {report.model_dump()}")
    return report
