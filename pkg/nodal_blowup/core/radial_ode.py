"""
Radial initial value problem for -u'' - u'/r = f(u), u(0) = a, u'(0) = 0.

The problem is integrated in log-radius t = log r with the state (u, w),
w = r u', where it reads

    u_t = w,    w_t = -sign(u) exp(V),    V = log(r^2 |f(u)|) = 2t + log|f(u)|.

Only V is ever exponentiated, so amplitudes whose f(a) is far beyond double
range are integrated as easily as small ones.

Near the origin the solution is a bubble living where r^2 f(a) ~ 1. That
core is integrated in tau = t - t_c, with f(a) e^{2 t_c} = 1, for the scaled
drop zeta = G (a - u) and omega = G (a - u)_tau, G = f'(a)/f(a):

    zeta_tau = omega,    omega_tau = G exp(2 tau + log(u/a) + E(u) - E(a)).

The exponent difference is formed without cancellation, which keeps the
bubble accurate when E(a) is of order 1e8. The first node is placed by the
origin series a - u = q/4 - G q^2/64, q = r^2 f(a), and the outer (u, w)
phase takes over once the bubble has decayed, once u has fallen below a/2,
or at r_max.

Both phases drive scipy's DOP853 step by step so that sign changes of u and
w are located on each step's dense output and so that an overflow-guard
abort still leaves a usable truncated profile.
"""

import logging
import math
from enum import Enum
from typing import Dict, List, Optional, Protocol, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, PrivateAttr
from scipy import optimize
from scipy.integrate import DOP853, OdeSolution

from .config import config
from .exceptions import AbortedProfile, OverflowGuard, PreconditionError, StepSizeUnderflow
from .nonlinearity import NonlinearityParams, get_nonlinearity

logger = logging.getLogger(__name__)

EVENT_XTOL = 1e-12
# r^2 f(a) G at the first node; the series error is of order CORE_DEPTH^2
CORE_DEPTH = 1e-8
# The core ends once V drops below this past the bubble peak
CORE_EXIT = -60.0

ArrayLike = Union[float, np.ndarray]


class Forcing(Protocol):
    """f(s) = sign(s) exp(log_coefficient + log|s| + exponent(s)), in log form."""

    @property
    def log_coefficient(self) -> float: ...

    def exponent(self, s: float) -> float: ...

    def exponent_slope(self, s: float) -> float: ...

    def exponent_drop(self, s: float, d: float) -> float: ...


class LinearHook:
    """Test forcing f(u) = lam * u; solutions are a * J0(sqrt(lam) r)."""

    def __init__(self, lam: float):
        self.lam = lam

    @property
    def log_coefficient(self) -> float:
        return math.log(self.lam)

    def exponent(self, s: float) -> float:
        return 0.0

    def exponent_slope(self, s: float) -> float:
        return 0.0

    def exponent_drop(self, s: float, d: float) -> float:
        return 0.0


class ZeroHook(LinearHook):
    """Test forcing f = 0; solutions are constant."""

    def __init__(self):
        super().__init__(0.0)

    @property
    def log_coefficient(self) -> float:
        return -math.inf


class EventKind(str, Enum):
    ZERO = "zero"
    EXTREMUM = "extremum"


class ProfileEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    log_radius: float
    kind: EventKind

    @property
    def radius(self) -> float:
        return math.exp(self.log_radius)


def _exp_guarded(v: float) -> float:
    if not v <= config.overflow_guard:
        raise OverflowGuard(
            f"log(r^2 f) = {v:.3f} is not below overflow guard {config.overflow_guard:g}",
            exponent=v,
            guard=config.overflow_guard,
        )
    return math.exp(v)


class RadialProfile(BaseModel):
    """
    Dense numerical trajectory of the radial equation.

    Nodes are stored as log radii (the first is -inf, the origin) together
    with u and w = r u'. Radii of deep nodal regions underflow in double
    precision, so every query has a log-radius form.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    params: Optional[NonlinearityParams] = None
    amplitude: float
    r_max: float
    tol: float
    log_nodes: np.ndarray
    values: np.ndarray
    fluxes: np.ndarray
    events: List[ProfileEvent] = []
    aborted: bool = False
    abort_reason: Optional[str] = None
    terminated_early: bool = False

    _forcing: Optional[Forcing] = PrivateAttr(default=None)
    _shift: float = PrivateAttr(default=math.inf)
    _scale: float = PrivateAttr(default=0.0)
    _start: float = PrivateAttr(default=math.inf)
    _core: Optional[OdeSolution] = PrivateAttr(default=None)
    _core_end: float = PrivateAttr(default=math.inf)
    _outer: Optional[OdeSolution] = PrivateAttr(default=None)

    @property
    def log_r_max(self) -> float:
        return math.log(self.r_max)

    @property
    def log_r_end(self) -> float:
        return float(self.log_nodes[-1])

    @property
    def r_end(self) -> float:
        return math.exp(self.log_r_end)

    @property
    def nodes(self) -> np.ndarray:
        return np.exp(self.log_nodes)

    @property
    def derivatives(self) -> np.ndarray:
        """u'(r_j) = w_j / r_j; overflows to +-inf at deep nodes."""
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            out = np.sign(self.fluxes) * np.exp(np.log(np.abs(self.fluxes)) - self.log_nodes)
        out[0] = 0.0
        return out

    @property
    def complete(self) -> bool:
        return not (self.aborted or self.terminated_early)

    @property
    def sign(self) -> float:
        return -1.0 if self.amplitude < 0.0 else 1.0

    @property
    def zero_log_radii(self) -> List[float]:
        return [e.log_radius for e in self.events if e.kind is EventKind.ZERO and e.log_radius < self.log_r_max]

    @property
    def zero_radii(self) -> List[float]:
        return [math.exp(t) for t in self.zero_log_radii]

    @property
    def extremum_log_radii(self) -> List[float]:
        return [e.log_radius for e in self.events if e.kind is EventKind.EXTREMUM]

    @property
    def extremum_radii(self) -> List[float]:
        return [math.exp(t) for t in self.extremum_log_radii]

    def _drop(self, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(a - |u|, its tau-derivative) on the core, from the series below the first node."""
        tau = t - self._shift
        d = np.empty_like(t)
        d_tau = np.empty_like(t)
        series = t < self._start if self._core is not None else np.ones_like(t, dtype=bool)
        q = np.exp(2.0 * tau[series])
        g = self._scale
        d[series] = q / 4.0 - g * q * q / 64.0
        d_tau[series] = q / 2.0 - g * q * q / 16.0
        if not np.all(series):
            y = np.atleast_2d(self._core(tau[~series]).T).T
            d[~series] = y[0] / g
            d_tau[~series] = y[1] / g
        return d, d_tau

    def state(self, log_r: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
        """
        (u, w) at log-radius log_r; -inf is the origin.

        Raises:
            PreconditionError: log_r beyond the integrated range
        """
        t = np.asarray(log_r, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        if np.any(np.isnan(t)) or np.any(t > self.log_r_end + 1e-12):
            raise PreconditionError(
                f"log radius outside profile range [-inf, {self.log_r_end}]",
                log_r_max=float(np.nanmax(t)) if not np.all(np.isnan(t)) else None,
            )
        u = np.empty_like(t)
        w = np.empty_like(t)
        outer = t > self._core_end if self._outer is not None else np.zeros_like(t, dtype=bool)
        core = ~outer
        if np.any(core):
            d, d_tau = self._drop(t[core])
            u[core] = abs(self.amplitude) - d
            w[core] = -d_tau
        if np.any(outer):
            y = np.atleast_2d(self._outer(np.minimum(t[outer], self.log_r_end)).T).T
            u[outer] = y[0]
            w[outer] = y[1]
        u *= self.sign
        w *= self.sign
        if scalar:
            return float(u[0]), float(w[0])
        return u, w

    def log_forcing(self, log_r: float) -> float:
        """V = log(r^2 |f(u(r))|), accurate inside the core as well."""
        if self._forcing is None or not math.isfinite(self._shift):
            return -math.inf
        a = abs(self.amplitude)
        t = float(log_r)
        if self._outer is None or t <= self._core_end:
            d = float(self._drop(np.array([t]))[0][0])
            if d >= a:
                return -math.inf
            return 2.0 * (t - self._shift) + math.log1p(-d / a) + self._forcing.exponent_drop(a, d)
        u, _ = self.state(t)
        if u == 0.0:
            return -math.inf
        return 2.0 * t + self._forcing.log_coefficient + math.log(abs(u)) + self._forcing.exponent(u)

    def evaluate(self, r: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
        """(u, u') at radius r in [0, r_end]."""
        r_arr = np.asarray(r, dtype=float)
        scalar = r_arr.ndim == 0
        r_arr = np.atleast_1d(r_arr)
        if np.any(r_arr < 0.0) or np.any(r_arr > self.r_end * (1.0 + 1e-12)):
            raise PreconditionError(
                f"radius outside profile range [0, {self.r_end}]",
                r_min=float(r_arr.min()),
                r_max=float(r_arr.max()),
            )
        with np.errstate(divide="ignore"):
            t = np.log(r_arr)
        u, w = self.state(t)
        du = np.zeros_like(r_arr)
        inside = r_arr > 0.0
        du[inside] = w[inside] / r_arr[inside]
        if scalar:
            return float(u[0]), float(du[0])
        return u, du

    def u(self, r: ArrayLike) -> ArrayLike:
        return self.evaluate(r)[0]

    def du(self, r: ArrayLike) -> ArrayLike:
        return self.evaluate(r)[1]

    def breakpoints(self, lo: float, hi: float, max_points: Optional[int] = None) -> List[float]:
        """Integrator log-nodes inside (lo, hi), thinned uniformly in index when max_points is given."""
        inner = self.log_nodes[(self.log_nodes > lo) & (self.log_nodes < hi)]
        if max_points is not None and len(inner) > max_points:
            idx = np.unique(np.linspace(0, len(inner) - 1, max_points).round().astype(int))
            inner = inner[idx]
        return inner.tolist()

    def samples(self, n: int = 401) -> Dict[str, list]:
        """u and u' uniform in r, and u and w uniform in log radius over the integrated nodes."""
        r = np.linspace(0.0, self.r_end, n)
        u, du = self.evaluate(r)
        first = float(self.log_nodes[1]) if len(self.log_nodes) > 1 else self.log_r_end - 1.0
        log_r = np.linspace(first, self.log_r_end, n)
        u_log, w_log = self.state(log_r)
        return {"r": r.tolist(), "u": u.tolist(), "du": du.tolist(),
                "log_r": log_r.tolist(), "u_log": u_log.tolist(), "w_log": w_log.tolist()}


def _step(solver, amplitude: float, where: float) -> None:
    message = solver.step()
    if solver.status == "failed":
        raise StepSizeUnderflow(
            message or "integrator step size underflow",
            log_radius=where,
            amplitude=amplitude,
        )


def _locate(local, idx: int, lo: float, hi: float, slope) -> float:
    """Bisection on one component of a step interpolant, then a Newton polish."""
    root = optimize.bisect(lambda x: local(x)[idx], lo, hi, xtol=EVENT_XTOL, maxiter=200)
    y = local(root)
    try:
        d = slope(root, y)
    except OverflowGuard:
        return root
    if d != 0.0 and math.isfinite(d):
        candidate = root - y[idx] / d
        if lo <= candidate <= hi and abs(local(candidate)[idx]) <= abs(y[idx]):
            root = candidate
    return root


def integrate(
    a: float,
    p: Optional[NonlinearityParams],
    r_max: float = 1.0,
    tol: Optional[float] = None,
    *,
    forcing: Optional[Forcing] = None,
    max_zeros: Optional[int] = None,
) -> RadialProfile:
    """
    Integrate the radial problem from the origin.

    Args:
        a: Amplitude u(0)
        p: Nonlinearity parameters (may be None when a test forcing is given)
        r_max: Outer radius, in (0, 1]
        tol: Local error tolerance per step, in [1e-12, 1e-4]
        forcing: Replacement right-hand side (LinearHook, ZeroHook)
        max_zeros: Stop once more than this many zeros have been seen

    Returns:
        RadialProfile; truncated with ``aborted`` set when the overflow guard
        fires or when f(a) cannot be represented even in log form

    Raises:
        PreconditionError: Invalid r_max, tol or amplitude
        StepSizeUnderflow: The integrator could not advance
    """
    tol = config.tolerances["integrator"] if tol is None else tol
    if not 0.0 < r_max <= 1.0:
        raise PreconditionError(f"r_max must lie in (0, 1], got {r_max}", r_max=r_max)
    if not 1e-12 <= tol <= 1e-4:
        raise PreconditionError(f"tol must lie in [1e-12, 1e-4], got {tol}", tol=tol)
    if not math.isfinite(a):
        raise PreconditionError("amplitude must be finite", amplitude=a)
    if forcing is None:
        if p is None:
            raise PreconditionError("either params or a forcing hook is required")
        forcing = get_nonlinearity(p)

    sign = -1.0 if a < 0.0 else 1.0
    amp = abs(a)
    t_end = math.log(r_max)
    log_t: List[float] = [-math.inf]
    us: List[float] = [amp]
    ws: List[float] = [0.0]
    events: List[ProfileEvent] = []
    state = {"aborted": False, "reason": None, "early": False}

    def build(shift=math.inf, scale=0.0, start=math.inf, core=None, core_end=math.inf, outer=None):
        profile = RadialProfile(
            params=p,
            amplitude=a,
            r_max=r_max,
            tol=tol,
            log_nodes=np.asarray(log_t, dtype=float),
            values=sign * np.asarray(us, dtype=float),
            fluxes=sign * np.asarray(ws, dtype=float),
            events=events,
            aborted=state["aborted"],
            abort_reason=state["reason"],
            terminated_early=state["early"],
        )
        profile._forcing = forcing
        profile._shift, profile._scale, profile._start = shift, scale, start
        profile._core, profile._core_end, profile._outer = core, core_end, outer
        return profile

    def abort(reason: str, detail: str):
        state["aborted"], state["reason"] = True, reason
        logger.debug(f"Profile a={a} aborted ({reason}): {detail}")

    log_fa = forcing.log_coefficient + math.log(amp) + forcing.exponent(amp) if amp > 0.0 else -math.inf
    if log_fa == -math.inf:
        # no forcing at the amplitude: u stays constant
        log_t.append(t_end)
        us.append(amp)
        ws.append(0.0)
        return build(core_end=t_end)
    scale = forcing.exponent_slope(amp) + 1.0 / amp
    if not (math.isfinite(log_fa) and math.isfinite(scale)):
        abort("overflow_guard", f"log f(a) = {log_fa} cannot be formed")
        return build()

    shift = -0.5 * log_fa
    tau_end = t_end - shift
    tau0 = min(0.5 * math.log(CORE_DEPTH / max(1.0, scale)), tau_end - 1.0)
    q = math.exp(2.0 * tau0)
    y0 = np.array([scale * (q / 4.0 - scale * q * q / 64.0), scale * (q / 2.0 - scale * q * q / 16.0)])
    if not np.all(np.isfinite(y0)):
        abort("overflow_guard", "origin series terms are not finite")
        return build()

    def core_forcing(tau: float, y: np.ndarray) -> float:
        d = y[0] / scale
        if d >= amp:
            return -math.inf
        return 2.0 * tau + math.log1p(-d / amp) + forcing.exponent_drop(amp, d)

    def core_rhs(tau, y):
        return np.array([y[1], scale * _exp_guarded(core_forcing(tau, y))])

    core_ts, core_interp = [tau0], []
    log_t.append(shift + tau0)
    us.append(amp - y0[0] / scale)
    ws.append(-y0[1] / scale)
    finished = False
    try:
        solver = DOP853(core_rhs, tau0, y0, tau_end, rtol=tol, atol=tol)
        while solver.status == "running":
            _step(solver, a, shift + solver.t)
            core_interp.append(solver.dense_output())
            tau, y = solver.t, solver.y
            core_ts.append(tau)
            log_t.append(shift + tau)
            us.append(amp - y[0] / scale)
            ws.append(-y[1] / scale)
            if y[0] / scale > 0.5 * amp or (tau > 0.0 and core_forcing(tau, y) < CORE_EXIT):
                break
        finished = solver.status == "finished"
    except OverflowGuard as exc:
        abort("overflow_guard", exc.message)
    except (ValueError, FloatingPointError) as exc:
        abort("overflow_guard", str(exc))

    core = OdeSolution(core_ts, core_interp) if core_interp else None
    core_end = shift + core_ts[-1]
    if state["aborted"] or finished:
        return build(shift, scale, shift + tau0, core, core_end)

    def outer_rhs(t, y):
        u = y[0]
        if u == 0.0:
            return np.array([y[1], 0.0])
        v = 2.0 * t + forcing.log_coefficient + math.log(abs(u)) + forcing.exponent(u)
        return np.array([y[1], -math.copysign(_exp_guarded(v), u)])

    slopes = (lambda t, y: y[1], lambda t, y: outer_rhs(t, y)[1])
    outer_ts, outer_interp = [core_end], []
    zeros_seen = 0
    try:
        y_switch = np.array([us[-1], ws[-1]])
        atol = np.array([tol, tol * min(1.0, abs(y_switch[1]))])
        solver = DOP853(outer_rhs, core_end, y_switch, t_end, rtol=tol, atol=atol)
        while solver.status == "running":
            t_old, y_old = solver.t, solver.y.copy()
            _step(solver, a, t_old)
            local = solver.dense_output()
            t_new, y_new = solver.t, solver.y
            outer_interp.append(local)
            outer_ts.append(t_new)
            log_t.append(t_new)
            us.append(float(y_new[0]))
            ws.append(float(y_new[1]))

            step_events = []
            for idx, kind in ((0, EventKind.ZERO), (1, EventKind.EXTREMUM)):
                if np.sign(y_old[idx]) * np.sign(y_new[idx]) < 0:
                    root = _locate(local, idx, t_old, t_new, slopes[idx])
                    step_events.append(ProfileEvent(log_radius=root, kind=kind))
            step_events.sort(key=lambda e: e.log_radius)
            events.extend(step_events)
            zeros_seen += sum(1 for e in step_events if e.kind is EventKind.ZERO)
            if max_zeros is not None and zeros_seen > max_zeros:
                state["early"] = True
                break
    except OverflowGuard as exc:
        abort("overflow_guard", exc.message)
    except (ValueError, FloatingPointError) as exc:
        abort("overflow_guard", str(exc))

    outer = OdeSolution(outer_ts, outer_interp) if outer_interp else None
    profile = build(shift, scale, shift + tau0, core, core_end if outer is not None else log_t[-1], outer)
    logger.debug(
        f"Integrated a={a:.12g} to log r={profile.log_r_end:.6g} in "
        f"{len(core_interp)}+{len(outer_interp)} steps, {zeros_seen} zeros"
        f"{' (aborted)' if state['aborted'] else ''}"
    )
    return profile


def zero_count(profile: RadialProfile) -> Tuple[int, float, float]:
    """
    Count interior zeros of a complete profile.

    Returns:
        (number of zeros in (0, r_max), u(r_max), u'(r_max))

    Raises:
        AbortedProfile: The profile stopped before r_max
    """
    if not profile.complete:
        raise AbortedProfile(
            "profile did not reach r_max",
            log_r_end=profile.log_r_end,
            r_max=profile.r_max,
            reason=profile.abort_reason or "terminated_early",
        )
    u_end, w_end = profile.state(profile.log_r_max)
    return len(profile.zero_log_radii), u_end, w_end / profile.r_max
