"""
Moser-Trudinger type nonlinearities.

Two families are supported:

* ``MT_PLUS``: f(s) = lambda * s * exp(s^2 + |s|^(1+eps))
* ``MT_SUB``:  f(s) = lambda * s * exp(|s|^(2-eps))

Values are assembled as a log-magnitude and exponentiated once, so that the
overflow guard can refuse an evaluation instead of returning ``inf``. The
log-space pieces (log|f|, the exponent and its differences, log F) are
public as well; the radial integrator never leaves log space.
"""

import logging
import math
import threading
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import integrate, special

from .config import config
from .exceptions import OverflowGuard, PreconditionError, QuadratureNonConvergence

logger = logging.getLogger(__name__)

# First Dirichlet eigenvalue of the unit disk, j_{0,1}^2
LAMBDA_1 = float(special.jn_zeros(0, 1)[0] ** 2)

# Width of the memoized panels of the primitive F
PANEL_WIDTH = 0.0625
QUAD_EPSREL = 1e-13

# Above this exponent F is assembled as f(s) * int_0^s f(s - y)/f(s) dy
PRIMITIVE_SWITCH = 40.0
# The ratio integrand is below e^{-PRIMITIVE_WINDOW} past the window
PRIMITIVE_WINDOW = 80.0
RATIO_EPSREL = 1e-12


class Family(str, Enum):
    """Nonlinearity families."""
    MT_PLUS = "mt_plus"
    MT_SUB = "mt_sub"


class NonlinearityParams(BaseModel):
    """The triple (lambda, eps, family) defining f_eps and F_eps."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lam: float = Field(alias="lambda")
    eps: float
    family: Family = Family.MT_PLUS

    @field_validator("lam")
    @classmethod
    def _check_lambda(cls, value: float) -> float:
        if not 0.0 < value < LAMBDA_1:
            raise ValueError(f"lambda must lie in (0, lambda_1 = {LAMBDA_1:.10f}), got {value}")
        return value

    @field_validator("eps")
    @classmethod
    def _check_eps(cls, value: float) -> float:
        # eps = 1 is admitted for evaluation only (closed-form primitive oracle)
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"eps must lie in [0, 1], got {value}")
        return value

    def to_dict(self) -> Dict[str, object]:
        return self.model_dump(mode="json", by_alias=True)


def lambda_1() -> float:
    """First Dirichlet eigenvalue of the Laplacian on the unit disk."""
    return LAMBDA_1


def _power(a: float, p: float) -> float:
    """a ** p for a >= 0, inf instead of OverflowError."""
    try:
        return a**p
    except OverflowError:
        return math.inf


def _finite(s: float) -> float:
    if not math.isfinite(s):
        raise PreconditionError(f"nonlinearity evaluated at non-finite argument {s}", s=s)
    return s


class Nonlinearity:
    """Evaluator for f_eps, f_eps' and F_eps bound to one parameter set."""

    def __init__(self, params: NonlinearityParams, guard: Optional[float] = None):
        """
        Initialize the evaluator.

        Args:
            params: Nonlinearity parameters
            guard: Overflow-guard exponent; the configured value when omitted
        """
        self.params = params
        self._guard = guard
        self._log_lam = math.log(params.lam)
        self._plus = params.family is Family.MT_PLUS
        self._tables: Dict[float, List[float]] = {}
        self._lock = threading.RLock()

    @property
    def guard(self) -> float:
        return config.overflow_guard if self._guard is None else self._guard

    @property
    def log_coefficient(self) -> float:
        """log lambda."""
        return self._log_lam

    def exponent(self, s: float) -> float:
        """E(s), the exponent of the nonlinearity."""
        a = abs(s)
        if self._plus:
            return a * a + _power(a, 1.0 + self.params.eps)
        return _power(a, 2.0 - self.params.eps)

    def exponent_slope(self, s: float) -> float:
        """E'(|s|)."""
        a = abs(s)
        eps = self.params.eps
        if self._plus:
            return 2.0 * a + (1.0 + eps) * _power(a, eps)
        return (2.0 - eps) * _power(a, 1.0 - eps)

    def exponent_drop(self, s: float, d: float) -> float:
        """
        E(s - d) - E(s) for 0 <= d <= s, without cancellation.

        Both E(s) and E(s - d) may be far beyond double precision of their
        difference; the difference is formed from log1p(-d/s) instead.
        """
        if d <= 0.0:
            return 0.0
        if d >= s:
            return -self.exponent(s)
        x = math.log1p(-d / s)
        eps = self.params.eps
        if self._plus:
            return -d * (2.0 * s - d) + _power(s, 1.0 + eps) * math.expm1((1.0 + eps) * x)
        return _power(s, 2.0 - eps) * math.expm1((2.0 - eps) * x)

    def log_abs_f(self, s: float) -> float:
        """log|f(s)|, -inf at the origin."""
        if _finite(s) == 0.0:
            return -math.inf
        return self._log_lam + math.log(abs(s)) + self.exponent(s)

    def _checked_exp(self, log_mag: float, s: float) -> float:
        if log_mag > self.guard:
            raise OverflowGuard(
                f"exponent {log_mag:.3f} exceeds overflow guard {self.guard:g}",
                s=s,
                exponent=log_mag,
                guard=self.guard,
            )
        return math.exp(log_mag)

    def f(self, s: float) -> float:
        if _finite(s) == 0.0:
            return 0.0
        return math.copysign(self._checked_exp(self.log_abs_f(s), s), s)

    def f_prime(self, s: float) -> float:
        a = abs(_finite(s))
        if self._plus:
            growth = 1.0 + 2.0 * a * a + (1.0 + self.params.eps) * _power(a, 1.0 + self.params.eps)
        else:
            growth = 1.0 + (2.0 - self.params.eps) * _power(a, 2.0 - self.params.eps)
        return self._checked_exp(self._log_lam + self.exponent(s) + math.log(growth), s)

    def F(self, s: float, tol: Optional[float] = None) -> float:
        """
        Primitive F(s) = int_0^s f(t) dt.

        Whole panels of width PANEL_WIDTH are integrated once per tolerance and
        memoized; only the trailing partial panel is integrated per call.

        Args:
            s: Evaluation point
            tol: Absolute quadrature tolerance per panel

        Returns:
            F(s), even in s
        """
        tol = config.tolerances["quadrature"] if tol is None else tol
        a = abs(_finite(s))
        if a == 0.0:
            return 0.0
        j = int(a // PANEL_WIDTH)
        table = self._panel_table(tol, j)
        return table[j] + self._panel(j * PANEL_WIDTH, a, tol)

    def primitive_ratio(self, s: float) -> float:
        """
        F(s) / |f(s)| for s != 0.

        Small exponents divide the panel primitive by f; large ones integrate
        (1 - y/s) e^{E(s-y) - E(s)} over the window where it is not negligible.
        """
        a = abs(_finite(s))
        if a == 0.0:
            return 0.0
        if self.exponent(a) <= PRIMITIVE_SWITCH:
            return self.F(a) / math.exp(self.log_abs_f(a))

        def integrand(y: float) -> float:
            if y >= a:
                return 0.0
            return math.exp(math.log1p(-y / a) + self.exponent_drop(a, y))

        width = min(a, PRIMITIVE_WINDOW / (self.exponent_slope(a) + 1.0 / a))
        value, abserr = integrate.quad(integrand, 0.0, width, epsabs=0.0, epsrel=RATIO_EPSREL, limit=200)
        if abserr > 10.0 * RATIO_EPSREL * value:
            raise QuadratureNonConvergence(
                f"primitive ratio at s={a:.6g} reached only {abserr:.3e}",
                s=a,
                abserr=abserr,
            )
        return value

    def log_F(self, s: float) -> float:
        """log F(s) without forming F; -inf at the origin."""
        if _finite(s) == 0.0:
            return -math.inf
        return self.log_abs_f(s) + math.log(self.primitive_ratio(s))

    def _panel_table(self, tol: float, j: int) -> List[float]:
        with self._lock:
            table = self._tables.setdefault(tol, [0.0])
            while len(table) <= j:
                n = len(table) - 1
                table.append(table[-1] + self._panel(n * PANEL_WIDTH, (n + 1) * PANEL_WIDTH, tol))
            return table

    def _panel(self, lo: float, hi: float, tol: float) -> float:
        if hi <= lo:
            return 0.0
        value, abserr = integrate.quad(self.f, lo, hi, epsabs=tol, epsrel=QUAD_EPSREL, limit=200)
        if abserr > 10.0 * max(tol, QUAD_EPSREL * abs(value)):
            raise QuadratureNonConvergence(
                f"primitive panel [{lo}, {hi}] reached only {abserr:.3e}",
                lo=lo,
                hi=hi,
                abserr=abserr,
                tol=tol,
            )
        return value


@lru_cache(maxsize=128)
def get_nonlinearity(params: NonlinearityParams) -> Nonlinearity:
    """Shared evaluator per parameter set, so the primitive cache is reused."""
    logger.debug(f"Creating nonlinearity evaluator for {params.to_dict()}")
    return Nonlinearity(params)


def f_eval(s: float, p: NonlinearityParams) -> float:
    """f_eps(s)."""
    return get_nonlinearity(p).f(s)


def f_prime(s: float, p: NonlinearityParams) -> float:
    """d/ds f_eps(s)."""
    return get_nonlinearity(p).f_prime(s)


def F_eval(s: float, p: NonlinearityParams, tol: Optional[float] = None) -> float:
    """F_eps(s) = int_0^s f_eps(t) dt."""
    return get_nonlinearity(p).F(s, tol)
