"""
The verification suite run by ``nbl verify``.

Closed-form and invariant checks gate the exit code; expectation checks are
reported only; trend checks run the reference eps-sweep and are opt-in.
"""

import logging
import math
import threading
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy import optimize
from scipy.integrate import quad

from ..core import liouville, moser
from ..core.blowup import amplitude_ratios, boundary_flux
from ..core.energy import region_energy
from ..core.liouville import ProfileKind
from ..core.nonlinearity import LAMBDA_1, F_eval, Family, NonlinearityParams, f_eval, f_prime, get_nonlinearity
from ..core.radial_ode import LinearHook, ZeroHook, integrate
from ..core.shooting import NodalSolution, certify, solve_ground, solve_nodal
from ..core.sweep import SweepConfig, blowup_regime, is_strictly_decreasing, run_sweep, succeeded_prefix
from .base_check import BaseCheck, CheckCategory, CheckMetadata, CheckOutcome
from .check_manager import CheckManager

logger = logging.getLogger(__name__)

REFERENCE_LAMBDA = 1.0
REFERENCE_EPS = 0.5
TREND_EPS = [0.8, 0.6, 0.45, 0.35, 0.28]


def bessel_j0_series(x: float, terms: int = 60) -> float:
    """J0 from its power series, independent of the integrator."""
    total, term = 0.0, 1.0
    q = -(x * x) / 4.0
    for m in range(terms):
        if m:
            term *= q / (m * m)
        total += term
    return total


class VerificationContext:
    """Solutions shared between checks, computed once on first use."""

    def __init__(self, lam: float = REFERENCE_LAMBDA, eps: float = REFERENCE_EPS,
                 trend_eps: Optional[List[float]] = None):
        self.lam = lam
        self.eps = eps
        self.trend_eps = list(trend_eps or TREND_EPS)
        self._cache: Dict[str, object] = {}
        self._lock = threading.RLock()

    def _cached(self, key: str, factory: Callable[[], object]):
        with self._lock:
            if key not in self._cache:
                self._cache[key] = factory()
            return self._cache[key]

    @property
    def params(self) -> NonlinearityParams:
        return NonlinearityParams(lam=self.lam, eps=self.eps)

    def nodal(self, k: int) -> NodalSolution:
        return self._cached(f"nodal_{k}", lambda: solve_nodal(self.params, k))

    def ground(self) -> NodalSolution:
        return self._cached("ground", lambda: solve_ground(self.lam)[0])

    def sweep(self):
        cfg = SweepConfig(lam=self.lam, k=1, eps_list=self.trend_eps)
        return self._cached("sweep", lambda: run_sweep(cfg)[0])


class FunctionCheck(BaseCheck):
    """A check backed by a plain function of the context."""

    def __init__(self, name: str, description: str, category: CheckCategory, module: str,
                 func: Callable[[VerificationContext], CheckOutcome], gating: bool = True):
        self._meta = CheckMetadata(name=name, description=description, category=category,
                                   module=module, gating=gating)
        self._func = func
        super().__init__()

    def _get_metadata(self) -> CheckMetadata:
        return self._meta

    def execute(self, context: VerificationContext) -> CheckOutcome:
        return self._func(context)


def check_nonlinearity_values(ctx: VerificationContext) -> CheckOutcome:
    p0 = NonlinearityParams(lam=1.0, eps=0.0)
    p1 = NonlinearityParams(lam=1.0, eps=1.0)
    ph = NonlinearityParams(lam=1.0, eps=0.5)
    errors = [
        abs(f_eval(1.0, p0) - math.e**2),
        abs(f_eval(-1.0, p0) + math.e**2),
        abs(f_eval(0.0, ph)),
        abs(f_prime(0.0, ph) - 1.0),
        abs(F_eval(1.0, p1) - (math.e**2 - 1.0) / 4.0),
    ]
    worst = max(errors)
    return CheckOutcome(passed=worst <= 1e-10, value=worst, threshold=1e-10)


def check_bessel_eigenvalue(ctx: VerificationContext) -> CheckOutcome:
    def terminal(lam: float) -> float:
        return integrate(1.0, None, 1.0, 1e-12, forcing=LinearHook(lam)).u(1.0)

    shot = optimize.brentq(terminal, 5.0, 6.5, xtol=1e-13)
    oracle = optimize.brentq(lambda lam: bessel_j0_series(math.sqrt(lam)), 5.0, 6.5, xtol=1e-14)
    error = max(abs(shot - oracle), abs(shot - LAMBDA_1))
    return CheckOutcome(passed=error <= 1e-6, value=error, threshold=1e-6,
                        detail=f"shooting {shot:.12f}, series {oracle:.12f}")


def check_zero_hook(ctx: VerificationContext) -> CheckOutcome:
    profile = integrate(0.7, None, 1.0, 1e-10, forcing=ZeroHook())
    u, du = profile.evaluate(np.linspace(0.0, 1.0, 11))
    error = float(max(np.max(np.abs(u - 0.7)), np.max(np.abs(du))))
    return CheckOutcome(passed=error <= 1e-12 and not profile.events, value=error, threshold=1e-12)


def check_liouville_residuals(ctx: VerificationContext) -> CheckOutcome:
    radial_points = np.geomspace(0.1, 10.0, 10)
    cases = [
        (ProfileKind.bubble(), radial_points),
        (ProfileKind.traveling(), np.linspace(-5.0, 5.0, 10)),
        (ProfileKind.annular(1.0), np.geomspace(0.2, 10.0, 10)),
        (ProfileKind.general(1.0 / math.sqrt(2.0), math.log(2.0 * math.sqrt(2.0))), radial_points),
    ]
    worst = max(abs(liouville.ode_residual(kind, float(x))) for kind, xs in cases for x in xs)
    return CheckOutcome(passed=worst < 1e-8, value=worst, threshold=1e-8)


def check_general_reduces_to_bubble(ctx: VerificationContext) -> CheckOutcome:
    kind = ProfileKind.general(1.0 / math.sqrt(2.0), math.log(2.0 * math.sqrt(2.0)))
    bubble = ProfileKind.bubble()
    worst = max(
        abs(liouville.eval_profile(kind, float(r)) - liouville.eval_profile(bubble, float(r)))
        for r in np.linspace(0.1, 10.0, 50)
    )
    return CheckOutcome(passed=worst <= 1e-12, value=worst, threshold=1e-12)


def check_liouville_masses(ctx: VerificationContext) -> CheckOutcome:
    bubble_error = abs(liouville.mass(ProfileKind.bubble()) - 4.0)
    annular_error = abs(liouville.mass(ProfileKind.annular(1.0)) - 2.0 * math.sqrt(6.0))
    small_error = abs(liouville.mass(ProfileKind.annular(0.01)) - 4.0)
    passed = bubble_error <= 1e-9 and annular_error <= 1e-8 and small_error <= 1e-3
    return CheckOutcome(passed=passed, value=max(bubble_error, annular_error),
                        detail=f"bubble {bubble_error:.2e}, annular(1) {annular_error:.2e}, "
                               f"annular(0.01) {small_error:.2e}")


def check_moser_norm(ctx: VerificationContext) -> CheckOutcome:
    pairs = [(0.01, 0.1), (1e-5, 0.1)]
    worst = max(abs(moser.moser_dirichlet(math.log(l), math.log(R)) - 1.0) for l, R in pairs)
    return CheckOutcome(passed=worst <= 1e-10, value=worst, threshold=1e-10)


def check_cutoff_overlap(ctx: VerificationContext) -> CheckOutcome:
    level_1, level_2 = moser.nested_params(2, math.log(0.1))
    args = (level_2.log_l, level_2.log_R, level_1.log_R, level_1.log_p)
    error = abs(moser.cutoff_overlap_energy(*args) - moser.cutoff_overlap_closed_form(*args))
    return CheckOutcome(passed=error <= 1e-9, value=error, threshold=1e-9)


def check_nested_recipe(ctx: VerificationContext) -> CheckOutcome:
    (single,) = moser.nested_params(1, math.log(0.1))
    level_1, level_2 = moser.nested_params(2, math.log(0.1))
    errors = [
        abs(single.log_l + 10.0),
        abs(level_2.log_l + 10.0),
        abs(level_1.log_p + 20.0),
        abs(level_1.log_R - (-20.0 - math.exp(10.0))),
    ]
    worst = max(errors)
    return CheckOutcome(passed=worst <= 1e-9 and level_1.overflowed, value=worst, threshold=1e-9)


def _region_midpoint(region) -> float:
    """A log radius inside the region; the innermost region has no finite lower end."""
    if math.isinf(region.log_lo):
        return region.log_hi - 1.0
    return 0.5 * (region.log_lo + region.log_hi)


def _certification(ctx: VerificationContext, k: int) -> CheckOutcome:
    sol = ctx.nodal(k)
    signs_ok = all(
        region.sign * sol.profile.state(_region_midpoint(region))[0] > 0 for region in sol.regions
    )
    positive = all(region.functional > 0.0 for region in sol.regions)
    report = certify(sol)
    passed = (
        abs(sol.terminal_value) <= 1e-8
        and len(sol.zeros) == k
        and sol.max_relative_nehari < 1e-6
        and positive
        and signs_ok
        and report.passed
    )
    return CheckOutcome(passed=passed, value=sol.max_relative_nehari, threshold=1e-6,
                        detail=f"log zeros={sol.log_zeros}, u(1)={sol.terminal_value:.2e}, "
                               f"functionals={[round(r.functional, 6) for r in sol.regions]}")


def check_ground_reference(ctx: VerificationContext) -> CheckOutcome:
    ground = ctx.ground()
    energy = ground.total_functional
    du = ground.profile.du(np.linspace(1e-3, 1.0, 400))
    passed = 0.0 < energy < 2.0 * math.pi and bool(np.all(du < 0.0))
    return CheckOutcome(passed=passed, value=energy, threshold=2.0 * math.pi)


def check_energy_additivity(ctx: VerificationContext) -> CheckOutcome:
    sol = ctx.nodal(1)
    whole = region_energy(sol.profile, sol.params, 0.0, 1.0)
    parts = sol.regions
    error = max(
        abs(whole.dirichlet - sum(r.energy.dirichlet for r in parts)),
        abs(whole.potential - sum(r.energy.potential for r in parts)),
    )
    return CheckOutcome(passed=error <= 1e-8, value=error, threshold=1e-8)


def check_blowup_shape(ctx: VerificationContext) -> CheckOutcome:
    sol = ctx.nodal(1)
    ratios = amplitude_ratios(sol)
    flux = boundary_flux(sol)
    inner = sol.regions[0].amplitude > sol.regions[1].amplitude
    # u'(r_k) carries the sign (-1)^k of the outer region
    passed = len(ratios) == 1 and ratios[0] < 1.0 and flux * (-1) ** sol.k > 0.0 and inner
    return CheckOutcome(passed=passed, value=ratios[0] if ratios else None,
                        detail=f"boundary flux {flux:.6g}")


def check_moser_upper_bound(ctx: VerificationContext) -> CheckOutcome:
    sol = ctx.nodal(1)
    assembly = moser.assemble_w(1, math.log(0.1), ctx.params, ctx.ground())
    inner = assembly.t[0] ** 2 / 2.0
    passed = assembly.total_energy >= sol.total_functional and inner <= 3.0 * math.pi
    return CheckOutcome(passed=passed, value=assembly.total_energy, threshold=sol.total_functional,
                        detail=f"t1^2/2={inner:.6g}")


def check_outer_piece(ctx: VerificationContext) -> CheckOutcome:
    ground = ctx.ground()
    assembly = moser.assemble_w(1, math.log(0.01), ctx.params, ground)
    reference = ground.total_functional
    error = abs(assembly.region_energies[-1] - reference) / reference
    return CheckOutcome(passed=error <= 0.25, value=error, threshold=0.25)


def check_sweep_trends(ctx: VerificationContext) -> CheckOutcome:
    table = succeeded_prefix(ctx.sweep())
    if len(table) < 4:
        return CheckOutcome(passed=False, value=float(len(table)), threshold=4.0,
                            detail="fewer than four stiffness-free eps values")
    regime = blowup_regime(table)
    four_pi = 4.0 * math.pi
    failing = []
    trends = {
        "dirichlet_1 gap": (table["dirichlet_1"] - four_pi).abs(),
        "functional_1 gap": (table["functional_1"] - 2.0 * math.pi).abs(),
        "log_r_1": regime["log_r_1"],
        "functional_2 gap": (regime["functional_2"] - regime["I0_reference"]).abs(),
        "ratio_1": regime["ratio_1"],
        "boundary_flux": regime["boundary_flux"].abs(),
    }
    if len(regime) < 4:
        failing.append("fewer than four eps values with growing amplitude")
    for label, series in trends.items():
        if not is_strictly_decreasing(series):
            failing.append(label)
    final_gap = abs(float(table["dirichlet_1"].iloc[-1]) - four_pi) / four_pi
    if final_gap > 0.2:
        failing.append("final dirichlet_1 within 20% of 4 pi")
    return CheckOutcome(passed=not failing, value=final_gap, threshold=0.2,
                        detail="all trends hold" if not failing else f"failing: {failing}")


def check_bubble_trend(ctx: VerificationContext) -> CheckOutcome:
    table = succeeded_prefix(ctx.sweep())
    deviation = table["sup_deviation_1"]
    final = float(deviation.iloc[-1]) if len(deviation) else math.inf
    passed = len(deviation) >= 4 and is_strictly_decreasing(deviation) and final < 0.3
    return CheckOutcome(passed=passed, value=final, threshold=0.3)


NONLINEARITY_GRID = [0.25, 0.5, 1.0, 1.5, 2.0]
NONLINEARITY_PARAMS = [
    NonlinearityParams(lam=1.0, eps=eps, family=family)
    for eps in (0.25, 0.5, 0.75)
    for family in (Family.MT_PLUS, Family.MT_SUB)
]


def check_nonlinearity_oddness(ctx: VerificationContext) -> CheckOutcome:
    worst = 0.0
    for p in NONLINEARITY_PARAMS:
        for s in NONLINEARITY_GRID:
            worst = max(worst, abs(f_eval(-s, p) + f_eval(s, p)) / abs(f_eval(s, p)),
                        abs(F_eval(-s, p) - F_eval(s, p)) / F_eval(s, p))
    return CheckOutcome(passed=worst <= 1e-14, value=worst, threshold=1e-14)


def check_superquadratic(ctx: VerificationContext) -> CheckOutcome:
    """f(s) s > 2 F(s) > 0 for s != 0."""
    worst = math.inf
    for p in NONLINEARITY_PARAMS:
        for s in NONLINEARITY_GRID:
            primitive = F_eval(s, p)
            worst = min(worst, (f_eval(s, p) * s - 2.0 * primitive) / primitive)
    return CheckOutcome(passed=worst > 0.0, value=worst, threshold=0.0)


def check_primitive_derivative(ctx: VerificationContext) -> CheckOutcome:
    h = 1e-4
    worst = 0.0
    for p in NONLINEARITY_PARAMS:
        for s in (0.5, 1.0, 1.5):
            slope = (F_eval(s + h, p) - F_eval(s - h, p)) / (2.0 * h)
            worst = max(worst, abs(slope - f_eval(s, p)) / f_eval(s, p))
    return CheckOutcome(passed=worst <= 1e-6, value=worst, threshold=1e-6)


def check_monotone_quotient(ctx: VerificationContext) -> CheckOutcome:
    grid = np.linspace(0.05, 3.0, 60)
    increasing = all(
        is_strictly_decreasing([-f_eval(float(s), p) / float(s) for s in grid]) for p in NONLINEARITY_PARAMS
    )
    return CheckOutcome(passed=increasing, detail="f(s)/s strictly increasing on (0, 3]")


def check_flux_identity(ctx: VerificationContext) -> CheckOutcome:
    """r u'(r) = -int_0^r f(u(s)) s ds along a nonlinear profile."""
    p = NonlinearityParams(lam=1.0, eps=0.5)
    profile = integrate(1.5, p, 1.0, 1e-11)
    nl = get_nonlinearity(p)
    worst = 0.0
    for r in (0.25, 0.5, 1.0):
        points = [x for x in profile.nodes if 0.0 < x < r][:200]
        mass, _ = quad(lambda s: nl.f(profile.u(s)) * s, 0.0, r, points=points or None,
                       epsabs=1e-13, epsrel=1e-12, limit=500)
        worst = max(worst, abs(profile.state(math.log(r))[1] + mass))
    return CheckOutcome(passed=worst <= 1e-8, value=worst, threshold=1e-8)


def check_first_arch_decreasing(ctx: VerificationContext) -> CheckOutcome:
    profile = integrate(2.0, NonlinearityParams(lam=1.0, eps=0.5), 1.0, 1e-10)
    end = profile.zero_log_radii[0] if profile.zero_log_radii else profile.log_r_max
    arch = (profile.log_nodes > -math.inf) & (profile.log_nodes < end)
    worst = float(np.max(profile.fluxes[arch]))
    return CheckOutcome(passed=worst < 0.0, value=worst, threshold=0.0)


def check_event_exactness(ctx: VerificationContext) -> CheckOutcome:
    profile = integrate(2.0, NonlinearityParams(lam=1.0, eps=0.5), 1.0, 1e-10)
    values = [abs(profile.state(t)[0]) for t in profile.zero_log_radii]
    worst = max(values) if values else math.inf
    return CheckOutcome(passed=worst < 1e-10, value=worst, threshold=1e-10)


def check_tolerance_halving(ctx: VerificationContext) -> CheckOutcome:
    p = NonlinearityParams(lam=1.0, eps=0.5)
    coarse = integrate(2.0, p, 1.0, 1e-8)
    fine = integrate(2.0, p, 1.0, 5e-9)
    shifts = [abs(a - b) for a, b in zip(coarse.zero_radii, fine.zero_radii)]
    change = max([abs(coarse.u(1.0) - fine.u(1.0)), *shifts])
    passed = len(coarse.zero_radii) == len(fine.zero_radii) and change <= 1e-7
    return CheckOutcome(passed=passed, value=change, threshold=1e-7)


def check_bubble_negative(ctx: VerificationContext) -> CheckOutcome:
    kind = ProfileKind.bubble()
    worst = max(liouville.eval_profile(kind, float(r)) for r in np.geomspace(1e-3, 1e3, 61))
    return CheckOutcome(passed=worst < 0.0, value=worst, threshold=0.0)


def check_annular_mass_exceeds_bubble(ctx: VerificationContext) -> CheckOutcome:
    masses = [liouville.mass(ProfileKind.annular(m)) for m in (0.05, 0.5, 1.0, 2.0, 5.0)]
    return CheckOutcome(passed=min(masses) > 4.0, value=min(masses), threshold=4.0)


def check_general_grid(ctx: VerificationContext) -> CheckOutcome:
    radial_points = np.geomspace(0.1, 10.0, 10)
    residual, mass_error = 0.0, 0.0
    for delta in (0.5, 1.0 / math.sqrt(2.0), 1.0):
        for y in (0.0, 1.0):
            kind = ProfileKind.general(delta, y)
            residual = max(residual, *(abs(liouville.ode_residual(kind, float(r))) for r in radial_points))
            mass_error = max(mass_error, abs(liouville.mass(kind) - liouville.mass_closed_form(kind)))
    passed = residual < 1e-8 and mass_error <= 1e-8
    return CheckOutcome(passed=passed, value=residual, threshold=1e-8,
                        detail=f"worst mass error {mass_error:.2e}")


def check_disjoint_supports(ctx: VerificationContext) -> CheckOutcome:
    ground = ctx.ground()
    overlaps = []
    for k in (1, 2, 3):
        pieces = [piece for piece in moser.build_pieces(moser.nested_params(k, math.log(0.1)), ground) if piece]
        supports = [piece.support for piece in pieces]
        overlaps += [outer[0] - inner[1] for inner, outer in zip(supports[:-1], supports[1:])]
    worst = min(overlaps)
    return CheckOutcome(passed=worst >= 0.0, value=worst, threshold=0.0)


CLOSED_FORM = CheckCategory.CLOSED_FORM
INVARIANT = CheckCategory.INVARIANT
TREND = CheckCategory.TREND
EXPECTATION = CheckCategory.EXPECTATION

_CHECKS = [
    ("nonlinearity_values", "f, f' and F against closed forms", CLOSED_FORM, "nonlinearity", check_nonlinearity_values, True),
    ("bessel_eigenvalue", "linear forcing shoots j_{0,1}^2 within 1e-6", CLOSED_FORM, "radial_ode", check_bessel_eigenvalue, True),
    ("zero_forcing_constant", "f = 0 keeps the amplitude", CLOSED_FORM, "radial_ode", check_zero_hook, True),
    ("liouville_residuals", "closed-form profiles solve their equations", CLOSED_FORM, "liouville", check_liouville_residuals, True),
    ("general_family_bubble", "general family at delta = 1/sqrt 2 is the bubble", CLOSED_FORM, "liouville", check_general_reduces_to_bubble, True),
    ("liouville_masses", "bubble and annular masses", CLOSED_FORM, "liouville", check_liouville_masses, True),
    ("moser_norm", "Moser functions have unit Dirichlet norm", CLOSED_FORM, "moser", check_moser_norm, True),
    ("cutoff_overlap", "cutoff overlap energy matches its closed form", CLOSED_FORM, "moser", check_cutoff_overlap, True),
    ("nested_recipe", "nested scales for k = 1, 2", CLOSED_FORM, "moser", check_nested_recipe, True),
    ("nonlinearity_oddness", "f odd and F even in s", CLOSED_FORM, "nonlinearity", check_nonlinearity_oddness, True),
    ("nonlinearity_superquadratic", "f(s) s > 2 F(s) > 0", INVARIANT, "nonlinearity", check_superquadratic, True),
    ("primitive_derivative", "F' matches f by central differences", CLOSED_FORM, "nonlinearity", check_primitive_derivative, True),
    ("monotone_quotient", "f(s)/s strictly increasing", INVARIANT, "nonlinearity", check_monotone_quotient, True),
    ("flux_identity", "r u' = -int f(u) s ds along a profile", INVARIANT, "radial_ode", check_flux_identity, True),
    ("first_arch_decreasing", "u' < 0 before the first zero", INVARIANT, "radial_ode", check_first_arch_decreasing, True),
    ("event_exactness", "|u| < 1e-10 at located zeros", INVARIANT, "radial_ode", check_event_exactness, True),
    ("tolerance_halving", "halving tol moves u(1) and zeros by at most 1e-7", INVARIANT, "radial_ode", check_tolerance_halving, True),
    ("bubble_negative", "the bubble is negative for r > 0", CLOSED_FORM, "liouville", check_bubble_negative, True),
    ("annular_mass", "annular masses exceed the bubble mass 4", CLOSED_FORM, "liouville", check_annular_mass_exceeds_bubble, True),
    ("general_family_grid", "general family residuals and masses over (delta, y)", CLOSED_FORM, "liouville", check_general_grid, True),
    ("moser_disjoint_supports", "assembled pieces have disjoint supports", INVARIANT, "moser", check_disjoint_supports, True),
    ("nodal_k1", "k = 1 solution certified", INVARIANT, "shooting", lambda ctx: _certification(ctx, 1), True),
    ("nodal_k2", "k = 2 solution certified", INVARIANT, "shooting", lambda ctx: _certification(ctx, 2), True),
    ("ground_reference", "I0(u0) in (0, 2 pi) and u0 decreasing", INVARIANT, "shooting", check_ground_reference, True),
    ("energy_additivity", "region energies add up", INVARIANT, "energy", check_energy_additivity, True),
    ("blowup_shape", "inner bubble dominates, boundary flux sign", INVARIANT, "blowup", check_blowup_shape, True),
    ("moser_upper_bound", "assembled energy bounds the solution energy", EXPECTATION, "moser", check_moser_upper_bound, False),
    ("moser_outer_piece", "outer piece energy near I0(u0)", EXPECTATION, "moser", check_outer_piece, False),
    ("sweep_trends", "energies, radii and ratios move toward their limits", TREND, "experiment_cli", check_sweep_trends, True),
    ("bubble_trend", "rescaled profile approaches the bubble", TREND, "blowup", check_bubble_trend, True),
]


def build_manager() -> CheckManager:
    """A manager holding the whole verification suite"""
    manager = CheckManager()
    for name, description, category, module, func, gating in _CHECKS:
        manager.register_check(FunctionCheck(name, description, category, module, func, gating))
    return manager


def categories(include_trends: bool) -> List[CheckCategory]:
    selected = [CLOSED_FORM, INVARIANT, EXPECTATION]
    if include_trends:
        selected.append(TREND)
    return selected
