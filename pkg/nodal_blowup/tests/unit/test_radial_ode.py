import math

import numpy as np
import pytest
from scipy import integrate as quadrature
from scipy import special

from nodal_blowup.core.exceptions import AbortedProfile, PreconditionError, StepSizeUnderflow
from nodal_blowup.core.nonlinearity import NonlinearityParams, f_eval
from nodal_blowup.core.radial_ode import EventKind, LinearHook, ZeroHook, integrate, zero_count


@pytest.fixture
def plus_half():
    return NonlinearityParams(lam=1.0, eps=0.5)


def test_linear_forcing_reproduces_bessel_profile():
    lam = 4.0
    profile = integrate(1.0, None, 1.0, 1e-11, forcing=LinearHook(lam))
    r = np.linspace(0.0, 1.0, 41)
    u, du = profile.evaluate(r)
    assert np.max(np.abs(u - special.j0(2.0 * r))) < 1e-8
    assert np.max(np.abs(du + 2.0 * special.j1(2.0 * r))) < 1e-7


def test_flux_identity_for_linear_forcing():
    lam = 3.0
    profile = integrate(0.8, None, 1.0, 1e-11, forcing=LinearHook(lam))
    for r in (0.25, 0.6, 1.0):
        mass, _ = quadrature.quad(lambda s: lam * profile.u(s) * s, 0.0, r, epsabs=1e-13)
        assert r * profile.du(r) + mass == pytest.approx(0.0, abs=1e-8)


def test_flux_identity_for_nonlinear_forcing(plus_half):
    profile = integrate(1.5, plus_half, 1.0, 1e-11)
    for r in (0.25, 0.5, 1.0):
        points = [x for x in profile.nodes if 0.0 < x < r][:200]
        mass, _ = quadrature.quad(lambda s: f_eval(profile.u(s), plus_half) * s, 0.0, r,
                                  points=points or None, epsabs=1e-13, epsrel=1e-12, limit=500)
        assert r * profile.du(r) + mass == pytest.approx(0.0, abs=1e-8)


def test_zero_forcing_keeps_amplitude():
    profile = integrate(0.7, None, 1.0, 1e-10, forcing=ZeroHook())
    u, du = profile.evaluate(np.linspace(0.0, 1.0, 11))
    assert np.allclose(u, 0.7, atol=1e-12)
    assert np.allclose(du, 0.0, atol=1e-12)
    assert profile.events == []
    count, u_end, du_end = zero_count(profile)
    assert count == 0
    assert u_end == pytest.approx(0.7)
    assert du_end == pytest.approx(0.0, abs=1e-12)


def test_zeros_and_extrema_are_located():
    profile = integrate(1.0, None, 1.0, 1e-11, forcing=LinearHook(100.0))
    zeros = [z / 10.0 for z in special.jn_zeros(0, 3)]
    extrema = [z / 10.0 for z in special.jn_zeros(1, 2)]
    assert profile.zero_radii == pytest.approx(zeros, abs=1e-9)
    assert profile.extremum_radii[:2] == pytest.approx(extrema, abs=1e-9)
    kinds = [e.kind for e in profile.events]
    assert kinds[:3] == [EventKind.ZERO, EventKind.EXTREMUM, EventKind.ZERO]


def test_located_zeros_are_exact(plus_half):
    profile = integrate(2.0, plus_half, 1.0, 1e-11)
    assert profile.zero_log_radii
    for t in profile.zero_log_radii:
        u, _ = profile.state(t)
        assert abs(u) < 1e-10


def test_linear_forcing_with_one_zero_in_the_disk():
    count, _, du_end = zero_count(integrate(1.0, None, forcing=LinearHook(30.0)))
    assert count == 1
    assert du_end > 0.0


def test_max_zeros_terminates_early():
    profile = integrate(1.0, None, 1.0, 1e-10, forcing=LinearHook(100.0), max_zeros=1)
    assert profile.terminated_early
    assert not profile.complete
    assert len(profile.zero_radii) == 2
    with pytest.raises(AbortedProfile):
        zero_count(profile)


def test_unrepresentable_amplitude_aborts_with_overflow_guard(plus_half):
    profile = integrate(1e200, plus_half)
    assert profile.aborted
    assert profile.abort_reason == "overflow_guard"
    with pytest.raises(AbortedProfile) as exc_info:
        zero_count(profile)
    assert exc_info.value.details["reason"] == "overflow_guard"


def test_non_finite_forcing_aborts_instead_of_looping():
    class BrokenHook(LinearHook):
        def exponent(self, s):
            return math.nan if abs(s) < 0.3 else 0.0

    profile = integrate(1.0, None, forcing=BrokenHook(4.0))
    assert profile.aborted
    assert profile.abort_reason == "overflow_guard"
    assert np.all(np.isfinite(profile.log_nodes[1:]))
    assert np.all(np.diff(profile.log_nodes[1:]) > 0.0)
    assert profile.log_r_end < 0.0


@pytest.mark.parametrize("a", [14.5, 16.9, 32.0])
def test_large_amplitudes_reach_the_boundary(plus_half, a):
    profile = integrate(a, plus_half)
    assert profile.complete
    assert profile.log_r_end == pytest.approx(0.0, abs=1e-9)
    assert np.all(np.isfinite(profile.values))
    assert np.all(np.diff(profile.log_nodes[1:]) > 0.0)
    # the bubble sits far inside the disk
    assert profile.log_nodes[1] < -0.5 * math.log(a)


def test_negative_amplitude_mirrors_profile(plus_half):
    up = integrate(1.5, plus_half, tol=1e-10)
    down = integrate(-1.5, plus_half, tol=1e-10)
    for t in (-3.0, -1.0, 0.0):
        u_up, w_up = up.state(t)
        u_down, w_down = down.state(t)
        assert u_down == pytest.approx(-u_up, abs=1e-12)
        assert w_down == pytest.approx(-w_up, abs=1e-12)


def test_first_arch_is_decreasing(plus_half):
    profile = integrate(2.0, plus_half, tol=1e-10)
    end = min(profile.zero_log_radii + [0.0])
    log_r = np.linspace(float(profile.log_nodes[1]), end, 200)[:-1]
    _, w = profile.state(log_r)
    assert np.all(w < 0.0)


def test_halving_the_tolerance_moves_the_boundary_value_little(plus_half):
    _, coarse, _ = zero_count(integrate(2.0, plus_half, tol=1e-8))
    _, fine, _ = zero_count(integrate(2.0, plus_half, tol=5e-9))
    assert abs(coarse - fine) <= 1e-7


def test_small_amplitude_solution_has_no_zero(plus_half):
    count, u_end, _ = zero_count(integrate(0.1, plus_half))
    assert count == 0
    assert u_end > 0.0


@pytest.mark.parametrize("kwargs", [
    {"r_max": 0.0},
    {"r_max": 1.5},
    {"tol": 1e-3},
    {"tol": 1e-14},
])
def test_invalid_arguments_are_rejected(kwargs):
    with pytest.raises(PreconditionError):
        integrate(1.0, None, forcing=ZeroHook(), **kwargs)


def test_missing_forcing_and_params_is_rejected():
    with pytest.raises(PreconditionError):
        integrate(1.0, None)
    with pytest.raises(PreconditionError):
        integrate(math.nan, None, forcing=ZeroHook())


def test_evaluation_outside_profile_is_rejected():
    profile = integrate(1.0, None, 0.5, forcing=ZeroHook())
    with pytest.raises(PreconditionError):
        profile.u(0.75)
    with pytest.raises(PreconditionError):
        profile.state(0.0)


def test_failed_step_raises_step_size_underflow(mocker):
    class FailingSolver:
        def __init__(self, fun, t0, y0, t_bound, **kwargs):
            self.status = "running"
            self.t = t0
            self.y = np.asarray(y0)

        def step(self):
            self.status = "failed"
            return "Required step size is less than spacing between numbers."

    mocker.patch("nodal_blowup.core.radial_ode.DOP853", FailingSolver)
    with pytest.raises(StepSizeUnderflow) as exc_info:
        integrate(1.0, None, forcing=LinearHook(1.0))
    assert "step size" in exc_info.value.message


def test_samples_cover_the_profile():
    profile = integrate(1.0, None, 1.0, forcing=LinearHook(1.0))
    data = profile.samples(5)
    assert data["r"] == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])
    assert len(data["u"]) == len(data["du"]) == 5
    assert data["log_r"][-1] == pytest.approx(0.0)
    assert len(data["u_log"]) == len(data["w_log"]) == 5
