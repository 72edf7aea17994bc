import math

import pytest

from nodal_blowup.core.config import config
from nodal_blowup.core.energy import (
    ProfileRegion,
    RegionEnergy,
    functional_value,
    guarded_exp,
    nehari_log_density,
    nodal_energies,
    potential_log_density,
    region_energy,
)
from nodal_blowup.core.exceptions import OverflowGuard, PreconditionError
from nodal_blowup.core.nonlinearity import F_eval, NonlinearityParams, f_eval, get_nonlinearity
from nodal_blowup.core.radial_ode import LinearHook, ZeroHook, integrate


@pytest.fixture(scope="module")
def params():
    return NonlinearityParams(lam=1.0, eps=0.5)


@pytest.fixture(scope="module")
def small_profile(params):
    return integrate(0.5, params)


def test_constant_profile_has_no_dirichlet_energy():
    region = ProfileRegion.from_radii(integrate(0.7, None, forcing=ZeroHook()), 0.0, 1.0)
    assert region.dirichlet() == pytest.approx(0.0, abs=1e-12)
    assert region.planar_integral(lambda v: 0.0) == pytest.approx(math.pi, rel=1e-10)
    annulus = ProfileRegion(region.profile, math.log(0.5), 0.0)
    assert annulus.planar_integral(lambda v: 0.0) == pytest.approx(0.75 * math.pi, rel=1e-10)


def test_bessel_dirichlet_energy():
    # Green: int |grad u|^2 = lam int u^2 + boundary term, for -Delta u = lam u
    lam = 4.0
    region = ProfileRegion.from_radii(integrate(1.0, None, 1.0, 1e-11, forcing=LinearHook(lam)), 0.0, 1.0)
    square = region.planar_integral(lambda v: 2.0 * math.log(abs(v)))
    profile = region.profile
    boundary = 2.0 * math.pi * profile.u(1.0) * profile.du(1.0)
    assert region.dirichlet() == pytest.approx(lam * square + boundary, rel=1e-8)


def test_scaling_multiplies_dirichlet_quadratically(small_profile):
    region = ProfileRegion(small_profile, -math.inf, 0.0)
    assert region.scale(3.0).dirichlet() == pytest.approx(9.0 * region.dirichlet(), rel=1e-12)


def test_region_energy_is_additive(small_profile, params):
    whole = region_energy(small_profile, params, 0.0, 1.0)
    parts = nodal_energies(small_profile, params, [math.log(0.4)])
    assert [p.region_index for p in parts] == [1, 2]
    assert whole.dirichlet == pytest.approx(sum(p.dirichlet for p in parts), abs=1e-9)
    assert whole.potential == pytest.approx(sum(p.potential for p in parts), abs=1e-9)
    assert whole.functional == pytest.approx(whole.dirichlet / 2.0 - whole.potential, rel=1e-14)


def test_functional_value_agrees_with_region_energy(small_profile, params):
    whole = region_energy(small_profile, params, 0.0, 1.0)
    assert functional_value(ProfileRegion(small_profile, -math.inf, 0.0), params) == pytest.approx(
        whole.functional, abs=1e-9
    )


def test_potential_density_is_log_primitive(params):
    nl = get_nonlinearity(params)
    density = potential_log_density(nl)
    assert density(0.8) == pytest.approx(math.log(F_eval(0.8, params)), rel=1e-12)
    assert density(0.0) == -math.inf


def test_nehari_density_is_log_of_f_times_u(params):
    density = nehari_log_density(get_nonlinearity(params))
    assert density(1.0) == pytest.approx(2.0, rel=1e-12)
    assert density(0.0) == -math.inf
    assert density(-0.8) == pytest.approx(math.log(f_eval(0.8, params) * 0.8), rel=1e-12)


def test_guarded_exp_refuses_large_and_undefined_exponents(mocker):
    mocker.patch.object(config, "overflow_guard", 5.0)
    assert guarded_exp(4.0) == pytest.approx(math.exp(4.0))
    assert guarded_exp(-math.inf) == 0.0
    for value in (6.0, math.inf, math.nan):
        with pytest.raises(OverflowGuard):
            guarded_exp(value)


def test_planar_integral_applies_guard_to_combined_exponent(small_profile, mocker):
    region = ProfileRegion(small_profile, -math.inf, 0.0)
    assert math.isfinite(region.planar_integral(lambda v: 4.0))
    mocker.patch.object(config, "overflow_guard", 5.0)
    with pytest.raises(OverflowGuard):
        region.planar_integral(lambda v: 10.0)


def test_log_forcing_route_matches_direct_densities(small_profile, params):
    nl = get_nonlinearity(params)
    region = ProfileRegion(small_profile, -math.inf, 0.0)
    assert region.nehari_term(nl) == pytest.approx(region.planar_integral(nehari_log_density(nl)), rel=1e-7)
    assert region.potential(nl) == pytest.approx(region.planar_integral(potential_log_density(nl)), rel=1e-7)


@pytest.mark.parametrize("r_lo, r_hi", [(0.5, 0.5), (0.6, 0.4), (-0.1, 0.5), (0.0, 1.5)])
def test_region_bounds_are_checked(small_profile, params, r_lo, r_hi):
    with pytest.raises(PreconditionError):
        region_energy(small_profile, params, r_lo, r_hi)


def test_relative_nehari():
    energy = RegionEnergy.build(1, 0.0, 1.0, dirichlet=2.0, potential=0.5, nehari_term=1.5)
    assert energy.functional == pytest.approx(0.5)
    assert energy.nehari_residual == pytest.approx(0.5)
    assert energy.relative_nehari == pytest.approx(0.25)
    assert energy.to_dict()["region_index"] == 1
