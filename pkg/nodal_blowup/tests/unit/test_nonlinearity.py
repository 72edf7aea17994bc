import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError
from scipy import integrate

from nodal_blowup.core.exceptions import OverflowGuard, PreconditionError
from nodal_blowup.core.nonlinearity import (
    LAMBDA_1,
    F_eval,
    Family,
    Nonlinearity,
    NonlinearityParams,
    f_eval,
    f_prime,
    get_nonlinearity,
    lambda_1,
)

amplitudes = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False)
eps_values = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


@pytest.fixture
def plus_half():
    return NonlinearityParams(lam=1.0, eps=0.5)


def test_lambda_1_is_first_bessel_zero_squared():
    assert lambda_1() == LAMBDA_1
    assert LAMBDA_1 == pytest.approx(2.404825557695773**2, rel=1e-14)


def test_mt_plus_closed_values():
    p0 = NonlinearityParams(lam=1.0, eps=0.0)
    assert f_eval(1.0, p0) == pytest.approx(math.e**2, rel=1e-14)
    assert f_eval(-1.0, p0) == pytest.approx(-math.e**2, rel=1e-14)
    assert f_eval(0.0, p0) == 0.0


def test_f_prime_at_origin_is_lambda():
    p = NonlinearityParams(lam=2.5, eps=0.5)
    assert f_prime(0.0, p) == pytest.approx(2.5, rel=1e-14)


def test_primitive_at_eps_one_matches_closed_form():
    p1 = NonlinearityParams(lam=1.0, eps=1.0)
    assert F_eval(1.0, p1) == pytest.approx((math.e**2 - 1.0) / 4.0, abs=1e-10)


def test_mt_sub_primitive_matches_closed_form():
    p = NonlinearityParams(lam=1.0, eps=0.0, family=Family.MT_SUB)
    for s in (0.3, 1.0, 1.7):
        assert F_eval(s, p) == pytest.approx(0.5 * math.expm1(s * s), abs=1e-10)


def test_parameters_accept_alias_and_reject_out_of_range():
    p = NonlinearityParams.model_validate({"lambda": 1.5, "eps": 0.25})
    assert p.lam == 1.5
    assert p.to_dict() == {"lambda": 1.5, "eps": 0.25, "family": "mt_plus"}
    with pytest.raises(ValidationError):
        NonlinearityParams(lam=LAMBDA_1, eps=0.5)
    with pytest.raises(ValidationError):
        NonlinearityParams(lam=1.0, eps=1.5)
    with pytest.raises(ValidationError):
        NonlinearityParams(lam=-1.0, eps=0.5)


def test_overflow_guard_refuses_large_exponent(plus_half):
    nl = Nonlinearity(plus_half, guard=10.0)
    assert math.isfinite(nl.f(2.0))
    with pytest.raises(OverflowGuard) as exc_info:
        nl.f(3.0)
    assert exc_info.value.details["guard"] == 10.0
    with pytest.raises(OverflowGuard):
        nl.f_prime(3.0)


def test_evaluators_are_shared_per_parameter_set(plus_half):
    assert get_nonlinearity(plus_half) is get_nonlinearity(NonlinearityParams(lam=1.0, eps=0.5))


@given(s=amplitudes, eps=eps_values)
def test_f_is_odd(s, eps):
    p = NonlinearityParams(lam=1.0, eps=eps)
    assert f_eval(-s, p) == -f_eval(s, p)


@settings(max_examples=30, deadline=None)
@given(s=amplitudes, eps=eps_values)
def test_primitive_is_even_and_nonnegative(s, eps):
    p = NonlinearityParams(lam=1.0, eps=eps)
    value = F_eval(s, p)
    assert value >= 0.0
    assert F_eval(-s, p) == pytest.approx(value, rel=1e-12, abs=1e-14)


@settings(max_examples=20, deadline=None)
@given(s=st.floats(min_value=0.1, max_value=2.0), eps=eps_values)
def test_primitive_derivative_is_f(s, eps):
    p = NonlinearityParams(lam=1.0, eps=eps)
    h = 1e-4
    slope = (F_eval(s + h, p) - F_eval(s - h, p)) / (2.0 * h)
    assert slope == pytest.approx(f_eval(s, p), rel=1e-6)


@settings(max_examples=30, deadline=None)
@given(s=st.floats(min_value=0.05, max_value=2.5), eps=eps_values)
def test_superquadratic(s, eps):
    p = NonlinearityParams(lam=1.0, eps=eps)
    assert f_eval(s, p) * s > 2.0 * F_eval(s, p)


@given(s=st.floats(min_value=0.01, max_value=3.0), t=st.floats(min_value=1.01, max_value=2.0),
       eps=eps_values, family=st.sampled_from(list(Family)))
def test_growth_ratio_increases(s, t, eps, family):
    p = NonlinearityParams(lam=1.0, eps=eps, family=family)
    assert f_eval(t * s, p) / (t * s) > f_eval(s, p) / s


def test_f_prime_at_one_without_perturbation():
    p0 = NonlinearityParams(lam=1.0, eps=0.0)
    assert f_prime(1.0, p0) == pytest.approx(4.0 * math.e**2, rel=1e-14)


@pytest.mark.parametrize("s", [0.3, 1.0, 2.0])
def test_f_prime_matches_central_difference(plus_half, s):
    h = 1e-5
    slope = (f_eval(s + h, plus_half) - f_eval(s - h, plus_half)) / (2.0 * h)
    assert f_prime(s, plus_half) == pytest.approx(slope, rel=1e-6)


def test_primitive_matches_fine_simpson_rule(plus_half):
    s = np.linspace(0.0, 1.0, 1_000_001)
    reference = integrate.simpson(s * np.exp(s * s + s**1.5), x=s)
    assert F_eval(1.0, plus_half) == pytest.approx(reference, abs=1e-10)


@pytest.mark.parametrize("s", [math.nan, math.inf, -math.inf])
def test_non_finite_arguments_are_rejected(plus_half, s):
    nl = get_nonlinearity(plus_half)
    for evaluate in (nl.f, nl.f_prime, nl.F, nl.log_abs_f):
        with pytest.raises(PreconditionError):
            evaluate(s)


def test_huge_arguments_give_infinite_exponents(plus_half):
    nl = get_nonlinearity(plus_half)
    assert nl.exponent(1e200) == math.inf
    assert nl.log_abs_f(1e200) == math.inf
    with pytest.raises(OverflowGuard):
        nl.f_prime(1e200)


def test_exponent_drop_matches_direct_difference(plus_half):
    nl = get_nonlinearity(plus_half)
    for s, d in ((1.0, 0.25), (3.0, 1e-3), (5.0, 5.0)):
        assert nl.exponent_drop(s, d) == pytest.approx(nl.exponent(s - d) - nl.exponent(s), rel=1e-12, abs=1e-14)
