import math

import pytest

from nodal_blowup.core.exceptions import LogOverflow, NoRoot, OverflowGuard, PreconditionError
from nodal_blowup.core.moser import (
    MoserPiece,
    cutoff_overlap_closed_form,
    cutoff_overlap_energy,
    cutoff_value,
    moser_dirichlet,
    moser_value,
    nehari_gap,
    nehari_project,
    nested_params,
)
from nodal_blowup.core.nonlinearity import NonlinearityParams

LOG_TENTH = math.log(0.1)


class GuardedFunction:
    """A radial function whose every integral trips the overflow guard."""

    def dirichlet(self):
        return 1.0

    def planar_integral(self, log_density):
        raise OverflowGuard("guard", guard=700.0)

    def scale(self, c):
        return self


class FlatFunction(GuardedFunction):
    def dirichlet(self):
        return 0.0


def test_moser_value_shape():
    log_l, log_R = math.log(0.01), LOG_TENTH
    plateau = math.sqrt((log_R - log_l) / (2.0 * math.pi))
    assert moser_value(log_l, log_R, log_l - 5.0) == pytest.approx(plateau)
    assert moser_value(log_l, log_R, log_R) == 0.0
    assert moser_value(log_l, log_R, 0.5 * (log_l + log_R)) == pytest.approx(plateau / 2.0)
    assert moser_value(math.log(0.01), math.log(1.0), math.log(1e-5)) == pytest.approx(
        math.sqrt(math.log(100.0) / (2.0 * math.pi))
    )


def test_cutoff_value_shape():
    assert cutoff_value(-3.0, -1.0, -4.0) == 0.0
    assert cutoff_value(-3.0, -1.0, -2.0) == pytest.approx(0.5)
    assert cutoff_value(-3.0, -1.0, 0.0) == 1.0


def test_invalid_scale_pairs():
    with pytest.raises(PreconditionError):
        moser_value(-1.0, -2.0, -1.5)
    with pytest.raises(PreconditionError):
        moser_value(-2.0, 0.5, -1.0)
    with pytest.raises(PreconditionError):
        MoserPiece(-10.0, -2.0, -12.0, -11.0 + 5.0)


@pytest.mark.parametrize("l, R", [(0.01, 0.1), (1e-5, 0.1), (1e-60, 0.5)])
def test_moser_functions_have_unit_norm(l, R):
    assert moser_dirichlet(math.log(l), math.log(R)) == pytest.approx(1.0, abs=1e-10)


def test_planar_integral_of_unit_density_is_support_area():
    log_l, log_R = math.log(0.01), LOG_TENTH
    piece = MoserPiece(log_l, log_R)
    assert piece.planar_integral(lambda v: 0.0) == pytest.approx(math.pi * 0.01, rel=1e-10)
    cut = MoserPiece(log_l, log_R, math.log(1e-4), math.log(1e-3))
    assert cut.planar_integral(lambda v: 0.0) == pytest.approx(math.pi * (0.01 - 1e-8), rel=1e-10)


def test_nested_params_single_level():
    (level,) = nested_params(1, LOG_TENTH)
    assert level.index == 1
    assert level.log_l == pytest.approx(-10.0, rel=1e-12)
    assert level.log_p == 0.0
    assert not level.overflowed


def test_nested_params_two_levels_marks_overflow():
    level_1, level_2 = nested_params(2, LOG_TENTH)
    assert level_2.log_l == pytest.approx(-10.0, rel=1e-12)
    assert level_1.log_p == pytest.approx(-20.0, rel=1e-12)
    assert level_1.log_R == pytest.approx(-20.0 - math.exp(10.0), rel=1e-12)
    assert level_1.overflowed
    with pytest.raises(LogOverflow):
        nested_params(2, LOG_TENTH, strict=True)


def test_nested_params_stay_finite_for_shallow_start():
    level_1, level_2 = nested_params(2, -0.05)
    assert level_2.log_l == pytest.approx(-math.exp(0.05), rel=1e-12)
    assert level_1.log_p == pytest.approx(2.0 * level_2.log_l, rel=1e-12)
    assert level_1.log_R == pytest.approx(level_1.log_p - math.exp(-level_2.log_l), rel=1e-12)
    assert level_1.log_l == pytest.approx(-math.exp(-level_1.log_R), rel=1e-12)
    assert not level_1.overflowed


@pytest.mark.parametrize("k, log_R", [(0, LOG_TENTH), (1, 0.0), (1, 0.3)])
def test_nested_params_preconditions(k, log_R):
    with pytest.raises(PreconditionError):
        nested_params(k, log_R)


def test_cutoff_overlap_matches_closed_form():
    level_1, level_2 = nested_params(2, LOG_TENTH)
    args = (level_2.log_l, level_2.log_R, level_1.log_R, level_1.log_p)
    closed = cutoff_overlap_closed_form(*args)
    assert cutoff_overlap_energy(*args) == pytest.approx(closed, abs=1e-9)
    assert 0.0 < closed < 1e-3


def test_nehari_projection_lands_on_manifold():
    p = NonlinearityParams(lam=1.0, eps=0.5)
    piece = MoserPiece(math.log(1e-3), LOG_TENTH)
    t = nehari_project(piece, p)
    assert t > 0.0
    assert abs(nehari_gap(piece, p, t)) <= 1e-8 * t * t
    assert nehari_gap(piece, p, 0.5 * t) > 0.0


def test_nehari_projection_reports_guard_before_sign_change():
    p = NonlinearityParams(lam=1.0, eps=0.5)
    with pytest.raises(NoRoot) as exc_info:
        nehari_project(GuardedFunction(), p)
    assert exc_info.value.details["guard"] > 0.0


def test_nehari_projection_needs_positive_norm():
    with pytest.raises(PreconditionError):
        nehari_project(FlatFunction(), NonlinearityParams(lam=1.0, eps=0.5))


class QuadraticSlopePiece(MoserPiece):
    """Moser piece whose slope is bent into a parabola."""

    def _base(self, log_r):
        if log_r >= self.log_R:
            return 0.0
        if log_r <= self.log_l:
            return self.plateau
        return self.plateau * ((self.log_R - log_r) / self.width) ** 2


def test_slope_energy_follows_sampled_profile():
    piece = QuadraticSlopePiece(math.log(0.01), LOG_TENTH)
    assert piece.dirichlet() == pytest.approx(4.0 / 3.0, rel=1e-5)
    assert piece.scale(2.0).dirichlet() == pytest.approx(16.0 / 3.0, rel=1e-5)


def test_cutoff_ramp_energy_follows_sampled_profile():
    log_l, log_R = math.log(1e-3), LOG_TENTH
    log_a, log_b = math.log(1e-6), math.log(1e-5)
    piece = MoserPiece(log_l, log_R, log_a, log_b)
    plateau = math.sqrt((log_R - log_l) / (2.0 * math.pi))
    ramp = 2.0 * math.pi * plateau**2 / (log_b - log_a)
    assert piece.overlap_energy() == pytest.approx(ramp, rel=1e-8)
    assert piece.dirichlet() == pytest.approx(1.0 + ramp, rel=1e-8)
    assert piece.support == (log_a, log_R)
    assert MoserPiece(log_l, log_R).support == (-math.inf, log_R)
