import math

import numpy as np
import pytest

from nodal_blowup.core.exceptions import NoBracket, PreconditionError, StepSizeUnderflow, Stiffness
from nodal_blowup.core.nonlinearity import NonlinearityParams
from nodal_blowup.core.shooting import certify, solve_ground, solve_nodal


@pytest.mark.parametrize("fixture_name, k", [("nodal_k1", 1), ("nodal_k2", 2)])
def test_nodal_solution_is_certified(request, fixture_name, k):
    sol = request.getfixturevalue(fixture_name)
    assert sol.k == k
    assert len(sol.log_zeros) == k
    assert abs(sol.terminal_value) <= 1e-8
    assert sol.log_zeros[-1] < 0.0
    assert sol.log_zeros == sorted(sol.log_zeros)
    assert sol.max_relative_nehari < 1e-6
    assert all(region.functional > 0.0 for region in sol.regions)
    for region in sol.regions:
        middle = region.log_hi - 1.0 if region.index == 1 else 0.5 * (region.log_lo + region.log_hi)
        assert region.sign * sol.profile.state(middle)[0] > 0.0
    assert certify(sol).passed


def test_nodal_solution_records_branch(nodal_k1):
    meta = nodal_k1.metadata
    assert meta.branch == "smallest_amplitude"
    lo, hi = meta.bracket
    assert lo <= nodal_k1.amplitude < hi
    assert meta.scan_tol >= meta.tol
    assert meta.scan[-1].passed


def test_more_zeros_need_larger_amplitude(nodal_k1, nodal_k2):
    assert nodal_k2.amplitude > nodal_k1.amplitude
    assert nodal_k2.total_functional > nodal_k1.total_functional


def test_solution_document(nodal_k1):
    data = nodal_k1.to_dict(samples=11)
    assert data["params"] == {"lambda": 1.0, "eps": 0.5, "family": "mt_plus"}
    assert len(data["regions"]) == 2
    assert data["regions"][1]["sign"] == -1
    assert len(data["profile"]["r"]) == 11
    assert "scan" not in data["metadata"]
    assert data["total_functional"] == pytest.approx(sum(r["functional"] for r in data["regions"]))


def test_region_lookup(nodal_k1):
    assert nodal_k1.region(2).log_lo == nodal_k1.log_zeros[0]
    assert nodal_k1.region(2).r_lo == pytest.approx(nodal_k1.zeros[0], rel=1e-15)
    with pytest.raises(PreconditionError):
        nodal_k1.region(3)


def test_ground_solution(ground):
    assert ground.k == 0
    assert ground.log_zeros == []
    assert 0.0 < ground.total_functional < 2.0 * math.pi
    assert np.all(ground.profile.du(np.linspace(1e-3, 1.0, 200)) < 0.0)
    assert abs(ground.terminal_value) <= 1e-8


def test_ground_returns_its_energy():
    sol, energy = solve_ground(2.0)
    assert energy == sol.total_functional
    assert sol.params.eps == 0.0


@pytest.mark.parametrize("p, k", [
    (NonlinearityParams(lam=1.0, eps=0.5), 0),
    (NonlinearityParams(lam=1.0, eps=0.0), 1),
    (NonlinearityParams(lam=1.0, eps=1.0), 1),
])
def test_nodal_preconditions(p, k):
    with pytest.raises(PreconditionError):
        solve_nodal(p, k)


def test_ground_rejects_lambda_above_first_eigenvalue():
    with pytest.raises(PreconditionError):
        solve_ground(6.0)


def test_narrow_window_has_no_bracket(reference_params):
    with pytest.raises(NoBracket) as exc_info:
        solve_nodal(reference_params, 1, scan={"min": 0.1, "max": 0.2, "ratio": 1.05})
    scan = exc_info.value.details["scan"]
    assert scan[0]["amplitude"] == pytest.approx(0.1)
    assert not any(point["passed"] for point in scan)


def test_unrepresentable_amplitudes_are_reported_as_stiffness(reference_params):
    with pytest.raises(Stiffness) as exc_info:
        solve_nodal(reference_params, 1, scan={"min": 1e200, "max": 1e201, "ratio": 2.0})
    assert exc_info.value.details["reason"] == "overflow_guard"


@pytest.mark.parametrize("error, reason", [
    (StepSizeUnderflow("step size below spacing"), "step_size_underflow"),
    (ValueError("`y0` must be finite"), "invalid_state"),
    (FloatingPointError("overflow"), "invalid_state"),
])
def test_integrator_failures_end_the_scan(reference_params, mocker, error, reason):
    mocker.patch("nodal_blowup.core.shooting.integrate", side_effect=error)
    with pytest.raises(Stiffness) as exc_info:
        solve_nodal(reference_params, 1)
    assert exc_info.value.details["reason"] == reason
    assert len(exc_info.value.details["scan"]) == 1


def test_k1_amplitude_at_reference_parameters(nodal_k1):
    lo, hi = nodal_k1.metadata.bracket
    assert lo < 32.35363 < hi
    assert nodal_k1.amplitude == pytest.approx(32.35363, rel=1e-5)
    assert nodal_k1.log_zeros[0] == pytest.approx(-26.305, abs=1e-2)
    second = nodal_k1.region(2)
    assert second.max_log_radius == pytest.approx(-2.70, abs=1e-2)
    assert second.amplitude == pytest.approx(1.265, abs=1e-3)


def test_k2_inner_zero_is_beyond_double_range(nodal_k2):
    inner, outer = nodal_k2.log_zeros
    assert inner == pytest.approx(-174702.0, rel=1e-3)
    assert outer == pytest.approx(-22.456, abs=1e-2)
    assert nodal_k2.zeros[0] == 0.0
    lo, hi = nodal_k2.metadata.bracket
    assert 12173.0 < lo < hi < 12783.0


def test_k2_region_amplitudes_decrease(nodal_k2):
    amplitudes = [region.amplitude for region in nodal_k2.regions]
    assert amplitudes == sorted(amplitudes, reverse=True)
    assert len(set(amplitudes)) == 3


def test_ground_amplitude_vanishes_towards_first_eigenvalue(ground):
    near, _ = solve_ground(5.7)
    assert 0.0 < near.amplitude < ground.amplitude
    assert ground.amplitude == pytest.approx(1.30415, rel=1e-4)
    assert ground.total_functional == pytest.approx(1.33132, rel=1e-4)
