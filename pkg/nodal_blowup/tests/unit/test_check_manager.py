from unittest.mock import MagicMock

import pytest

from nodal_blowup.core.exceptions import Stiffness
from nodal_blowup.tools.base_check import CheckCategory, CheckOutcome
from nodal_blowup.tools.check_manager import CheckManager
from nodal_blowup.tools.verification_checks import (
    FunctionCheck,
    VerificationContext,
    bessel_j0_series,
    build_manager,
    categories,
)


def make_check(name, func, category=CheckCategory.CLOSED_FORM, gating=True):
    return FunctionCheck(name, f"{name} check", category, "test", func, gating)


@pytest.fixture
def manager():
    return CheckManager()


def test_register_and_list(manager):
    manager.register_check(make_check("a", lambda ctx: CheckOutcome(passed=True)))
    manager.register_check(make_check("b", lambda ctx: CheckOutcome(passed=True), CheckCategory.TREND))
    assert [c["name"] for c in manager.list_checks()] == ["a", "b"]
    assert [c["name"] for c in manager.list_checks([CheckCategory.TREND])] == ["b"]
    with pytest.raises(ValueError):
        manager.register_check(make_check("a", lambda ctx: CheckOutcome(passed=True)))
    manager.unregister_check("a")
    assert manager.get_check("a") is None


def test_run_check_passes_context(manager):
    func = MagicMock(return_value=CheckOutcome(passed=True, value=1e-12, threshold=1e-10))
    manager.register_check(make_check("ok", func))
    context = MagicMock()
    result = manager.run_check("ok", context)
    func.assert_called_once_with(context)
    assert result.passed
    assert result.value == 1e-12
    assert result.error is None


def test_errors_become_failed_results(manager):
    manager.register_check(make_check("stiff", MagicMock(side_effect=Stiffness("aborted", amplitude=3.0))))
    manager.register_check(make_check("broken", MagicMock(side_effect=RuntimeError("boom"))))
    report = manager.run(MagicMock())
    assert not report.passed
    stiff, broken = report.results
    assert stiff.error == {"error": "Stiffness", "message": "aborted", "details": {"amplitude": 3.0}}
    assert broken.error["error"] == "RuntimeError"
    assert [r.name for r in report.failures] == ["stiff", "broken"]


def test_non_gating_failures_do_not_fail_report(manager):
    manager.register_check(make_check("pass", lambda ctx: CheckOutcome(passed=True)))
    manager.register_check(make_check("warn", lambda ctx: CheckOutcome(passed=False),
                                      CheckCategory.EXPECTATION, gating=False))
    report = manager.run(None)
    assert report.passed
    assert report.to_dict()["passed"] is True
    assert "elapsed" not in report.to_dict()["results"][0]


def test_category_filter_and_history(manager):
    manager.register_check(make_check("fast", lambda ctx: CheckOutcome(passed=True)))
    manager.register_check(make_check("slow", lambda ctx: CheckOutcome(passed=False), CheckCategory.TREND))
    report = manager.run(None, [CheckCategory.CLOSED_FORM])
    assert [r.name for r in report.results] == ["fast"]
    manager.run_check("fast", None)
    assert len(manager.get_execution_history("fast")) == 2
    assert manager.get_execution_history("slow") == []
    with pytest.raises(KeyError):
        manager.run_check("missing", None)


def test_suite_layout():
    manager = build_manager()
    names = [c["name"] for c in manager.list_checks()]
    assert len(names) == len(set(names)) == 30
    assert CheckCategory.TREND not in categories(False)
    assert CheckCategory.TREND in categories(True)
    gating = {c["name"]: c["gating"] for c in manager.list_checks()}
    assert gating["moser_upper_bound"] is False
    assert gating["moser_outer_piece"] is False


def test_closed_form_checks_pass():
    manager = build_manager()
    report = manager.run(VerificationContext(), [CheckCategory.CLOSED_FORM])
    assert report.passed, [(r.name, r.detail) for r in report.failures]


def test_bessel_series():
    assert bessel_j0_series(0.0) == 1.0
    assert bessel_j0_series(2.404825557695773) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("name", [
    "nonlinearity_superquadratic",
    "monotone_quotient",
    "flux_identity",
    "first_arch_decreasing",
    "event_exactness",
    "tolerance_halving",
])
def test_profile_invariants_gate_and_pass(name):
    manager = build_manager()
    assert manager.get_check(name).metadata.gating
    result = manager.run_check(name, VerificationContext())
    assert result.passed, (result.detail, result.error)
