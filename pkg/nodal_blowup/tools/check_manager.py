import logging
import threading
import time
from typing import Any, Dict, Iterable, List, Optional

from pydantic import BaseModel, Field

from ..core.exceptions import NodalBlowupError
from .base_check import BaseCheck, CheckCategory, CheckResult

logger = logging.getLogger(__name__)


class VerificationReport(BaseModel):
    """Outcome of one verification run"""
    results: List[CheckResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results if r.gating)

    @property
    def failures(self) -> List[CheckResult]:
        return [r for r in self.results if r.gating and not r.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "results": [r.model_dump(mode="json", exclude={"elapsed"}) for r in self.results],
        }


class CheckManager:
    """Registry of verification checks with execution history"""

    def __init__(self):
        self._checks: Dict[str, BaseCheck] = {}
        self._execution_history: Dict[str, List[Dict[str, Any]]] = {}
        self._lock = threading.Lock()

    def register_check(self, check: BaseCheck) -> None:
        """Register a check; names must be unique"""
        name = check.metadata.name
        with self._lock:
            if name in self._checks:
                raise ValueError(f"Check {name} is already registered")
            self._checks[name] = check
        logger.debug(f"Registered check: {name}")

    def unregister_check(self, name: str) -> None:
        with self._lock:
            self._checks.pop(name, None)

    def get_check(self, name: str) -> Optional[BaseCheck]:
        return self._checks.get(name)

    def list_checks(self, categories: Optional[Iterable[CheckCategory]] = None) -> List[Dict[str, Any]]:
        """List check metadata, in registration order"""
        wanted = set(categories) if categories is not None else None
        return [
            check.to_dict()
            for check in self._checks.values()
            if wanted is None or check.metadata.category in wanted
        ]

    def run_check(self, name: str, context: Any) -> CheckResult:
        """Execute one check; errors become failed results instead of propagating"""
        check = self._checks.get(name)
        if check is None:
            raise KeyError(f"Check {name} not found")
        meta = check.metadata
        start = time.perf_counter()
        error = None
        try:
            outcome = check.execute(context)
            passed, value, threshold, detail = outcome.passed, outcome.value, outcome.threshold, outcome.detail
        except NodalBlowupError as e:
            logger.error(f"Check {name} raised {type(e).__name__}: {e.message}")
            passed, value, threshold, detail = False, None, None, e.message
            error = e.to_dict()
        except Exception as e:
            logger.error(f"Check {name} failed unexpectedly: {e}", exc_info=True)
            passed, value, threshold, detail = False, None, None, str(e)
            error = {"error": type(e).__name__, "message": str(e), "details": {}}
        result = CheckResult(
            name=name,
            category=meta.category,
            module=meta.module,
            gating=meta.gating,
            passed=passed,
            value=value,
            threshold=threshold,
            detail=detail,
            error=error,
            elapsed=time.perf_counter() - start,
        )
        self._add_to_history(result)
        return result

    def run(self, context: Any, categories: Optional[Iterable[CheckCategory]] = None) -> VerificationReport:
        """Run every registered check of the given categories in registration order"""
        wanted = set(categories) if categories is not None else None
        report = VerificationReport()
        for name, check in list(self._checks.items()):
            if wanted is not None and check.metadata.category not in wanted:
                continue
            result = self.run_check(name, context)
            status = "PASS" if result.passed else ("FAIL" if result.gating else "WARN")
            logger.info(f"{status} {name} ({result.elapsed:.2f}s)")
            report.results.append(result)
        return report

    def _add_to_history(self, result: CheckResult) -> None:
        with self._lock:
            self._execution_history.setdefault(result.name, []).append(result.model_dump(mode="json"))

    def get_execution_history(self, name: Optional[str] = None) -> List[Dict[str, Any]]:
        """Get execution history for a check or all checks"""
        with self._lock:
            if name:
                return list(self._execution_history.get(name, []))
            return [record for records in self._execution_history.values() for record in records]
