from abc import ABC, abstractmethod
from enum import Enum
from typing import Any, Dict, Optional

from pydantic import BaseModel


class CheckCategory(str, Enum):
    CLOSED_FORM = "closed_form"
    INVARIANT = "invariant"
    TREND = "trend"
    EXPECTATION = "expectation"


class CheckMetadata(BaseModel):
    name: str
    description: str
    category: CheckCategory
    module: str
    gating: bool = True
    version: str = "1.0.0"


class CheckOutcome(BaseModel):
    """What a check reports back; the manager adds timing and metadata."""
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""


class CheckResult(BaseModel):
    name: str
    category: CheckCategory
    module: str
    gating: bool
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""
    error: Optional[Dict[str, Any]] = None
    elapsed: float = 0.0


class BaseCheck(ABC):
    def __init__(self):
        self.metadata = self._get_metadata()

    @abstractmethod
    def _get_metadata(self) -> CheckMetadata:
        """Return the check's metadata"""
        pass

    @abstractmethod
    def execute(self, context: Any) -> CheckOutcome:
        """Run the check against a shared verification context"""
        pass

    def to_dict(self) -> Dict[str, Any]:
        """Convert check metadata to dictionary format for reports"""
        return {
            "name": self.metadata.name,
            "description": self.metadata.description,
            "category": self.metadata.category.value,
            "module": self.metadata.module,
            "gating": self.metadata.gating,
            "version": self.metadata.version,
        }
