"""Error types raised by the nodal blow-up laboratory."""

from typing import Any, Dict


class NodalBlowupError(Exception):
    """Base class for every error the laboratory raises on purpose."""

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable error object, as written to stderr by the CLI."""
        return {
            "error": type(self).__name__,
            "message": self.message,
            "details": {key: _plain(value) for key, value in self.details.items()},
        }


class PreconditionError(NodalBlowupError, ValueError):
    """Parameters outside the admissible range of an operation."""


class OverflowGuard(NodalBlowupError, ArithmeticError):
    """An assembled exponent exceeded the configured overflow guard."""


class QuadratureNonConvergence(NodalBlowupError):
    """Adaptive quadrature could not reach the requested tolerance."""


class StepSizeUnderflow(NodalBlowupError):
    """The integrator needed a step below floating point resolution."""


class AbortedProfile(NodalBlowupError):
    """A profile was used as if complete although it stopped before r_max."""


class NoBracket(NodalBlowupError):
    """No amplitude in the scan window yields the target nodal configuration."""


class Stiffness(NodalBlowupError):
    """Shooting failed because the integrator aborted before r = 1."""


class DomainError(NodalBlowupError, ValueError):
    """Argument outside the natural domain of a closed-form profile."""


class RegionTooNarrow(NodalBlowupError):
    """A rescaling window does not fit inside its nodal region."""


class NoRoot(NodalBlowupError):
    """Nehari projection bracket expansion hit the overflow guard first."""


class LogOverflow(NodalBlowupError):
    """A nested log-scale parameter is beyond double-exponential range."""


def _plain(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if hasattr(value, "model_dump"):
        return value.model_dump(mode="json")
    return str(value)
