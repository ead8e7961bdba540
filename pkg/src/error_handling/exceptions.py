"""
Exception hierarchy for the deadbeat MPC toolkit.

Every exception carries the ErrorCategory used by the error handler and the
process exit code the command line maps it to.
"""
from typing import Any, Dict, List, Optional

from .error_handler import ErrorCategory


class DeadbeatMpcError(Exception):
    """Base class for all toolkit errors."""

    category = ErrorCategory.SYSTEM_ERROR
    exit_code = 1

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context = context or {}


class NonFiniteValue(DeadbeatMpcError):
    """A matrix or vector contains NaN or Inf."""

    category = ErrorCategory.LINEAR_ALGEBRA


class DimensionMismatch(DeadbeatMpcError):
    """Operand shapes do not agree."""

    category = ErrorCategory.LINEAR_ALGEBRA


class SingularMatrix(DeadbeatMpcError):
    """An LU pivot fell below the relative threshold."""

    category = ErrorCategory.LINEAR_ALGEBRA

    def __init__(self, message: str, pivot_index: int = -1, context: Optional[Dict[str, Any]] = None):
        super().__init__(message, context)
        self.pivot_index = pivot_index


class NotSymmetric(DeadbeatMpcError):
    """A matrix expected to be symmetric is not."""

    category = ErrorCategory.LINEAR_ALGEBRA


class PositiveDefinitenessFailure(DeadbeatMpcError):
    """Cholesky factorization broke down at ``pivot_index``."""

    category = ErrorCategory.LINEAR_ALGEBRA

    def __init__(self, message: str, pivot_index: int, context: Optional[Dict[str, Any]] = None):
        super().__init__(message, context)
        self.pivot_index = pivot_index


class UncontrollablePair(DeadbeatMpcError):
    """(A, B) fails the controllability test."""

    category = ErrorCategory.MODEL


class DeadbeatDesignError(DeadbeatMpcError):
    """The computed deadbeat gain failed its nilpotency certificate."""

    category = ErrorCategory.DESIGN


class Unstable(DeadbeatMpcError):
    """The Lyapunov equation has no positive definite solution."""

    category = ErrorCategory.DESIGN


class TerminalSetUnverifiable(DeadbeatMpcError):
    """No terminal box passes the vertex certificate."""

    category = ErrorCategory.DESIGN

    def __init__(self, message: str, violations: Optional[List[Any]] = None, context: Optional[Dict[str, Any]] = None):
        super().__init__(message, context)
        self.violations = violations or []


class QpIterationLimit(DeadbeatMpcError):
    """The active-set loop did not terminate; ``problem_dump`` reproduces it."""

    category = ErrorCategory.OPTIMIZATION
    exit_code = 2

    def __init__(self, message: str, problem_dump: str = "", context: Optional[Dict[str, Any]] = None):
        super().__init__(message, context)
        self.problem_dump = problem_dump


class ControllerInfeasible(DeadbeatMpcError):
    """A controller could not produce an admissible input."""

    category = ErrorCategory.SIMULATION
    exit_code = 2


class PreconditionViolation(DeadbeatMpcError):
    """An operation was called with inputs that break its contract."""

    category = ErrorCategory.SIMULATION


class ScenarioError(DeadbeatMpcError, ValueError):
    """Scenario file failed validation; ``errors`` lists every problem found."""

    category = ErrorCategory.CONFIGURATION

    def __init__(self, errors: List[str], path: Optional[str] = None):
        where = f" in {path}" if path else ""
        super().__init__(f"Scenario validation errors{where}: " + "; ".join(errors), {'path': path})
        self.errors = list(errors)


class OutputError(DeadbeatMpcError):
    """Writing a result file failed."""

    category = ErrorCategory.OUTPUT

    def __init__(self, message: str, path: str):
        super().__init__(f"{message}: {path}", {'path': path})
        self.path = path
