"""
Error classification and reporting for the command-line pipelines.

This module provides:
- Error categories and severity levels
- ErrorInfo records with context for logging
- An ErrorHandler that logs errors and maps them to exit codes
"""
import logging
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Dict, Optional


logger = logging.getLogger(__name__)


class ErrorSeverity(Enum):
    """Error severity levels."""
    LOW = "low"           # Reported outcome, run continues
    MEDIUM = "medium"     # Run halted, partial results kept
    HIGH = "high"         # Command failed
    CRITICAL = "critical" # Unexpected fault


class ErrorCategory(Enum):
    """Error categories for different handling strategies."""
    LINEAR_ALGEBRA = "linear_algebra"
    MODEL = "model"
    DESIGN = "design"
    OPTIMIZATION = "optimization"
    SIMULATION = "simulation"
    CONFIGURATION = "configuration"
    OUTPUT = "output"
    SYSTEM_ERROR = "system_error"


@dataclass
class ErrorInfo:
    """Information about an error occurrence."""
    category: ErrorCategory
    severity: ErrorSeverity
    message: str
    exception: Optional[Exception] = None
    timestamp: datetime = field(default_factory=datetime.now)
    context: Dict[str, Any] = field(default_factory=dict)


class ErrorHandler:
    """
    Logs classified errors with their context and maps them to exit codes.
    """

    _SEVERITY_BY_CATEGORY = {
        ErrorCategory.SIMULATION: ErrorSeverity.MEDIUM,
        ErrorCategory.OPTIMIZATION: ErrorSeverity.MEDIUM,
    }

    def handle_error(self, error_info: ErrorInfo) -> None:
        """
        Log an error at the level its severity calls for.

        Args:
            error_info: Information about the error
        """
        self._log_error(error_info)

    def handle_exception(self, exception: Exception, context: Optional[Dict[str, Any]] = None) -> int:
        """
        Classify an exception, log it and return the matching exit code.

        Args:
            exception: The exception raised by a pipeline
            context: Additional context information

        Returns:
            int: Process exit code
        """
        category = getattr(exception, 'category', ErrorCategory.SYSTEM_ERROR)
        if category == ErrorCategory.SYSTEM_ERROR:
            severity = ErrorSeverity.CRITICAL
        else:
            severity = self._SEVERITY_BY_CATEGORY.get(category, ErrorSeverity.HIGH)

        merged_context = dict(getattr(exception, 'context', {}) or {})
        merged_context.update(context or {})
        self.handle_error(ErrorInfo(
            category=category,
            severity=severity,
            message=getattr(exception, 'message', str(exception)),
            exception=exception,
            context=merged_context,
        ))
        return getattr(exception, 'exit_code', 1)

    def _log_error(self, error_info: ErrorInfo):
        """Log an error with appropriate level."""
        log_message = f"[{error_info.category.value}] {error_info.message}"

        if error_info.exception:
            log_message += f" - {type(error_info.exception).__name__}"

        if error_info.context:
            context_str = ", ".join(f"{k}={v}" for k, v in error_info.context.items())
            log_message += f" (Context: {context_str})"

        if error_info.severity == ErrorSeverity.CRITICAL:
            logger.critical(log_message, exc_info=error_info.exception)
        elif error_info.severity == ErrorSeverity.HIGH:
            logger.error(log_message)
        elif error_info.severity == ErrorSeverity.MEDIUM:
            logger.warning(log_message)
        else:
            logger.info(log_message)



# Global error handler instance
error_handler = ErrorHandler()


def handle_infeasibility(message: str, context: Optional[Dict[str, Any]] = None) -> None:
    """
    Report an infeasible optimization as a reported outcome, not a fault.

    Args:
        message: What was infeasible
        context: Additional context information
    """
    error_handler.handle_error(ErrorInfo(
        category=ErrorCategory.OPTIMIZATION,
        severity=ErrorSeverity.LOW,
        message=message,
        context=context or {},
    ))
