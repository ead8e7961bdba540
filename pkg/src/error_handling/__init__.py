"""
Error classification, exceptions and reporting for the deadbeat MPC toolkit.
"""
from .error_handler import ErrorCategory, ErrorHandler, ErrorInfo, ErrorSeverity, error_handler
from .exceptions import (
    ControllerInfeasible, DeadbeatDesignError, DeadbeatMpcError, DimensionMismatch,
    NonFiniteValue, NotSymmetric, OutputError, PositiveDefinitenessFailure,
    PreconditionViolation, QpIterationLimit, ScenarioError, SingularMatrix,
    TerminalSetUnverifiable, UncontrollablePair, Unstable,
)
