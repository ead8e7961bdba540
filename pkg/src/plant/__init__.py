"""
Plant model, constraint sets and prediction matrices.
"""

from .catalog import benchmark_plant, condition_estimate, random_controllable_system
from .lti import (
    ConstraintSpec, LinearSystem, MembershipReport, PredictionStack,
    build_prediction, check_membership, controllability_matrix, step,
)

__all__ = [
    'benchmark_plant', 'condition_estimate', 'random_controllable_system',
    'ConstraintSpec', 'LinearSystem', 'MembershipReport', 'PredictionStack',
    'build_prediction', 'check_membership', 'controllability_matrix', 'step',
]
