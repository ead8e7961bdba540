"""
Deadbeat controller design: explicit and implicit unconstrained forms, the
terminal weight from the Lyapunov equation and the constrained MPC.
"""

from .cmpc import (
    CandidateReport, ConstrainedMpc, CostDecreaseReport, StepResult, TerminalSetCertificate,
    VertexViolation, bisect_terminal_halfwidth, design_constrained_mpc,
    perturbed_solution_residual, verify_terminal_set,
)
from .deadbeat import (
    DeadbeatGain, TerminalEqualitySolution, WeightSpec, closed_loop_matrix, deadbeat_gain,
    nilpotency_index, solve_terminal_cost_unconstrained, solve_terminal_equality,
    unconstrained_controller_step,
)
from .lyap import LyapunovResult, is_schur_stable, solve_discrete_lyapunov, terminal_weight

__all__ = [
    'CandidateReport', 'ConstrainedMpc', 'CostDecreaseReport', 'StepResult',
    'TerminalSetCertificate', 'VertexViolation', 'bisect_terminal_halfwidth',
    'design_constrained_mpc', 'perturbed_solution_residual', 'verify_terminal_set',
    'DeadbeatGain', 'TerminalEqualitySolution', 'WeightSpec', 'closed_loop_matrix',
    'deadbeat_gain', 'nilpotency_index', 'solve_terminal_cost_unconstrained',
    'solve_terminal_equality', 'unconstrained_controller_step',
    'LyapunovResult', 'is_schur_stable', 'solve_discrete_lyapunov', 'terminal_weight',
]
