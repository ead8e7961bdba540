"""
Dense active-set QP solver.
"""

from .qp import (
    KktReport, Phase1Result, QpProblem, QpSolution, QpStatus, kkt_report,
    phase1_feasible, qp_solve,
)
