"""
Closed-loop simulation for every controller kind.
"""

from .simkit import (
    BatchJob, ControlAction, StepRecord, Trajectory, constrained_controller, dynamics_residual,
    explicit_deadbeat_controller, replay_controls, run_batch, run_closed_loop, settling_index,
    terminal_cost_controller, terminal_equality_controller,
)
