#!/usr/bin/env python3
"""
Test script for the closed-loop simulator.
"""
import sys
from pathlib import Path

# Add project root to Python path
sys.path.insert(0, str(Path(__file__).parent))

import numpy as np

from src.control.cmpc import design_constrained_mpc
from src.control.deadbeat import WeightSpec, deadbeat_gain
from src.error_handling.exceptions import PreconditionViolation
from src.linalg.matrix import max_norm
from src.plant.catalog import BENCHMARK_TERMINAL_WEIGHT, benchmark_plant
from src.plant.lti import ConstraintSpec
from src.simulation.simkit import (
    BatchJob, constrained_controller, dynamics_residual, explicit_deadbeat_controller, replay_controls,
    run_batch, run_closed_loop, settling_index, terminal_cost_controller, terminal_equality_controller
)
from src.verification.property_suite import saturating_initial_state


def test_settling_index():
    """Relative settling threshold."""
    print("Testing settling index...")

    assert settling_index([[1.0], [0.5], [0.0], [0.0]]) == 2
    assert settling_index([[1.0], [0.0], [0.5]]) is None
    assert settling_index([]) is None
    assert settling_index([[0.0], [0.0]]) == 0
    assert settling_index([[1000.0], [5e-7], [0.0]], tolerance=1e-9) == 1
    print("✓ Settling index")


def test_unconstrained_runs():
    """Deadbeat settles in 3 steps; all unconstrained adapters agree."""
    print("Testing unconstrained closed loops...")

    plant = benchmark_plant()
    gain = deadbeat_gain(plant)
    x0 = np.array([1.0, -0.5, 2.0])

    explicit = run_closed_loop(plant, explicit_deadbeat_controller(gain), x0, 10)
    assert explicit.completed
    assert explicit.settled_at == 3
    assert len(explicit.steps) == 11
    assert explicit.steps[-1].u is None
    assert explicit.controls.shape == (10,)
    assert np.array_equal(x0, [1.0, -0.5, 2.0])

    equality = run_closed_loop(plant, terminal_equality_controller(plant, WeightSpec.scaled_identity(3)), x0, 10)
    cost = run_closed_loop(plant, terminal_cost_controller(plant, np.array(BENCHMARK_TERMINAL_WEIGHT)), x0, 10)
    assert max_norm(explicit.states - equality.states) <= 1e-9 * max_norm(x0)
    assert max_norm(equality.states - cost.states) <= 1e-9 * max_norm(x0)
    assert equality.steps[0].terminal_norm == 0.0
    assert cost.steps[0].objective < 1e-18

    zero = run_closed_loop(plant, explicit_deadbeat_controller(gain), np.zeros(3), 5)
    assert zero.settled_at == 0
    assert not np.any(zero.states)
    print("✓ Unconstrained closed loops")


def test_replay_and_residual():
    """Recorded controls reproduce the recorded states."""
    print("Testing replay...")

    plant = benchmark_plant()
    trajectory = run_closed_loop(plant, explicit_deadbeat_controller(deadbeat_gain(plant)), [0.3, 0.2, -0.4], 6)
    replayed = replay_controls(plant, trajectory.steps[0].x, trajectory.controls)
    assert np.array_equal(replayed, trajectory.states)
    assert dynamics_residual(plant, trajectory.states, trajectory.controls) == 0.0
    print("✓ Replay")


def test_constrained_run():
    """Constrained run stays in bounds and settles."""
    print("Testing constrained closed loop...")

    plant = benchmark_plant()
    spec = ConstraintSpec.input_only(3, -6.0, 6.0)
    mpc = design_constrained_mpc(plant, spec, WeightSpec.scaled_identity(3), auto_bisect=True)
    x0 = saturating_initial_state(mpc, np.random.default_rng(17))
    assert x0 is not None

    trajectory = run_closed_loop(plant, constrained_controller(mpc.fresh()), x0, 30, spec=mpc.spec)
    assert trajectory.completed
    assert trajectory.constraint_violations == 0
    assert np.all(np.abs(trajectory.controls) <= 6.0 + 1e-9)
    assert trajectory.settled_at is not None and trajectory.settled_at >= 3
    assert all(record.active_set_size is not None for record in trajectory.steps[:-1])
    print(f"✓ Constrained run settled at k={trajectory.settled_at}")


def test_infeasible_run():
    """An infeasible start halts the run with the failure recorded."""
    print("Testing infeasible start...")

    plant = benchmark_plant()
    spec = ConstraintSpec.input_only(3, -0.001, 0.001)
    mpc = design_constrained_mpc(plant, spec, WeightSpec.scaled_identity(3), auto_bisect=True)
    trajectory = run_closed_loop(plant, constrained_controller(mpc), [1.0, 1.0, 1.0], 10, spec=mpc.spec)
    assert not trajectory.completed
    assert trajectory.failed_at == 0
    assert len(trajectory.steps) == 1
    assert trajectory.steps[0].u is None
    assert "phase 1" in trajectory.failure
    print("✓ Infeasible start")


def test_batch():
    """Batch results come back in job order."""
    print("Testing batch runs...")

    plant = benchmark_plant()
    gain = deadbeat_gain(plant)
    starts = [np.array([float(i), 0.0, -1.0]) for i in range(6)]
    jobs = [BatchJob(plant, lambda: explicit_deadbeat_controller(gain), x0, 5) for x0 in starts]
    trajectories = run_batch(jobs, workers=3)
    assert len(trajectories) == 6
    for x0, trajectory in zip(starts, trajectories):
        assert np.array_equal(trajectory.steps[0].x, x0)
        assert trajectory.settled_at == 3
    print("✓ Batch runs")


def test_preconditions():
    """Bad horizons and initial states are rejected."""
    print("Testing preconditions...")

    plant = benchmark_plant()
    controller = explicit_deadbeat_controller(deadbeat_gain(plant))
    for x0, steps in (([1.0, 0.0, 0.0], 0), ([1.0, 0.0], 5)):
        try:
            run_closed_loop(plant, controller, x0, steps)
            assert False, "precondition should have been enforced"
        except PreconditionViolation:
            pass
    print("✓ Preconditions")


if __name__ == "__main__":
    test_settling_index()
    test_unconstrained_runs()
    test_replay_and_residual()
    test_constrained_run()
    test_infeasible_run()
    test_batch()
    test_preconditions()
    print("\n✓ Simulator tests completed")
