"""
Closed-loop simulator and trajectory recorder.

The simulator only knows the plant and a controller callable mapping x(k) to
a ControlAction; every controller kind is wrapped by one of the adapters at
the bottom of this module.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..control.cmpc import ConstrainedMpc
from ..control.deadbeat import (
    DeadbeatGain, WeightSpec, solve_terminal_cost_unconstrained, solve_terminal_equality,
    unconstrained_controller_step,
)
from ..error_handling.exceptions import ControllerInfeasible, PreconditionViolation
from ..linalg.matrix import max_norm
from ..plant.lti import ConstraintSpec, LinearSystem, build_prediction, check_membership, step


logger = logging.getLogger(__name__)

SETTLE_TOLERANCE = 1e-9
VIOLATION_TOLERANCE = 1e-8


@dataclass
class ControlAction:
    """Controller output for one step; diagnostics are None for explicit laws."""
    u: float
    objective: Optional[float] = None
    terminal_state: Optional[NDArray[np.float64]] = None
    active_set_size: Optional[int] = None
    details: Any = None


Controller = Callable[[NDArray[np.float64]], ControlAction]


@dataclass
class StepRecord:
    """x(k) and what the controller did there; the last record of a run has u = None."""
    k: int
    x: NDArray[np.float64]
    u: Optional[float] = None
    objective: Optional[float] = None
    terminal_state: Optional[NDArray[np.float64]] = None
    active_set_size: Optional[int] = None
    details: Any = None

    @property
    def terminal_norm(self) -> Optional[float]:
        return None if self.terminal_state is None else max_norm(self.terminal_state)


@dataclass
class Trajectory:
    """Recorded closed-loop run x(0)…x(T) with inputs u(0)…u(T−1)."""
    steps: List[StepRecord] = field(default_factory=list)
    settled_at: Optional[int] = None
    constraint_violations: int = 0
    failure: Optional[str] = None
    failed_at: Optional[int] = None

    @property
    def completed(self) -> bool:
        return self.failure is None

    @property
    def n(self) -> int:
        return self.steps[0].x.shape[0]

    @property
    def states(self) -> NDArray[np.float64]:
        return np.array([record.x for record in self.steps])

    @property
    def controls(self) -> NDArray[np.float64]:
        return np.array([record.u for record in self.steps if record.u is not None])

    @property
    def terminal_states(self) -> List[Optional[NDArray[np.float64]]]:
        return [record.terminal_state for record in self.steps if record.u is not None]


def settling_index(states: Sequence[ArrayLike], tolerance: float = SETTLE_TOLERANCE) -> Optional[int]:
    """
    First k after which every recorded ‖x‖_max stays at or below
    tolerance·max(1, ‖x(0)‖_max); None when the last state is above it.
    """
    if not len(states):
        return None
    threshold = tolerance * max(1.0, max_norm(states[0]))
    settled = None
    for k in range(len(states) - 1, -1, -1):
        if max_norm(states[k]) > threshold:
            break
        settled = k
    return settled


def run_closed_loop(sys: LinearSystem, controller: Controller, x0: ArrayLike, horizon_steps: int,
                    spec: Optional[ConstraintSpec] = None,
                    settle_tolerance: float = SETTLE_TOLERANCE) -> Trajectory:
    """
    Iterate x(k+1) = A·x(k) + B·u(k) with u(k) from the controller.

    Args:
        sys: Plant
        controller: Maps x(k) to a ControlAction
        x0: Initial state (not modified)
        horizon_steps: Number of controller calls
        spec: Constraints counted into ``constraint_violations`` when given
        settle_tolerance: Relative settling threshold

    Returns:
        Trajectory: complete, or halted at the step where the controller
        raised ControllerInfeasible with the failure annotated
    """
    if horizon_steps < 1:
        raise PreconditionViolation(f"horizon_steps must be at least 1, got {horizon_steps}")
    x = np.array(x0, dtype=np.float64).reshape(-1)
    if x.shape[0] != sys.n:
        raise PreconditionViolation(f"x0 has {x.shape[0]} entries, plant has n={sys.n}")

    trajectory = Trajectory()
    for k in range(horizon_steps):
        try:
            action = controller(x.copy())
        except ControllerInfeasible as e:
            trajectory.failure = e.message
            trajectory.failed_at = k
            logger.warning(f"Controller infeasible at k={k}: {e.message}")
            break

        if spec is not None and not check_membership(spec, x, action.u, VIOLATION_TOLERANCE).admissible:
            trajectory.constraint_violations += 1
        trajectory.steps.append(StepRecord(
            k=k, x=x, u=float(action.u), objective=action.objective,
            terminal_state=action.terminal_state, active_set_size=action.active_set_size,
            details=action.details,
        ))
        x = step(sys, x, action.u)

    if spec is not None and not check_membership(spec, x, None, VIOLATION_TOLERANCE).in_state_set:
        trajectory.constraint_violations += 1
    trajectory.steps.append(StepRecord(k=len(trajectory.steps), x=x))
    trajectory.settled_at = settling_index([record.x for record in trajectory.steps], settle_tolerance)
    logger.debug(f"Closed loop finished: {len(trajectory.steps)} states, settled_at={trajectory.settled_at}")
    return trajectory


def replay_controls(sys: LinearSystem, x0: ArrayLike, controls: Sequence[float]) -> NDArray[np.float64]:
    """Open-loop states x(0)…x(T) under a recorded control column."""
    x = np.array(x0, dtype=np.float64)
    states = [x]
    for u in controls:
        x = step(sys, x, u)
        states.append(x)
    return np.array(states)


def dynamics_residual(sys: LinearSystem, states: ArrayLike, controls: ArrayLike) -> float:
    """max_k ‖x(k+1) − A·x(k) − B·u(k)‖_max over a recorded run."""
    states = np.asarray(states, dtype=np.float64)
    controls = np.asarray(controls, dtype=np.float64)
    residual = 0.0
    for k, u in enumerate(controls):
        residual = max(residual, max_norm(states[k + 1] - step(sys, states[k], u)))
    return residual


@dataclass
class BatchJob:
    """One independent run; the controller is built inside the worker."""
    sys: LinearSystem
    controller_factory: Callable[[], Controller]
    x0: NDArray[np.float64]
    horizon_steps: int
    spec: Optional[ConstraintSpec] = None


def run_batch(jobs: Sequence[BatchJob], workers: int = 4) -> List[Trajectory]:
    """Run jobs on a thread pool; results are returned in job order."""
    def run(job: BatchJob) -> Trajectory:
        return run_closed_loop(job.sys, job.controller_factory(), job.x0, job.horizon_steps, job.spec)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        return list(executor.map(run, jobs))


# --------------------------------------------------------------------------
# Controller adapters
# --------------------------------------------------------------------------

def explicit_deadbeat_controller(gain: DeadbeatGain) -> Controller:
    """u = −K_db·x."""
    def control(x: NDArray[np.float64]) -> ControlAction:
        return ControlAction(u=unconstrained_controller_step(gain, x))
    return control


def terminal_equality_controller(sys: LinearSystem, weights: WeightSpec) -> Controller:
    """First element of the terminal-equality optimum, re-solved every step."""
    pred = build_prediction(sys)

    def control(x: NDArray[np.float64]) -> ControlAction:
        solution = solve_terminal_equality(sys, weights, x, pred)
        return ControlAction(u=float(solution.u_sequence[0]), terminal_state=solution.predicted_states[-1])
    return control


def terminal_cost_controller(sys: LinearSystem, p: ArrayLike) -> Controller:
    """First element of the unconstrained terminal-cost optimum."""
    pred = build_prediction(sys)

    def control(x: NDArray[np.float64]) -> ControlAction:
        u_sequence = solve_terminal_cost_unconstrained(sys, p, x, pred)
        terminal = pred.terminal_state(x, u_sequence)
        return ControlAction(u=float(u_sequence[0]), objective=float(terminal @ np.asarray(p) @ terminal),
                             terminal_state=terminal)
    return control


def constrained_controller(mpc: ConstrainedMpc) -> Controller:
    """Receding-horizon constrained MPC; an infeasible QP halts the run."""
    def control(x: NDArray[np.float64]) -> ControlAction:
        result = mpc.controller_step(x)
        if not result.feasible:
            raise ControllerInfeasible(result.diagnostics, {'x': x.tolist()})
        return ControlAction(u=result.u_applied, objective=result.objective,
                             terminal_state=result.terminal_state,
                             active_set_size=len(result.active_set), details=result)
    return control
