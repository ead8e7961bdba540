"""
Scenario to design objects: plant, weights, constraints, gains, terminal
weight and the controller callable the simulator drives.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from ..config.models import AUTO_BISECT, DEADBEAT_GAIN, ControllerKind, Scenario
from ..control.cmpc import ConstrainedMpc, design_constrained_mpc
from ..control.deadbeat import DeadbeatGain, WeightSpec, deadbeat_gain
from ..control.lyap import LyapunovResult, terminal_weight
from ..linalg.matrix import as_mat, cholesky
from ..plant.lti import ConstraintSpec, LinearSystem
from ..reporting.design_report import DesignReport
from ..simulation.simkit import (
    Controller, constrained_controller, explicit_deadbeat_controller, terminal_cost_controller,
    terminal_equality_controller,
)


logger = logging.getLogger(__name__)


def build_system(scenario: Scenario) -> LinearSystem:
    return LinearSystem.from_lists(scenario.plant.a, scenario.plant.b)


def build_weights(scenario: Scenario, n: int) -> WeightSpec:
    q = scenario.weights.q
    if isinstance(q, (int, float)):
        return WeightSpec.scaled_identity(n, float(q), scenario.weights.r)
    return WeightSpec(as_mat(q, "Q"), scenario.weights.r)


def build_constraints(scenario: Scenario, n: int) -> ConstraintSpec:
    """Constraint sets; an auto-bisect terminal box starts from the all-ones shape."""
    constraints = scenario.constraints
    halfwidth = (np.ones(n) if constraints.terminal_halfwidth == AUTO_BISECT
                 else np.asarray(constraints.terminal_halfwidth, dtype=np.float64))
    h = np.asarray(constraints.state.h, dtype=np.float64).reshape(-1, n)
    rhs = np.asarray(constraints.state.rhs, dtype=np.float64).reshape(-1)
    return ConstraintSpec(h, rhs, constraints.u_min, constraints.u_max, halfwidth)


def stabilizing_gain(scenario: Scenario, gain: DeadbeatGain) -> NDArray[np.float64]:
    configured = scenario.controller.stabilizing_gain
    if configured == DEADBEAT_GAIN:
        return gain.k_db.copy()
    return np.asarray(configured, dtype=np.float64).reshape(-1)


@dataclass
class DesignResult:
    """Everything a command needs to run one scenario."""
    scenario: Scenario
    sys: LinearSystem
    gain: DeadbeatGain
    weights: WeightSpec
    report: DesignReport
    spec: Optional[ConstraintSpec] = None
    mpc: Optional[ConstrainedMpc] = None
    terminal_p: Optional[NDArray[np.float64]] = None
    lyapunov: Optional[LyapunovResult] = None

    @property
    def kind(self) -> ControllerKind:
        return self.scenario.kind


def design_scenario(scenario: Scenario) -> DesignResult:
    """
    Run the design stage of a scenario.

    Raises:
        UncontrollablePair: (A, B) is not controllable
        Unstable: the configured stabilizing gain does not stabilize the plant
        TerminalSetUnverifiable: the terminal box cannot be certified
    """
    sys = build_system(scenario)
    gain = deadbeat_gain(sys)
    weights = build_weights(scenario, sys.n)
    kind = scenario.kind
    logger.info(f"Designing '{scenario.name}' ({kind.value}), n={sys.n}")

    reference = scenario.reference
    report = DesignReport(
        scenario_name=scenario.name,
        kind=kind.value,
        k_db=gain.k_db,
        nilpotency_index=gain.nilpotency_index,
        s_inv_first_row=gain.s_inv_first_row,
        reference_gain=None if reference.deadbeat_gain is None else np.asarray(reference.deadbeat_gain, dtype=np.float64),
        reference_p=None if reference.terminal_weight is None else np.asarray(reference.terminal_weight, dtype=np.float64),
        reference_tolerance=reference.tolerance,
    )
    result = DesignResult(scenario=scenario, sys=sys, gain=gain, weights=weights, report=report)

    if kind == ControllerKind.CONSTRAINED:
        k = stabilizing_gain(scenario, gain)
        spec = build_constraints(scenario, sys.n)
        auto_bisect = scenario.constraints.terminal_halfwidth == AUTO_BISECT
        mpc = design_constrained_mpc(sys, spec, weights, k, auto_bisect=auto_bisect)
        result.spec, result.mpc, result.terminal_p = mpc.spec, mpc, mpc.p
        result.lyapunov = LyapunovResult(p=mpc.p, residual=mpc.lyapunov_residual)
        report.stabilizing_gain = k
        report.schur_stable = True
        report.p = mpc.p
        report.lyapunov_residual = mpc.lyapunov_residual
        report.certificate = mpc.certificate
        report.bisected = auto_bisect
        if not mpc.gain_is_deadbeat:
            report.notes.append("P is built from K != K_db; cost decrease is reported, not asserted")

    elif kind == ControllerKind.UNCONSTRAINED_TERMINAL_COST:
        weight = scenario.controller.terminal_weight
        if weight == "identity":
            result.terminal_p = np.eye(sys.n)
        elif weight == "lyapunov":
            k = stabilizing_gain(scenario, gain)
            result.lyapunov = terminal_weight(sys, k, weights)
            result.terminal_p = result.lyapunov.p
            report.stabilizing_gain = k
            report.schur_stable = True
            report.lyapunov_residual = result.lyapunov.residual
        else:
            result.terminal_p = as_mat(weight, "P")
            cholesky(result.terminal_p)
        report.p = result.terminal_p
        report.notes.append("terminal-cost solution equals the terminal-equality solution for any P > 0")

    return result


def build_controller(result: DesignResult) -> Controller:
    """Controller callable for the scenario's kind; constrained runs get their own MPC state."""
    kind = result.kind
    if kind == ControllerKind.UNCONSTRAINED_EXPLICIT:
        return explicit_deadbeat_controller(result.gain)
    if kind == ControllerKind.UNCONSTRAINED_EQUALITY:
        return terminal_equality_controller(result.sys, result.weights)
    if kind == ControllerKind.UNCONSTRAINED_TERMINAL_COST:
        return terminal_cost_controller(result.sys, result.terminal_p)
    return constrained_controller(result.mpc.fresh())
