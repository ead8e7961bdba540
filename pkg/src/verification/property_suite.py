"""
Property suite behind the ``verify`` command.

Each property is an independent check with its own seeded generator, so the
results do not depend on the order threads finish in. Constrained closed-loop
runs are simulated once up front and shared read-only by the properties that
audit them.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from ..cli.pipeline import DesignResult
from ..config.models import ControllerKind, VerifyConfig
from ..control.cmpc import ConstrainedMpc, StepResult, design_constrained_mpc, perturbed_solution_residual
from ..control.deadbeat import (
    WeightSpec, deadbeat_gain, nilpotency_index, solve_terminal_cost_unconstrained,
    solve_terminal_equality,
)
from ..control.lyap import terminal_weight
from ..error_handling.exceptions import DeadbeatMpcError
from ..linalg.matrix import max_norm
from ..optimization.qp import kkt_report, phase1_feasible, qp_solve
from ..plant.catalog import random_controllable_system
from ..plant.lti import ConstraintSpec, build_prediction, check_membership
from ..simulation.simkit import (
    BatchJob, Trajectory, constrained_controller, explicit_deadbeat_controller, run_batch,
    run_closed_loop, settling_index, terminal_equality_controller,
)


logger = logging.getLogger(__name__)

DEADBEAT_SETTLE_TOLERANCE = 1e-6
EQUIVALENCE_TOLERANCE = 1e-8
AGREEMENT_TOLERANCE = 1e-9
DECOMPOSITION_TOLERANCE = 1e-7
IDENTITY_TOLERANCE = 1e-6
KKT_TOLERANCE = 1e-7
VACUOUS_BOUND = 1e9
MAX_DEADBEAT_RUNS = 20


class PropertyStatus(Enum):
    PASS = "pass"
    FAIL = "fail"
    SKIP = "skip"


@dataclass
class PropertyResult:
    """Outcome of one property."""
    index: int
    name: str
    status: PropertyStatus
    detail: str
    measured: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'index': self.index,
            'name': self.name,
            'status': self.status.value,
            'detail': self.detail,
            'measured': self.measured,
        }


Outcome = Tuple[PropertyStatus, str, Dict[str, Any]]


def qp_feasible_at(mpc: ConstrainedMpc, x: NDArray[np.float64]) -> bool:
    """True when x lies in the state set and the constrained QP at x has a feasible point."""
    if not check_membership(mpc.spec, x).in_state_set:
        return False
    prob = mpc.assemble_qp(x)
    return not prob.constant_violations and phase1_feasible(prob.g, prob.rhs).feasible


def saturating_initial_state(mpc: ConstrainedMpc, rng: np.random.Generator,
                             max_attempts: int = 200) -> Optional[NDArray[np.float64]]:
    """
    Random feasible x(0) whose unconstrained deadbeat input violates the input bounds.

    Along a random direction d the deadbeat input −K_db·(s·d) leaves U beyond
    s_u and the QP stays feasible up to s_f (the feasible set is convex and
    contains the origin). Membership of x(0) in the state set is part of
    feasibility, so the returned state is admissible. The midpoint of
    (s_u, s_f) is returned.
    """
    n = mpc.n
    for _ in range(max_attempts):
        d = rng.standard_normal(n)
        d /= max_norm(d)
        rate = -float(mpc.gain.k_db @ d)
        if abs(rate) < 1e-12:
            continue
        bound = mpc.spec.u_max if rate > 0 else -mpc.spec.u_min
        s_u = bound / abs(rate)
        if not qp_feasible_at(mpc, s_u * (1.0 + 1e-6) * d):
            continue

        low, high = s_u, 2.0 * s_u
        for _ in range(40):
            if not qp_feasible_at(mpc, high * d):
                break
            low, high = high, 2.0 * high
        else:
            return (2.0 * s_u) * d
        for _ in range(40):
            middle = 0.5 * (low + high)
            if qp_feasible_at(mpc, middle * d):
                low = middle
            else:
                high = middle
        if low > s_u * (1.0 + 1e-6):
            return (s_u + 0.5 * (low - s_u)) * d
    return None


class PropertySuite:
    """Runs every property for one designed scenario."""

    def __init__(self, design: DesignResult, seed: int, settings: Optional[VerifyConfig] = None):
        self.design = design
        self.seed = seed
        self.settings = settings or VerifyConfig()
        self.initial_states: List[NDArray[np.float64]] = []
        self.saturating: List[bool] = []
        self.runs: List[Trajectory] = []
        self.initial_note = ""

    @property
    def constrained(self) -> bool:
        return self.design.kind == ControllerKind.CONSTRAINED

    def _rng(self, index: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, index])

    def checks(self) -> List[Tuple[str, Callable[[np.random.Generator], Outcome]]]:
        return [
            ("deadbeat_in_n", self.check_deadbeat_in_n),
            ("nilpotency", self.check_nilpotency),
            ("formulation_equivalence", self.check_formulation_equivalence),
            ("explicit_implicit_agreement", self.check_explicit_implicit_agreement),
            ("lyapunov_residual", self.check_lyapunov_residual),
            ("terminal_set", self.check_terminal_set),
            ("initial_feasibility", self.check_initial_feasibility),
            ("recursive_feasibility", self.check_recursive_feasibility),
            ("cost_decrease", self.check_cost_decrease),
            ("control_decomposition", self.check_decomposition),
            ("perturbed_solution_identity", self.check_perturbed_identity),
            ("finite_time_zero", self.check_finite_time_zero),
            ("qp_kkt_certificate", self.check_qp_kkt),
            ("vacuous_constraint_reduction", self.check_vacuous_constraints),
        ]

    def run(self) -> List[PropertyResult]:
        """Prepare the shared runs, then evaluate all properties concurrently, ordered by index."""
        if self.constrained:
            self._prepare_constrained_runs()
        checks = self.checks()
        with ThreadPoolExecutor(max_workers=self.settings.workers) as executor:
            futures = [executor.submit(self._guarded, index, name, check)
                       for index, (name, check) in enumerate(checks)]
            results = [future.result() for future in futures]
        failed = sum(1 for r in results if r.status == PropertyStatus.FAIL)
        logger.info(f"Property suite finished: {len(results) - failed}/{len(results)} not failing")
        return results

    def _guarded(self, index: int, name: str, check: Callable[[np.random.Generator], Outcome]) -> PropertyResult:
        try:
            status, detail, measured = check(self._rng(index))
        except DeadbeatMpcError as e:
            status, detail, measured = PropertyStatus.FAIL, f"{type(e).__name__}: {e.message}", {}
        logger.debug(f"Property {name}: {status.value} ({detail})")
        return PropertyResult(index, name, status, detail, measured)

    def _prepare_constrained_runs(self):
        mpc = self.design.mpc
        scenario = self.design.scenario
        rng = self._rng(1000)

        configured: List[NDArray[np.float64]] = []
        if scenario.simulation.x0 is not None:
            x0 = np.asarray(scenario.simulation.x0, dtype=np.float64)
            if qp_feasible_at(mpc, x0):
                configured.append(x0)
            elif not check_membership(mpc.spec, x0).in_state_set:
                self.initial_note = "configured x0 lies outside the state constraint set"
            else:
                prob = mpc.assemble_qp(x0)
                violation = phase1_feasible(prob.g, prob.rhs).max_violation
                self.initial_note = (f"configured x0 is infeasible (phase-1 minimal violation {violation:.3e}"
                                     + (f", free-response rows {', '.join(prob.constant_violations)}"
                                        if prob.constant_violations else "") + ")")

        # Only saturating starts count toward random_runs; the configured x0 is an extra run.
        saturating: List[NDArray[np.float64]] = []
        wanted = max(1, self.settings.random_runs)
        while len(saturating) < wanted:
            x0 = saturating_initial_state(mpc, rng)
            if x0 is None:
                break
            saturating.append(x0)

        self.initial_states = configured + saturating
        self.saturating = ([self._is_saturating(x0) for x0 in configured]
                           + [True] * len(saturating))
        jobs = [BatchJob(self.design.sys, lambda: constrained_controller(mpc.fresh()), x0,
                         self.settings.steps, self.design.spec) for x0 in self.initial_states]
        self.runs = run_batch(jobs, self.settings.workers)
        logger.info(f"Simulated {len(self.runs)} constrained runs, {sum(self.saturating)} from saturating starts")

    def _is_saturating(self, x0: NDArray[np.float64]) -> bool:
        spec = self.design.spec
        u = float(-self.design.gain.k_db @ x0)
        return not spec.u_min <= u <= spec.u_max

    def _step_results(self, trajectory: Trajectory) -> List[StepResult]:
        return [record.details for record in trajectory.steps if isinstance(record.details, StepResult)]

    def _constrained_skip(self) -> Optional[Outcome]:
        if not self.constrained:
            return PropertyStatus.SKIP, "constrained controller only", {}
        if not self.runs:
            return PropertyStatus.SKIP, "no feasible initial state to simulate from", {}
        return None

    # ------------------------------------------------------------------
    # Unconstrained properties
    # ------------------------------------------------------------------

    def _random_systems(self, rng: np.random.Generator):
        for _ in range(self.settings.random_systems):
            n = int(rng.integers(1, self.settings.max_dimension + 1))
            yield random_controllable_system(rng, n)

    def check_deadbeat_in_n(self, rng: np.random.Generator) -> Outcome:
        sys, gain = self.design.sys, self.design.gain
        controller = explicit_deadbeat_controller(gain)
        failures = []
        runs = max(1, min(MAX_DEADBEAT_RUNS, self.settings.random_runs))
        for run in range(runs):
            x0 = rng.standard_normal(sys.n)
            trajectory = run_closed_loop(sys, controller, x0, sys.n + 3)
            settled = settling_index([record.x for record in trajectory.steps], DEADBEAT_SETTLE_TOLERANCE)
            if settled != gain.nilpotency_index:
                failures.append(f"run {run} settled at {settled}")

        for index, random_sys in enumerate(self._random_systems(rng)):
            random_gain = deadbeat_gain(random_sys)
            x0 = rng.standard_normal(random_sys.n)
            trajectory = run_closed_loop(random_sys, explicit_deadbeat_controller(random_gain), x0, random_sys.n + 2)
            settled = settling_index([record.x for record in trajectory.steps], DEADBEAT_SETTLE_TOLERANCE)
            if settled is None or settled > random_sys.n:
                failures.append(f"random system {index} (n={random_sys.n}) settled at {settled}")

        measured = {'runs': runs, 'random_systems': self.settings.random_systems,
                    'settling_step': gain.nilpotency_index}
        if failures:
            return PropertyStatus.FAIL, "; ".join(failures[:5]), measured
        return PropertyStatus.PASS, f"settled in {gain.nilpotency_index} steps (n={sys.n})", measured

    def check_nilpotency(self, rng: np.random.Generator) -> Outcome:
        sys, gain = self.design.sys, self.design.gain
        failures = []
        index = nilpotency_index(sys, gain.k_db)
        if index is None or index > sys.n:
            failures.append(f"scenario plant index {index}")
        for number, random_sys in enumerate(self._random_systems(rng)):
            random_index = deadbeat_gain(random_sys).nilpotency_index
            if random_index > random_sys.n:
                failures.append(f"random system {number} index {random_index} > n={random_sys.n}")
        measured = {'index': index, 'random_systems': self.settings.random_systems}
        if failures:
            return PropertyStatus.FAIL, "; ".join(failures[:5]), measured
        return PropertyStatus.PASS, f"A - B*K_db nilpotent with index {index}", measured

    def check_formulation_equivalence(self, rng: np.random.Generator) -> Outcome:
        sys = self.design.sys
        weights = [np.eye(sys.n)]
        if self.design.terminal_p is not None:
            weights.append(self.design.terminal_p)
        else:
            weights.append(terminal_weight(sys, self.design.gain.k_db, self.design.weights).p)

        def gap(plant, stage_weights, terminal_weights, pred) -> float:
            x = rng.standard_normal(plant.n)
            reference = solve_terminal_equality(plant, stage_weights, x, pred).u_sequence
            scale = max(1.0, max_norm(reference))
            return max(max_norm(solve_terminal_cost_unconstrained(plant, p, x, pred) - reference) / scale
                       for p in terminal_weights)

        pred = build_prediction(sys)
        worst = max(gap(sys, self.design.weights, weights, pred)
                    for _ in range(max(1, self.settings.random_runs)))
        for random_sys in self._random_systems(rng):
            m = rng.standard_normal((random_sys.n, random_sys.n))
            random_weights = [np.eye(random_sys.n), m @ m.T + np.eye(random_sys.n)]
            worst = max(worst, gap(random_sys, WeightSpec.scaled_identity(random_sys.n), random_weights,
                                   build_prediction(random_sys)))

        measured = {'max_relative_gap': worst}
        if worst > EQUIVALENCE_TOLERANCE:
            return PropertyStatus.FAIL, f"terminal-cost and terminal-equality differ by {worst:.3e}", measured
        return PropertyStatus.PASS, f"max relative gap {worst:.3e}", measured

    def check_explicit_implicit_agreement(self, rng: np.random.Generator) -> Outcome:
        sys = self.design.sys
        explicit = explicit_deadbeat_controller(self.design.gain)
        implicit = terminal_equality_controller(sys, self.design.weights)
        worst = 0.0
        for _ in range(max(1, min(MAX_DEADBEAT_RUNS, self.settings.random_runs))):
            x0 = rng.standard_normal(sys.n)
            a = run_closed_loop(sys, explicit, x0, sys.n + 2).states
            b = run_closed_loop(sys, implicit, x0, sys.n + 2).states
            worst = max(worst, max_norm(a - b) / max(1.0, max_norm(x0)))
        measured = {'max_state_gap': worst}
        if worst > AGREEMENT_TOLERANCE:
            return PropertyStatus.FAIL, f"explicit and implicit loops differ by {worst:.3e}", measured
        return PropertyStatus.PASS, f"max state gap {worst:.3e}", measured

    def check_lyapunov_residual(self, rng: np.random.Generator) -> Outcome:
        lyapunov = self.design.lyapunov
        if lyapunov is None:
            return PropertyStatus.SKIP, "no Lyapunov terminal weight in this scenario", {}
        bound = 1e-8 * max(1.0, max_norm(lyapunov.p))
        measured = {'residual': lyapunov.residual}
        deviation = self.design.report.p_deviation
        if deviation is not None:
            measured['reference_deviation'] = deviation
        if lyapunov.residual > bound:
            return PropertyStatus.FAIL, f"residual {lyapunov.residual:.3e} above {bound:.1e}", measured
        return PropertyStatus.PASS, f"residual {lyapunov.residual:.3e}", measured

    # ------------------------------------------------------------------
    # Constrained properties
    # ------------------------------------------------------------------

    def check_terminal_set(self, rng: np.random.Generator) -> Outcome:
        if not self.constrained:
            return PropertyStatus.SKIP, "constrained controller only", {}
        certificate = self.design.mpc.certificate
        measured = {'halfwidth': certificate.halfwidth.tolist(), 'box_invariant': certificate.box_invariant}
        if not certificate.certified:
            return PropertyStatus.FAIL, certificate.summary(), measured
        return PropertyStatus.PASS, certificate.summary(), measured

    def check_initial_feasibility(self, rng: np.random.Generator) -> Outcome:
        if not self.constrained:
            return PropertyStatus.SKIP, "constrained controller only", {}
        spec = self.design.spec
        saturating = sum(self.saturating)
        measured = {'initial_states': len(self.initial_states), 'saturating': saturating}
        if self.initial_note:
            return PropertyStatus.FAIL, self.initial_note, measured
        if not self.initial_states:
            return PropertyStatus.FAIL, "no feasible initial state found", measured
        outside = [x0.tolist() for x0 in self.initial_states if not check_membership(spec, x0).in_state_set]
        if outside:
            return PropertyStatus.FAIL, f"initial states outside the state set: {outside[:3]}", measured
        detail = f"{len(self.initial_states)} feasible initial states, {saturating} saturating"
        if not saturating:
            detail += " (no saturating start found)"
        return PropertyStatus.PASS, detail, measured

    def check_recursive_feasibility(self, rng: np.random.Generator) -> Outcome:
        skip = self._constrained_skip()
        if skip:
            return skip
        mpc = self.design.mpc
        failures = []
        candidates = 0
        for number, trajectory in enumerate(self.runs):
            if not trajectory.completed:
                failures.append(f"run {number} infeasible at k={trajectory.failed_at}")
            if trajectory.constraint_violations:
                failures.append(f"run {number} has {trajectory.constraint_violations} constraint violations")
            for step in self._step_results(trajectory):
                candidates += 1
                if not mpc.verify_candidate(step).feasible:
                    failures.append(f"run {number} shifted candidate infeasible after k with x={step.x.tolist()}")
        measured = {'runs': len(self.runs), 'candidates_checked': candidates}
        if failures:
            return PropertyStatus.FAIL, "; ".join(failures[:5]), measured
        return PropertyStatus.PASS, f"{candidates} shifted candidates feasible", measured

    def check_cost_decrease(self, rng: np.random.Generator) -> Outcome:
        skip = self._constrained_skip()
        if skip:
            return skip
        mpc = self.design.mpc
        violations = increases = pairs = 0
        worst = -np.inf
        for trajectory in self.runs:
            steps = self._step_results(trajectory)
            for prev, nxt in zip(steps, steps[1:]):
                report = mpc.cost_decrease_check(prev, nxt)
                pairs += 1
                worst = max(worst, report.delta)
                increases += 0 if report.monotone else 1
                violations += 1 if report.violated else 0
        measured = {'pairs': pairs, 'increases': increases, 'max_delta': float(worst) if pairs else 0.0,
                    'asserted': mpc.gain_is_deadbeat}
        if violations:
            return PropertyStatus.FAIL, f"J* increased at {violations} of {pairs} steps", measured
        if not mpc.gain_is_deadbeat:
            return PropertyStatus.PASS, f"reported only (K != K_db): {increases} increases in {pairs} steps", measured
        return PropertyStatus.PASS, f"J* non-increasing over {pairs} steps", measured

    def check_decomposition(self, rng: np.random.Generator) -> Outcome:
        skip = self._constrained_skip()
        if skip:
            return skip
        worst = 0.0
        for trajectory in self.runs:
            for step in self._step_results(trajectory):
                worst = max(worst, step.decomposition_residual / max(1.0, max_norm(step.x)))
        measured = {'max_residual': worst}
        if worst > DECOMPOSITION_TOLERANCE:
            return PropertyStatus.FAIL, f"u = -K_db x + S_n' x*(n) off by {worst:.3e}", measured
        return PropertyStatus.PASS, f"max residual {worst:.3e}", measured

    def check_perturbed_identity(self, rng: np.random.Generator) -> Outcome:
        skip = self._constrained_skip()
        if skip:
            return skip
        sys, gain = self.design.sys, self.design.gain
        worst, checked = 0.0, 0
        for trajectory in self.runs:
            states = trajectory.states
            terminal = trajectory.terminal_states
            for k in range(sys.n, len(terminal) + 1):
                worst = max(worst, perturbed_solution_residual(sys, gain, states, terminal, k))
                checked += 1
        measured = {'max_relative_residual': worst, 'checked': checked}
        if worst > IDENTITY_TOLERANCE:
            return PropertyStatus.FAIL, f"identity residual {worst:.3e}", measured
        return PropertyStatus.PASS, f"{checked} states reconstructed, max residual {worst:.3e}", measured

    def check_finite_time_zero(self, rng: np.random.Generator) -> Outcome:
        skip = self._constrained_skip()
        if skip:
            return skip
        mpc = self.design.mpc
        nu = self.design.gain.nilpotency_index
        failures = []
        settled_steps = []
        saturating_steps = []
        for number, trajectory in enumerate(self.runs):
            states = trajectory.states
            threshold = DEADBEAT_SETTLE_TOLERANCE * max_norm(states[0])
            entry = next((k for k, x in enumerate(states) if mpc.in_terminal_set(x)), None)
            if entry is None:
                failures.append(f"run {number} never entered the terminal set")
                continue
            if entry + nu < len(states) and np.any(np.max(np.abs(states[entry + nu:]), axis=1) > threshold):
                failures.append(f"run {number} not at the origin {nu} steps after entering the terminal set")
            if trajectory.settled_at is None:
                failures.append(f"run {number} did not settle in {len(states) - 1} steps")
                continue
            settled_steps.append(trajectory.settled_at)
            if self.saturating[number]:
                saturating_steps.append(trajectory.settled_at)
                # A saturating start cannot follow the only n-step sequence to the origin
                if trajectory.settled_at < self.design.sys.n:
                    failures.append(f"saturating run {number} settled at k={trajectory.settled_at} < n")
        measured = {'settled_at': settled_steps, 'saturating_settled_at': saturating_steps}
        if failures:
            return PropertyStatus.FAIL, "; ".join(failures[:5]), measured
        return PropertyStatus.PASS, f"settled within {max(settled_steps)} steps", measured

    def check_qp_kkt(self, rng: np.random.Generator) -> Outcome:
        skip = self._constrained_skip()
        if skip:
            return skip
        mpc = self.design.mpc
        failures, solves = [], 0
        for trajectory in self.runs:
            for step in self._step_results(trajectory):
                prob = mpc.assemble_qp(step.x)
                solution = qp_solve(prob)
                solves += 1
                if not solution.optimal or not kkt_report(prob, solution).passed(KKT_TOLERANCE):
                    failures.append(f"KKT certificate failed at x={step.x.tolist()}")
                elif max_norm(solution.z - step.u_sequence) > 1e-7 * max(1.0, max_norm(step.u_sequence)):
                    failures.append(f"warm and cold solves differ at x={step.x.tolist()}")
        measured = {'solves': solves}
        if failures:
            return PropertyStatus.FAIL, "; ".join(failures[:5]), measured
        return PropertyStatus.PASS, f"{solves} cold re-solves pass the KKT certificate", measured

    def check_vacuous_constraints(self, rng: np.random.Generator) -> Outcome:
        sys, gain = self.design.sys, self.design.gain
        spec = ConstraintSpec.input_only(sys.n, -VACUOUS_BOUND, VACUOUS_BOUND)
        mpc = design_constrained_mpc(sys, spec, self.design.weights, auto_bisect=True)
        explicit = explicit_deadbeat_controller(gain)
        worst = 0.0
        for _ in range(max(1, min(MAX_DEADBEAT_RUNS, self.settings.random_runs))):
            x0 = rng.standard_normal(sys.n)
            a = run_closed_loop(sys, constrained_controller(mpc.fresh()), x0, sys.n).states
            b = run_closed_loop(sys, explicit, x0, sys.n).states
            worst = max(worst, max_norm(a - b) / max(1.0, max_norm(x0)))
        measured = {'max_state_gap': worst}
        if worst > IDENTITY_TOLERANCE:
            return PropertyStatus.FAIL, f"loose-bound MPC departs from deadbeat by {worst:.3e}", measured
        return PropertyStatus.PASS, f"matches unconstrained deadbeat to {worst:.3e}", measured
