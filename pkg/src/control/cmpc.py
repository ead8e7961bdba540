"""
Constrained deadbeat MPC with terminal cost only.

The QP at state x optimizes the n-step input sequence U:

    J(k) = x(n|k)ᵀ·P·x(n|k),  x(n|k) = Aⁿx + S·U
    x(i|k) ∈ X, u(i−1|k) ∈ U for i = 1…n, x(n|k) ∈ X_f

X_f is the largest subset of the box |x_j| ≤ ε_j that the deadbeat closed loop
A_db = A − B·K_db never leaves: {x : |A_db^j·x| ≤ ε, j = 0…ν−1}. A_db is
nilpotent, so the orbit conditions are finite. When the box is itself
invariant the propagated rows are omitted and X_f is the box.
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..error_handling.exceptions import (
    PreconditionViolation, QpIterationLimit, TerminalSetUnverifiable
)
from ..linalg.matrix import Mat, as_mat, cholesky, mat_pow, max_norm
from ..optimization.qp import QpProblem, QpSolution, QpStatus, qp_solve
from ..plant.lti import (
    ConstraintSpec, LinearSystem, MembershipReport, build_prediction, check_membership, step
)
from .deadbeat import DeadbeatGain, WeightSpec, closed_loop_matrix, deadbeat_gain
from .lyap import terminal_weight


logger = logging.getLogger(__name__)

FEASIBILITY_SLACK = 1e-8
DECOMPOSITION_TOLERANCE = 1e-7
COST_TOLERANCE = 1e-7
CONSECUTIVE_TOLERANCE = 1e-9
BISECTION_FLOOR = 1e-12
BISECTION_STEPS = 60


# --------------------------------------------------------------------------
# Terminal set
# --------------------------------------------------------------------------

@dataclass
class VertexViolation:
    """One failed vertex condition; ``slack`` is the most negative row slack."""
    vertex_index: int
    vertex: NDArray[np.float64]
    condition: str
    slack: float


@dataclass
class TerminalSetCertificate:
    """
    Vertex audit of the terminal box.

    Conditions per vertex v: ``state`` (v ∈ X), ``input`` (−K_db·v ∈ U),
    ``successor_state`` (A_db·v ∈ X), ``successor_terminal`` (A_db·v in the
    box). The last one is reported through ``box_invariant`` and does not
    gate ``certified``.
    """
    halfwidth: NDArray[np.float64]
    violations: List[VertexViolation] = field(default_factory=list)
    vertex_count: int = 0

    @property
    def gating_violations(self) -> List[VertexViolation]:
        return [v for v in self.violations if v.condition != "successor_terminal"]

    @property
    def certified(self) -> bool:
        return not self.gating_violations

    @property
    def box_invariant(self) -> bool:
        return not any(v.condition == "successor_terminal" for v in self.violations)

    def summary(self) -> str:
        status = "certified" if self.certified else f"{len(self.gating_violations)} violations"
        invariance = "box invariant" if self.box_invariant else "box not invariant, orbit rows imposed"
        return f"terminal set {np.array2string(self.halfwidth, precision=6)}: {status}; {invariance}"


def _box_vertices(halfwidth: NDArray) -> List[NDArray]:
    n = halfwidth.shape[0]
    return [np.array(signs) * halfwidth for signs in itertools.product((-1.0, 1.0), repeat=n)]


def verify_terminal_set(sys: LinearSystem, spec: ConstraintSpec, gain: DeadbeatGain) -> TerminalSetCertificate:
    """
    Check the 2ⁿ vertices of the terminal box against the terminal-set conditions.

    Every condition is linear in the vertex and every set involved is convex,
    so the vertex checks cover the whole box.
    """
    a_db = closed_loop_matrix(sys, gain.k_db)
    halfwidth = spec.terminal_halfwidth
    vertices = _box_vertices(halfwidth)
    violations: List[VertexViolation] = []

    for index, v in enumerate(vertices):
        u = float(-gain.k_db @ v)
        here = check_membership(spec, v, u, tolerance=0.0)
        successor = check_membership(spec, a_db @ v, tolerance=0.0)
        checks = (
            ("state", here.in_state_set, here.state_slack),
            ("input", here.in_control_set, here.control_slack),
            ("successor_state", successor.in_state_set, successor.state_slack),
            ("successor_terminal", successor.in_terminal_set, successor.terminal_slack),
        )
        for condition, passed, slack in checks:
            if not passed:
                violations.append(VertexViolation(index, v, condition, float(np.min(slack))))

    certificate = TerminalSetCertificate(halfwidth=halfwidth, violations=violations, vertex_count=len(vertices))
    logger.debug(certificate.summary())
    return certificate


def bisect_terminal_halfwidth(sys: LinearSystem, spec: ConstraintSpec, gain: DeadbeatGain,
                              direction: Optional[ArrayLike] = None,
                              initial_scale: float = 1.0) -> Tuple[NDArray[np.float64], TerminalSetCertificate]:
    """
    Largest δ for which the box δ·direction passes the vertex certificate.

    Doubles δ while it passes (or halves it while it fails), then bisects
    between the last passing and first failing scale.

    Args:
        sys: Plant
        spec: Constraint sets (its terminal halfwidth is ignored)
        gain: Deadbeat gain
        direction: Positive halfwidth shape, all ones when omitted
        initial_scale: First δ tried

    Returns:
        (halfwidth, certificate) for the largest certified scale

    Raises:
        TerminalSetUnverifiable: no scale above 1e-12 is certified
    """
    shape = np.ones(sys.n) if direction is None else np.asarray(direction, dtype=np.float64)

    def certify(scale: float) -> TerminalSetCertificate:
        return verify_terminal_set(sys, spec.with_terminal_halfwidth(scale * shape), gain)

    scale = float(initial_scale)
    if certify(scale).certified:
        low, high = scale, None
        for _ in range(BISECTION_STEPS):
            if not certify(2.0 * low).certified:
                high = 2.0 * low
                break
            low *= 2.0
        if high is None:
            certificate = certify(low)
            return certificate.halfwidth, certificate
    else:
        high, low = scale, None
        while high > BISECTION_FLOOR:
            high *= 0.5
            if certify(high).certified:
                low, high = high, 2.0 * high
                break
        if low is None:
            raise TerminalSetUnverifiable(
                f"no terminal box above {BISECTION_FLOOR:g} passes the vertex certificate",
                certify(BISECTION_FLOOR).gating_violations,
            )

    for _ in range(BISECTION_STEPS):
        if high - low <= 1e-12 * high:
            break
        middle = 0.5 * (low + high)
        if certify(middle).certified:
            low = middle
        else:
            high = middle

    certificate = certify(low)
    logger.info(f"Bisected terminal set scale {low:.6g}")
    return certificate.halfwidth, certificate


# --------------------------------------------------------------------------
# Controller
# --------------------------------------------------------------------------

@dataclass
class StepResult:
    """One receding-horizon solve at state x(k)."""
    x: NDArray[np.float64]
    u_applied: float
    u_sequence: NDArray[np.float64]
    terminal_state: NDArray[np.float64]
    objective: float
    active_set: List[int]
    feasible: bool
    active_labels: List[str] = field(default_factory=list)
    decomposition_residual: float = 0.0
    qp_iterations: int = 0
    warm_started: bool = False
    diagnostics: str = ""

    @property
    def terminal_norm(self) -> float:
        return max_norm(self.terminal_state) if self.feasible else float("nan")


@dataclass
class CandidateReport:
    """Shifted sequence simulated from x(k+1)."""
    x_next: NDArray[np.float64]
    candidate: NDArray[np.float64]
    predicted_states: NDArray[np.float64]
    stage_reports: List[MembershipReport]
    in_terminal_set: bool
    cost: float

    @property
    def feasible(self) -> bool:
        return self.in_terminal_set and all(report.admissible for report in self.stage_reports)


@dataclass
class CostDecreaseReport:
    """J*(k+1) − J*(k) against the bound given by the shifted candidate."""
    delta: float
    candidate_bound: float
    asserted: bool
    tolerance: float

    @property
    def monotone(self) -> bool:
        return self.delta <= self.tolerance

    @property
    def violated(self) -> bool:
        return self.asserted and not self.monotone


def _shift_label(label: str) -> Optional[str]:
    """Label of the same constraint one stage later, None when it leaves the horizon."""
    kind, _, rest = label.partition(":")
    if kind in ("x", "u", "f"):
        stage, _, tail = rest.partition(":")
        shifted = int(stage) - 1
        lowest = 1 if kind == "x" else 0
        if shifted < lowest:
            return None
        return f"{kind}:{shifted}:{tail}"
    return None


class ConstrainedMpc:
    """
    Receding-horizon controller for the terminal-cost QP.

    Carries the warm-start working set between steps, so one instance
    belongs to one closed-loop run at a time.
    """

    def __init__(self, sys: LinearSystem, spec: ConstraintSpec, p: ArrayLike,
                 gain: Optional[DeadbeatGain] = None,
                 stabilizing_gain: Optional[ArrayLike] = None,
                 certificate: Optional[TerminalSetCertificate] = None,
                 lyapunov_residual: Optional[float] = None):
        """
        Args:
            sys: Plant
            spec: Constraint sets including the terminal box
            p: Terminal weight, symmetric positive definite
            gain: Deadbeat gain, computed when omitted
            stabilizing_gain: Gain P was built from; K_db when omitted
            certificate: Terminal-set certificate, computed when omitted
            lyapunov_residual: Residual of the equation P came from, for reports

        Raises:
            TerminalSetUnverifiable: the terminal box fails the certificate
        """
        if spec.n != sys.n:
            raise PreconditionViolation(f"constraints are for n={spec.n}, plant has n={sys.n}")
        self.sys = sys
        self.spec = spec
        self.p = as_mat(p, "P")
        cholesky(self.p)
        self.gain = gain or deadbeat_gain(sys)
        self.stabilizing_gain = (self.gain.k_db.copy() if stabilizing_gain is None
                                 else np.asarray(stabilizing_gain, dtype=np.float64).reshape(-1))
        self.pred = build_prediction(sys)
        self.certificate = certificate or verify_terminal_set(sys, spec, self.gain)
        if not self.certificate.certified:
            raise TerminalSetUnverifiable("terminal box fails the vertex certificate",
                                          self.certificate.gating_violations)

        a_db = closed_loop_matrix(sys, self.gain.k_db)
        orbit_length = 1 if self.certificate.box_invariant else self.gain.nilpotency_index
        self.terminal_orbit: List[Mat] = [mat_pow(a_db, j) for j in range(orbit_length)]
        self.lyapunov_residual = lyapunov_residual
        self.warm: Optional[List[str]] = None
        logger.debug(f"Constrained MPC ready: n={sys.n}, terminal orbit length {orbit_length}")

    @property
    def n(self) -> int:
        return self.sys.n

    @property
    def gain_is_deadbeat(self) -> bool:
        """True when P was built from K_db, which makes the cost decrease provable."""
        return bool(np.allclose(self.stabilizing_gain, self.gain.k_db, rtol=1e-12, atol=1e-12))

    def reset(self):
        self.warm = None

    def fresh(self) -> "ConstrainedMpc":
        """Same design with its own warm-start state, for another run."""
        return ConstrainedMpc(self.sys, self.spec, self.p, gain=self.gain,
                              stabilizing_gain=self.stabilizing_gain, certificate=self.certificate,
                              lyapunov_residual=self.lyapunov_residual)

    def in_terminal_set(self, x: ArrayLike, tolerance: float = FEASIBILITY_SLACK) -> bool:
        x = np.asarray(x, dtype=np.float64)
        halfwidth = self.spec.terminal_halfwidth
        return all(np.all(np.abs(m @ x) <= halfwidth + tolerance) for m in self.terminal_orbit)

    def assemble_qp(self, x: ArrayLike) -> QpProblem:
        """
        Condense the terminal-cost problem at x into a QP in U.

        H = 2·SᵀPS, f = 2·SᵀP·Aⁿx. Rows are grouped by stage: state rows of
        x(i|k), input bounds of u(i−1|k), then terminal orbit rows. Rows that
        U cannot influence are dropped when the free response satisfies them
        and recorded as constant violations otherwise.
        """
        x = np.asarray(x, dtype=np.float64)
        pred = self.pred
        s, a_pow_n = pred.s_row, pred.a_pow_n
        h = 2.0 * s.T @ self.p @ s
        h = 0.5 * (h + h.T)
        f = 2.0 * s.T @ self.p @ (a_pow_n @ x)

        rows: List[NDArray] = []
        rhs: List[float] = []
        labels: List[str] = []
        violated: List[str] = []
        gamma_scale = max(1.0, max_norm(pred.gamma))

        def add(row: NDArray, bound: float, label: str):
            if np.max(np.abs(row)) <= 1e-13 * gamma_scale:
                if bound < -FEASIBILITY_SLACK:
                    violated.append(label)
                return
            rows.append(row)
            rhs.append(bound)
            labels.append(label)

        for i in range(1, self.n + 1):
            phi_i, gamma_i = pred.stage_phi(i), pred.stage_gamma(i)
            free = phi_i @ x
            for r in range(self.spec.state_rows):
                hr = self.spec.state_h[r]
                add(hr @ gamma_i, self.spec.state_rhs[r] - hr @ free, f"x:{i}:{r}")
            unit = np.zeros(self.n)
            unit[i - 1] = 1.0
            add(unit, self.spec.u_max, f"u:{i - 1}:max")
            add(-unit, -self.spec.u_min, f"u:{i - 1}:min")

        eps = self.spec.terminal_halfwidth
        for j, m in enumerate(self.terminal_orbit):
            ms = m @ s
            free = m @ (a_pow_n @ x)
            for r in range(self.n):
                add(ms[r], eps[r] - free[r], f"f:{j}:{r}+")
                add(-ms[r], eps[r] + free[r], f"f:{j}:{r}-")

        g = np.array(rows).reshape(-1, self.n)
        return QpProblem(h=h, f=f, g=g, rhs=np.array(rhs), labels=tuple(labels),
                         constant_violations=tuple(violated))

    def _warm_indices(self, prob: QpProblem) -> Optional[List[int]]:
        if not self.warm:
            return None
        lookup: Dict[str, int] = {label: index for index, label in enumerate(prob.labels)}
        return [lookup[label] for label in self.warm if label in lookup]

    def controller_step(self, x: ArrayLike) -> StepResult:
        """
        Solve the QP at x and apply the first input.

        Returns:
            StepResult: feasible=False with phase-1 diagnostics when the QP has
            no feasible point

        Raises:
            QpIterationLimit: the solver did not terminate; carries the problem dump
        """
        x = np.array(x, dtype=np.float64)
        prob = self.assemble_qp(x)
        sol: QpSolution = qp_solve(prob, self._warm_indices(prob))

        if sol.status == QpStatus.ITERATION_LIMIT:
            raise QpIterationLimit(f"QP did not converge in {sol.iterations} iterations at x={x.tolist()}",
                                   prob.dump())

        if sol.status == QpStatus.INFEASIBLE:
            self.warm = None
            if prob.constant_violations:
                diagnostics = f"rows violated by the free response: {', '.join(prob.constant_violations)}"
            else:
                diagnostics = f"phase 1 minimal violation {sol.max_violation:.3e}"
            logger.warning(f"Constrained MPC infeasible at x={x.tolist()}: {diagnostics}")
            nan_vector = np.full(self.n, np.nan)
            return StepResult(x=x, u_applied=float("nan"), u_sequence=nan_vector, terminal_state=nan_vector.copy(),
                              objective=float("inf"), active_set=[], feasible=False,
                              qp_iterations=sol.iterations, diagnostics=diagnostics)

        u_sequence = sol.z.copy()
        terminal = self.pred.terminal_state(x, u_sequence)
        u_applied = float(u_sequence[0])
        decomposition = abs(u_applied + float(self.gain.k_db @ x) - float(self.gain.s_inv_first_row @ terminal))
        if decomposition > DECOMPOSITION_TOLERANCE * max(1.0, max_norm(x)):
            logger.warning(f"Control decomposition residual {decomposition:.3e} above tolerance")

        active_labels = [prob.labels[i] for i in sol.active_set]
        self.warm = [shifted for shifted in map(_shift_label, active_labels) if shifted is not None]
        return StepResult(
            x=x,
            u_applied=u_applied,
            u_sequence=u_sequence,
            terminal_state=terminal,
            objective=float(terminal @ self.p @ terminal),
            active_set=list(sol.active_set),
            feasible=True,
            active_labels=active_labels,
            decomposition_residual=decomposition,
            qp_iterations=sol.iterations,
            warm_started=sol.warm_started,
        )

    def shifted_candidate(self, prev: StepResult) -> NDArray[np.float64]:
        """[u*(1|k), …, u*(n−1|k), −K_db·x*(n|k)], a feasible sequence for x(k+1)."""
        if not prev.feasible:
            raise PreconditionViolation("shifted candidate needs a feasible previous step")
        tail = -float(self.gain.k_db @ prev.terminal_state)
        return np.concatenate([prev.u_sequence[1:], [tail]])

    def verify_candidate(self, prev: StepResult) -> CandidateReport:
        """Simulate the shifted candidate from x(k+1) and check every stage."""
        candidate = self.shifted_candidate(prev)
        x_next = step(self.sys, prev.x, prev.u_applied)
        states = self.pred.predict(x_next, candidate)
        reports = [check_membership(self.spec, states[i], candidate[i], tolerance=FEASIBILITY_SLACK)
                   for i in range(self.n)]
        terminal = states[-1]
        return CandidateReport(
            x_next=x_next,
            candidate=candidate,
            predicted_states=states,
            stage_reports=reports,
            in_terminal_set=self.in_terminal_set(terminal),
            cost=float(terminal @ self.p @ terminal),
        )

    def cost_decrease_check(self, prev: StepResult, nxt: StepResult) -> CostDecreaseReport:
        """
        Compare J*(k+1) − J*(k) with the shifted-candidate bound.

        The decrease is asserted only when P was built from K_db; for any
        other stabilizing gain it is reported.

        Raises:
            PreconditionViolation: a step is infeasible or nxt.x is not the
                successor of prev.x under prev.u_applied
        """
        if not (prev.feasible and nxt.feasible):
            raise PreconditionViolation("cost decrease needs two feasible steps")
        successor = step(self.sys, prev.x, prev.u_applied)
        gap = max_norm(successor - nxt.x)
        if gap > CONSECUTIVE_TOLERANCE * max(1.0, max_norm(successor)):
            raise PreconditionViolation(f"steps are not consecutive (state gap {gap:.3e})",
                                        {'gap': gap})
        a_db = closed_loop_matrix(self.sys, self.gain.k_db)
        shifted_terminal = a_db @ prev.terminal_state
        candidate_cost = float(shifted_terminal @ self.p @ shifted_terminal)
        return CostDecreaseReport(
            delta=nxt.objective - prev.objective,
            candidate_bound=candidate_cost - prev.objective,
            asserted=self.gain_is_deadbeat,
            tolerance=COST_TOLERANCE * max(1.0, abs(prev.objective)),
        )


def perturbed_solution_residual(sys: LinearSystem, gain: DeadbeatGain, states: Sequence[ArrayLike],
                                terminal_states: Sequence[ArrayLike], k: int) -> float:
    """
    Relative residual of x(k) = Σ A_db^{n−1−i}·B·S_nᵀ·x*(n|k−n+i), i = 0…n−1.

    Unrolling x(j+1) = A_db·x(j) + B·S_nᵀ·x*(n|j) over n steps; A_dbⁿ = 0
    removes the dependence on x(k−n).

    Args:
        sys: Plant
        gain: Deadbeat gain
        states: x(0), x(1), … of the closed loop
        terminal_states: x*(n|0), x*(n|1), … of the same run
        k: Time index, at least n

    Returns:
        ‖x(k) − reconstruction‖_max / max(1, ‖x(k)‖_max, max ‖x*(n|j)‖_max)
    """
    n = sys.n
    if k < n:
        raise PreconditionViolation(f"identity holds for k ≥ {n}, got k={k}")
    a_db = closed_loop_matrix(sys, gain.k_db)
    b = sys.b_column
    reconstruction = np.zeros(n)
    scale = 1.0
    for i in range(n):
        terminal = np.asarray(terminal_states[k - n + i], dtype=np.float64)
        scale = max(scale, max_norm(terminal))
        reconstruction += mat_pow(a_db, n - 1 - i) @ b * float(gain.s_inv_first_row @ terminal)
    x_k = np.asarray(states[k], dtype=np.float64)
    scale = max(scale, max_norm(x_k))
    return max_norm(x_k - reconstruction) / scale


def design_constrained_mpc(sys: LinearSystem, spec: ConstraintSpec, weights: WeightSpec,
                           stabilizing_gain: Optional[ArrayLike] = None,
                           auto_bisect: bool = False) -> ConstrainedMpc:
    """
    Full constrained design: K_db, P from the Lyapunov equation, terminal set.

    Args:
        sys: Plant
        spec: Constraint sets; its terminal halfwidth is the bisection shape
            when ``auto_bisect`` is set
        weights: Q and R entering Q + KᵀRK
        stabilizing_gain: K for the terminal weight, K_db when omitted
        auto_bisect: Size the terminal box by bisection instead of checking it

    Raises:
        Unstable: K does not stabilize the plant
        TerminalSetUnverifiable: the terminal box cannot be certified
    """
    gain = deadbeat_gain(sys)
    k = gain.k_db if stabilizing_gain is None else np.asarray(stabilizing_gain, dtype=np.float64).reshape(-1)
    lyapunov = terminal_weight(sys, k, weights)

    if auto_bisect:
        halfwidth, certificate = bisect_terminal_halfwidth(sys, spec, gain, direction=spec.terminal_halfwidth)
        spec = spec.with_terminal_halfwidth(halfwidth)
    else:
        certificate = verify_terminal_set(sys, spec, gain)

    mpc = ConstrainedMpc(sys, spec, lyapunov.p, gain=gain, stabilizing_gain=k,
                         certificate=certificate, lyapunov_residual=lyapunov.residual)
    logger.info(certificate.summary())
    return mpc
