"""
Dense strictly convex QP solver (primal active set).

    minimize    ½·zᵀH·z + fᵀz
    subject to  G·z ≤ rhs

The iteration starts from the unconstrained minimizer when it is feasible,
from a validated warm-start working set, or from a phase-1 point. Each
iteration solves the equality-constrained subproblem on the working set
through its KKT system. Ties between blocking constraints go to the lowest
index; constraints with negative multipliers are dropped lowest index first.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..error_handling.exceptions import DimensionMismatch, SingularMatrix
from ..linalg.matrix import Mat, as_mat, cholesky, cholesky_solve, lu_solve, max_norm


logger = logging.getLogger(__name__)

FEASIBILITY_TOLERANCE = 1e-9
STEP_TOLERANCE = 1e-12
MULTIPLIER_TOLERANCE = 1e-10
PHASE1_REGULARIZATION = 1e-6
ITERATIONS_PER_DIMENSION = 50


class QpStatus(Enum):
    """Solver exit status."""
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True, eq=False)
class QpProblem:
    """
    QP data. ``labels`` names each inequality row; ``constant_violations``
    lists rows that do not depend on z and are already violated, which makes
    the problem infeasible before the solver runs.
    """
    h: Mat
    f: NDArray[np.float64]
    g: NDArray[np.float64]
    rhs: NDArray[np.float64]
    labels: Tuple[str, ...] = ()
    constant_violations: Tuple[str, ...] = ()
    factor: Mat = field(init=False, repr=False)

    def __post_init__(self):
        h = as_mat(self.h, "QP Hessian")
        m = h.shape[0]
        f = np.array(self.f, dtype=np.float64).reshape(-1)
        g = np.array(self.g, dtype=np.float64).reshape(-1, m)
        rhs = np.array(self.rhs, dtype=np.float64).reshape(-1)
        if f.shape[0] != m:
            raise DimensionMismatch(f"linear term has {f.shape[0]} entries, Hessian is {m}x{m}")
        if g.shape[0] != rhs.shape[0]:
            raise DimensionMismatch(f"G has {g.shape[0]} rows, rhs has {rhs.shape[0]} entries")
        if g.shape[0] and np.any(np.max(np.abs(g), axis=1) == 0.0):
            raise ValueError("every inequality row must be nonzero")
        labels = tuple(self.labels) or tuple(f"row{i}" for i in range(g.shape[0]))
        if len(labels) != g.shape[0]:
            raise DimensionMismatch(f"{len(labels)} labels for {g.shape[0]} rows")
        for array in (f, g, rhs):
            array.setflags(write=False)
        object.__setattr__(self, 'h', h)
        object.__setattr__(self, 'f', f)
        object.__setattr__(self, 'g', g)
        object.__setattr__(self, 'rhs', rhs)
        object.__setattr__(self, 'labels', labels)
        object.__setattr__(self, 'constant_violations', tuple(self.constant_violations))
        object.__setattr__(self, 'factor', cholesky(h))

    @property
    def m(self) -> int:
        return self.h.shape[0]

    @property
    def p(self) -> int:
        return self.g.shape[0]

    def objective(self, z: ArrayLike) -> float:
        z = np.asarray(z, dtype=np.float64)
        return float(0.5 * z @ self.h @ z + self.f @ z)

    def unconstrained_minimizer(self) -> NDArray[np.float64]:
        return -cholesky_solve(self.factor, self.f)

    def dump(self) -> str:
        """Text dump that reproduces the problem exactly."""
        return "\n".join([
            f"h = {self.h.tolist()!r}",
            f"f = {self.f.tolist()!r}",
            f"g = {self.g.tolist()!r}",
            f"rhs = {self.rhs.tolist()!r}",
            f"labels = {list(self.labels)!r}",
        ])


@dataclass
class QpSolution:
    """Solver output; ``multipliers`` has one entry per inequality row (zero off the active set)."""
    z: NDArray[np.float64]
    active_set: List[int]
    objective: float
    iterations: int
    status: QpStatus
    multipliers: NDArray[np.float64]
    warm_started: bool = False
    phase1_iterations: int = 0
    max_violation: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.status == QpStatus.OPTIMAL


@dataclass
class Phase1Result:
    """Feasible point search outcome."""
    feasible: bool
    z: NDArray[np.float64]
    max_violation: float
    iterations: int


@dataclass
class KktReport:
    """First-order optimality residuals of a QP solution."""
    stationarity: float
    min_multiplier: float
    complementarity: float
    primal_violation: float

    def passed(self, tolerance: float = 1e-7, multiplier_tolerance: float = 1e-8) -> bool:
        return (self.stationarity <= tolerance
                and self.min_multiplier >= -multiplier_tolerance
                and self.complementarity <= tolerance
                and self.primal_violation <= multiplier_tolerance)


def _equality_step(h: NDArray, gradient: NDArray, g_work: NDArray, factor: Mat) -> Tuple[NDArray, NDArray]:
    """Step p and multipliers λ of min ½pᵀHp + gradientᵀp s.t. G_W·p = 0."""
    m = h.shape[0]
    if g_work.shape[0] == 0:
        return -cholesky_solve(factor, gradient), np.zeros(0)
    w = g_work.shape[0]
    kkt = np.zeros((m + w, m + w))
    kkt[:m, :m] = h
    kkt[:m, m:] = g_work.T
    kkt[m:, :m] = g_work
    solution = lu_solve(kkt, np.concatenate([-gradient, np.zeros(w)]))
    return solution[:m], solution[m:]


def _active_set_loop(h: NDArray, factor: Mat, f: NDArray, g: NDArray, rhs: NDArray,
                     z0: NDArray, working: List[int], max_iterations: int,
                     at_subspace_minimum: bool = False):
    """
    Primal active-set iterations from a feasible z0 whose working set rows
    are active at z0 and linearly independent.

    Returns:
        (z, working set, multipliers aligned with the working set, iterations, status)
    """
    z = z0.copy()
    working = sorted(working)
    row_norms = np.max(np.abs(g), axis=1) if g.shape[0] else np.zeros(0)
    multiplier_tolerance = MULTIPLIER_TOLERANCE * max(1.0, max_norm(h), max_norm(f))
    multipliers = np.zeros(len(working))

    for iteration in range(1, max_iterations + 1):
        gradient = h @ z + f
        step, multipliers = _equality_step(h, gradient, g[working, :], factor)

        if at_subspace_minimum or max_norm(step) <= STEP_TOLERANCE * max(1.0, max_norm(z)):
            negative = [working[i] for i in range(len(working)) if multipliers[i] < -multiplier_tolerance]
            if not negative:
                return z, working, multipliers, iteration, QpStatus.OPTIMAL
            dropped = min(negative)
            logger.debug(f"Iteration {iteration}: dropping constraint {dropped}")
            working.remove(dropped)
            at_subspace_minimum = False
            continue

        alpha, blocking = 1.0, None
        direction = g @ step
        step_scale = max_norm(step)
        working_lookup = set(working)
        for i in range(g.shape[0]):
            if i in working_lookup or direction[i] <= 1e-12 * row_norms[i] * step_scale:
                continue
            ratio = max(0.0, rhs[i] - g[i] @ z) / direction[i]
            if ratio < alpha:
                alpha, blocking = ratio, i

        z = z + alpha * step
        if blocking is None:
            at_subspace_minimum = True
        else:
            logger.debug(f"Iteration {iteration}: constraint {blocking} blocks at alpha={alpha:.3e}")
            working.append(blocking)
            working.sort()
            at_subspace_minimum = False

    return z, working, multipliers, max_iterations, QpStatus.ITERATION_LIMIT


def _max_violation(g: NDArray, rhs: NDArray, z: NDArray) -> float:
    if g.shape[0] == 0:
        return 0.0
    return float(max(0.0, np.max(g @ z - rhs)))


def phase1_feasible(g: ArrayLike, rhs: ArrayLike) -> Phase1Result:
    """
    Find z with G·z ≤ rhs + 1e-9 or prove there is none.

    Solves min t + ½·δ·(‖z‖² + t²) s.t. G·z − t ≤ rhs, t ≥ −1 with the same
    active-set loop, started from z = 0 and the smallest admissible t.

    Returns:
        Phase1Result: ``feasible`` is False when the best point still
        violates some row by more than 1e-9
    """
    g = np.asarray(g, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64).reshape(-1)
    if g.ndim == 1:
        g = g.reshape(rhs.shape[0], -1) if rhs.shape[0] else g.reshape(0, -1)
    p, m = g.shape
    if p == 0 or np.all(rhs >= 0.0):
        return Phase1Result(True, np.zeros(m), 0.0, 0)

    aug_g = np.zeros((p + 1, m + 1))
    aug_g[:p, :m] = g
    aug_g[:p, m] = -1.0
    aug_g[p, m] = -1.0
    aug_rhs = np.concatenate([rhs, [1.0]])
    aug_h = PHASE1_REGULARIZATION * np.eye(m + 1)
    aug_f = np.zeros(m + 1)
    aug_f[m] = 1.0

    w0 = np.zeros(m + 1)
    w0[m] = max(-1.0, float(np.max(-rhs)))
    w, _, _, iterations, status = _active_set_loop(
        aug_h, cholesky(aug_h), aug_f, aug_g, aug_rhs, w0, [],
        ITERATIONS_PER_DIMENSION * (m + 1 + p + 1),
    )
    z = w[:m]
    violation = _max_violation(g, rhs, z)
    feasible = violation <= FEASIBILITY_TOLERANCE
    logger.debug(f"Phase 1 finished in {iterations} iterations ({status.value}), "
                 f"slack {w[m]:.3e}, violation {violation:.3e}")
    return Phase1Result(feasible, z, violation, iterations)


def _warm_start_point(prob: QpProblem, working: Sequence[int]) -> Optional[NDArray]:
    """Minimizer with the warm working set held at equality, or None if unusable."""
    if not working:
        return None
    g_work = prob.g[list(working), :]
    m, w = prob.m, len(working)
    if w > m:
        return None
    kkt = np.zeros((m + w, m + w))
    kkt[:m, :m] = prob.h
    kkt[:m, m:] = g_work.T
    kkt[m:, :m] = g_work
    try:
        solution = lu_solve(kkt, np.concatenate([-prob.f, prob.rhs[list(working)]]))
    except SingularMatrix:
        return None
    z = solution[:m]
    if _max_violation(prob.g, prob.rhs, z) > FEASIBILITY_TOLERANCE:
        return None
    return z


def qp_solve(prob: QpProblem, warm_start: Optional[Iterable[int]] = None) -> QpSolution:
    """
    Solve the QP.

    Args:
        prob: Problem data
        warm_start: Optional working set guess (row indices); ignored when the
            rows are dependent or their equality-constrained optimum is infeasible

    Returns:
        QpSolution: status OPTIMAL with the unique minimizer, INFEASIBLE when
        phase 1 finds no feasible point, or ITERATION_LIMIT after 50·(m+p)
        iterations
    """
    m, p = prob.m, prob.p
    no_multipliers = np.zeros(p)

    if prob.constant_violations:
        logger.debug(f"Rows violated independently of z: {', '.join(prob.constant_violations)}")
        return QpSolution(np.zeros(m), [], float("inf"), 0, QpStatus.INFEASIBLE, no_multipliers)

    z_free = prob.unconstrained_minimizer()
    if _max_violation(prob.g, prob.rhs, z_free) <= FEASIBILITY_TOLERANCE:
        return QpSolution(z_free, [], prob.objective(z_free), 0, QpStatus.OPTIMAL, no_multipliers)

    working: List[int] = []
    warm_started = False
    phase1_iterations = 0
    z0 = None
    if warm_start is not None:
        candidates = sorted({i for i in warm_start if 0 <= i < p})
        z0 = _warm_start_point(prob, candidates)
        if z0 is not None:
            working, warm_started = candidates, True
        else:
            logger.debug("Warm start rejected, falling back to phase 1")

    if z0 is None:
        phase1 = phase1_feasible(prob.g, prob.rhs)
        phase1_iterations = phase1.iterations
        if not phase1.feasible:
            return QpSolution(phase1.z, [], float("inf"), 0, QpStatus.INFEASIBLE, no_multipliers,
                              phase1_iterations=phase1_iterations, max_violation=phase1.max_violation)
        z0 = phase1.z

    z, working, lam, iterations, status = _active_set_loop(
        prob.h, prob.factor, prob.f, prob.g, prob.rhs, z0, working,
        ITERATIONS_PER_DIMENSION * (m + p), at_subspace_minimum=warm_started,
    )
    multipliers = np.zeros(p)
    if status == QpStatus.OPTIMAL:
        multipliers[working] = lam
    return QpSolution(
        z=z,
        active_set=list(working),
        objective=prob.objective(z),
        iterations=iterations,
        status=status,
        multipliers=multipliers,
        warm_started=warm_started,
        phase1_iterations=phase1_iterations,
        max_violation=_max_violation(prob.g, prob.rhs, z),
    )


def kkt_report(prob: QpProblem, sol: QpSolution) -> KktReport:
    """Residuals of H·z + f + Gᵀλ = 0, λ ≥ 0, λᵢ·(Gz − rhs)ᵢ = 0 and G·z ≤ rhs."""
    z = sol.z
    lam = sol.multipliers
    slack = prob.g @ z - prob.rhs
    return KktReport(
        stationarity=max_norm(prob.h @ z + prob.f + prob.g.T @ lam),
        min_multiplier=float(np.min(lam)) if prob.p else 0.0,
        complementarity=max_norm(lam * slack),
        primal_violation=_max_violation(prob.g, prob.rhs, z),
    )
