"""
Discrete Lyapunov equation A_KᵀP·A_K − P = −Q_eff and the Schur-stability
certificate built on it.

The equation is vectorized into the n²×n² system (I − A_Kᵀ⊗A_Kᵀ)·vec(P) =
vec(Q_eff) and solved by LU. For a positive definite right-hand side the
solution is positive definite exactly when A_K is Schur stable, so no
eigenvalues are ever computed.
"""
import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from ..error_handling.exceptions import (
    NotSymmetric, PositiveDefinitenessFailure, SingularMatrix, Unstable
)
from ..linalg.matrix import Mat, as_mat, cholesky, lu_solve, max_norm
from ..plant.lti import LinearSystem
from .deadbeat import WeightSpec, closed_loop_matrix


logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-8


@dataclass(frozen=True, eq=False)
class LyapunovResult:
    """Symmetric positive definite P and the max-abs residual of the equation."""
    p: Mat
    residual: float


def lyapunov_residual(a_k: ArrayLike, p: ArrayLike, q_eff: ArrayLike) -> float:
    """‖A_KᵀP·A_K − P + Q_eff‖_max."""
    a_k = np.asarray(a_k, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    return max_norm(a_k.T @ p @ a_k - p + np.asarray(q_eff, dtype=np.float64))


def solve_discrete_lyapunov(a_k: ArrayLike, q_eff: ArrayLike, order: str = "F") -> LyapunovResult:
    """
    Solve A_KᵀP·A_K − P = −Q_eff.

    Args:
        a_k: Closed-loop matrix A − BK
        q_eff: Symmetric positive definite right-hand side (Q + KᵀRK)
        order: Vectorization order, "F" (column-major) or "C" (row-major);
            both give the same Kronecker matrix and the same P

    Returns:
        LyapunovResult: P ≻ 0 and the residual

    Raises:
        Unstable: the Kronecker system is singular, P is not positive
            definite, or the residual check fails; A_K is not Schur stable
    """
    a_k = np.asarray(a_k, dtype=np.float64)
    q_eff = np.asarray(q_eff, dtype=np.float64)
    n = a_k.shape[0]
    try:
        cholesky(q_eff)
    except (NotSymmetric, PositiveDefinitenessFailure) as e:
        raise PositiveDefinitenessFailure(f"Q_eff must be symmetric positive definite: {e.message}",
                                          getattr(e, 'pivot_index', -1))

    kron = np.eye(n * n) - np.kron(a_k.T, a_k.T)
    try:
        vec_p = lu_solve(kron, q_eff.reshape(-1, order=order))
    except SingularMatrix as e:
        raise Unstable("Lyapunov equation is singular; A_K has an eigenvalue pair on λμ = 1",
                       {'pivot_index': e.pivot_index})

    p = vec_p.reshape(n, n, order=order)
    p = 0.5 * (p + p.T)
    try:
        cholesky(p)
    except PositiveDefinitenessFailure as e:
        raise Unstable("Lyapunov solution is not positive definite; A_K is not Schur stable",
                       {'pivot_index': e.pivot_index})

    residual = lyapunov_residual(a_k, p, q_eff)
    if residual > RESIDUAL_TOLERANCE * max(1.0, max_norm(p)):
        raise Unstable(f"Lyapunov residual {residual:.3e} exceeds tolerance", {'residual': residual})

    logger.debug(f"Solved {n}x{n} Lyapunov equation, residual {residual:.3e}")
    return LyapunovResult(p=as_mat(p, "P"), residual=residual)


def is_schur_stable(a_k: ArrayLike) -> bool:
    """True iff A_KᵀP·A_K − P = −I has a positive definite solution."""
    a_k = np.asarray(a_k, dtype=np.float64)
    try:
        solve_discrete_lyapunov(a_k, np.eye(a_k.shape[0]))
    except Unstable:
        return False
    return True


def terminal_weight(sys: LinearSystem, k: ArrayLike, weights: WeightSpec) -> LyapunovResult:
    """
    Terminal weight for the constrained controller: solve the Lyapunov
    equation with A_K = A − BK and Q_eff = Q + KᵀRK.

    Raises:
        Unstable: K does not stabilize the plant
    """
    k = np.asarray(k, dtype=np.float64).reshape(-1)
    a_k = closed_loop_matrix(sys, k)
    q_eff = weights.q + weights.r * np.outer(k, k)
    result = solve_discrete_lyapunov(a_k, q_eff)
    logger.info(f"Terminal weight solved, residual {result.residual:.3e}")
    return result
