"""
Unconstrained deadbeat MPC.

Three equivalent forms of the same controller:
- implicit terminal-equality optimization, solved as the unique solution of
  S·U = −Aⁿx (the feasible set is a single point, so Q and R never matter)
- explicit gain K_db = S_nᵀAⁿ, S_nᵀ the first row of S⁻¹
- terminal-cost-only optimization, whose stationarity condition
  2(Aⁿx + S·U)ᵀP·S = 0 has the same unique solution for any P ≻ 0; it is
  solved through the Cholesky factor of P, so agreement with the other two
  forms is a numerical check, not an identity
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..error_handling.exceptions import DeadbeatDesignError
from ..linalg.matrix import (
    Mat, as_mat, as_vector, cholesky, lu_solve, mat_pow, max_norm
)
from ..plant.lti import LinearSystem, PredictionStack, build_prediction, controllability_matrix


logger = logging.getLogger(__name__)

NILPOTENCY_TOLERANCE = 1e-8


@dataclass(frozen=True, eq=False)
class DeadbeatGain:
    """u = −k_db·x places every closed-loop eigenvalue at the origin."""
    k_db: NDArray[np.float64]
    s_inv_first_row: NDArray[np.float64]
    nilpotency_index: int

    @property
    def n(self) -> int:
        return self.k_db.shape[0]


@dataclass(frozen=True, eq=False)
class WeightSpec:
    """Stage weights ‖x‖²_Q + r·u²."""
    q: Mat
    r: float

    def __post_init__(self):
        q = as_mat(self.q, "Q")
        cholesky(q)
        if not self.r > 0.0:
            raise ValueError(f"R must be positive, got {self.r}")
        object.__setattr__(self, 'q', q)
        object.__setattr__(self, 'r', float(self.r))

    @classmethod
    def scaled_identity(cls, n: int, q_scale: float = 1.0, r: float = 0.1) -> "WeightSpec":
        return cls(as_mat(q_scale * np.eye(n), "Q"), r)


@dataclass
class TerminalEqualitySolution:
    """Optimal sequence U* and its predicted states x(1|k) … x(n|k) (row i−1 is x(i|k))."""
    u_sequence: NDArray[np.float64]
    predicted_states: NDArray[np.float64]


def closed_loop_matrix(sys: LinearSystem, k: ArrayLike) -> NDArray[np.float64]:
    """A − B·k for a 1×n row k."""
    return sys.a - np.outer(sys.b_column, np.asarray(k, dtype=np.float64).reshape(-1))


def nilpotency_index(sys: LinearSystem, k: ArrayLike) -> Optional[int]:
    """
    Smallest m ≤ n with ‖(A−BK)ᵐ‖_max ≤ 1e-8·max(1, ‖A−BK‖_max)ᵐ.

    Returns:
        The index, or None when A − BK is not nilpotent within n powers
    """
    a_cl = closed_loop_matrix(sys, k)
    scale = max(1.0, max_norm(a_cl))
    power = np.eye(sys.n)
    for m in range(1, sys.n + 1):
        power = power @ a_cl
        if max_norm(power) <= NILPOTENCY_TOLERANCE * scale ** m:
            return m
    return None


def deadbeat_gain(sys: LinearSystem) -> DeadbeatGain:
    """
    Explicit deadbeat gain K_db = S_nᵀAⁿ.

    S_n is obtained from Sᵀ·S_n = e₁, so S_nᵀ is the first row of S⁻¹.

    Raises:
        DeadbeatDesignError: the computed gain fails the nilpotency certificate
    """
    s = controllability_matrix(sys)
    e1 = np.zeros(sys.n)
    e1[0] = 1.0
    s_n = lu_solve(s.T, e1)
    k_db = s_n @ mat_pow(sys.a, sys.n)

    index = nilpotency_index(sys, k_db)
    if index is None:
        raise DeadbeatDesignError(
            "A − B·K_db is not nilpotent within tolerance",
            {'k_db': np.array2string(k_db, precision=6)},
        )
    logger.debug(f"Deadbeat gain {np.array2string(k_db, precision=6)} with nilpotency index {index}")
    return DeadbeatGain(k_db=as_vector(k_db, "K_db"), s_inv_first_row=as_vector(s_n, "S_n"), nilpotency_index=index)


def solve_terminal_equality(sys: LinearSystem, weights: WeightSpec, x: ArrayLike,
                            prediction: Optional[PredictionStack] = None) -> TerminalEqualitySolution:
    """
    Minimize Σ‖x(i|k)‖²_Q + R·u(i−1|k)² subject to x(n|k) = 0.

    The equality constraint leaves exactly one feasible sequence,
    U* = −S⁻¹Aⁿx, so ``weights`` is accepted for signature fidelity but
    cannot change the result.

    Args:
        sys: Plant
        weights: Stage weights (inert)
        x: Current state
        prediction: Pre-built prediction stack, rebuilt when omitted

    Returns:
        TerminalEqualitySolution: U* and predicted states with x(n|k) set to zero
    """
    x = np.asarray(x, dtype=np.float64)
    pred = prediction or build_prediction(sys)
    u_star = lu_solve(pred.s_row, -(pred.a_pow_n @ x))
    states = pred.predict(x, u_star)
    states[-1, :] = 0.0
    return TerminalEqualitySolution(u_sequence=u_star, predicted_states=states)


def solve_terminal_cost_unconstrained(sys: LinearSystem, p: ArrayLike, x: ArrayLike,
                                      prediction: Optional[PredictionStack] = None) -> NDArray[np.float64]:
    """
    Minimize x(n|k)ᵀ·P·x(n|k) without constraints.

    Stationarity reads SᵀP·(Aⁿx + S·U) = 0. With P = L·Lᵀ the factor SᵀL is
    square and nonsingular, so the condition is solved as (LᵀS)·U = −LᵀAⁿx.

    Raises:
        PositiveDefinitenessFailure: P is not positive definite
        SingularMatrix: the weighted stationarity matrix LᵀS is singular
    """
    factor = cholesky(p)
    x = np.asarray(x, dtype=np.float64)
    pred = prediction or build_prediction(sys)
    weighted = factor.T @ pred.s_row
    return lu_solve(weighted, -(factor.T @ (pred.a_pow_n @ x)))


def unconstrained_controller_step(gain: DeadbeatGain, x: ArrayLike) -> float:
    """Receding-horizon input u = −k_db·x."""
    return float(-gain.k_db @ np.asarray(x, dtype=np.float64))
