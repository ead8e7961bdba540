"""
Discrete-time SISO plant model, constraint sets and prediction stacking.

The prediction horizon is always the state dimension n; nothing in this module
accepts a horizon argument.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..error_handling.exceptions import DimensionMismatch, UncontrollablePair
from ..linalg.matrix import Mat, as_mat, as_vector, is_nonsingular, max_norm


logger = logging.getLogger(__name__)

CONTROLLABILITY_TOLERANCE = 1e-10
MEMBERSHIP_TOLERANCE = 1e-9


def _input_columns(a: Mat, b: Mat) -> List[NDArray[np.float64]]:
    """[B, AB, …, A^{n−1}B] by repeated multiplication."""
    column = b[:, 0].copy()
    columns = [column]
    for _ in range(a.shape[0] - 1):
        column = a @ column
        columns.append(column)
    return columns


def _descending_controllability(a: Mat, b: Mat) -> Mat:
    columns = _input_columns(a, b)
    return as_mat(np.column_stack(columns[::-1]), "controllability matrix")


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Plant x(k+1) = A·x(k) + B·u(k) with a single input."""
    a: Mat
    b: Mat

    def __post_init__(self):
        a = as_mat(self.a, "A")
        b = np.asarray(self.b, dtype=np.float64)
        if b.ndim == 1:
            b = b.reshape(-1, 1)
        b = as_mat(b, "B")
        if a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"A must be square, got {a.shape}")
        if b.shape[1] != 1:
            raise DimensionMismatch(f"B must have exactly one column, got {b.shape[1]}")
        if b.shape[0] != a.shape[0]:
            raise DimensionMismatch(f"B has {b.shape[0]} rows, A has {a.shape[0]}")
        object.__setattr__(self, 'a', a)
        object.__setattr__(self, 'b', b)

        s = _descending_controllability(a, b)
        if not is_nonsingular(s, CONTROLLABILITY_TOLERANCE):
            raise UncontrollablePair(
                "controllability matrix [A^{n-1}B … B] is rank deficient",
                {'n': a.shape[0], 'scale': max_norm(s)},
            )

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def b_column(self) -> NDArray[np.float64]:
        return self.b[:, 0]

    @classmethod
    def from_lists(cls, a: Sequence[Sequence[float]], b: Sequence[float]) -> "LinearSystem":
        return cls(a=as_mat(a, "A"), b=as_mat(np.asarray(b, dtype=np.float64).reshape(-1, 1), "B"))


@dataclass(frozen=True, eq=False)
class ConstraintSpec:
    """
    X = {x : H·x ≤ h}, U = [u_min, u_max], X_f box |x_i| ≤ ε_i.

    A spec without state rows (H of shape 0×n) leaves X unconstrained.
    """
    state_h: NDArray[np.float64]
    state_rhs: NDArray[np.float64]
    u_min: float
    u_max: float
    terminal_halfwidth: NDArray[np.float64]

    def __post_init__(self):
        halfwidth = as_vector(self.terminal_halfwidth, "terminal_halfwidth")
        n = halfwidth.shape[0]
        h = np.array(self.state_h, dtype=np.float64).reshape(-1, n)
        rhs = np.array(self.state_rhs, dtype=np.float64).reshape(-1)
        if h.shape[0] != rhs.shape[0]:
            raise DimensionMismatch(f"state_h has {h.shape[0]} rows, state_rhs has {rhs.shape[0]} entries")
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(rhs))):
            raise DimensionMismatch("state constraints must be finite")
        if np.any(rhs <= 0.0):
            raise ValueError("state_rhs must be strictly positive so that X contains the origin")
        if not self.u_min < 0.0 < self.u_max:
            raise ValueError(f"need u_min < 0 < u_max, got [{self.u_min}, {self.u_max}]")
        if np.any(halfwidth <= 0.0):
            raise ValueError("terminal_halfwidth must be strictly positive")
        h.setflags(write=False)
        rhs.setflags(write=False)
        object.__setattr__(self, 'state_h', h)
        object.__setattr__(self, 'state_rhs', rhs)
        object.__setattr__(self, 'terminal_halfwidth', halfwidth)
        object.__setattr__(self, 'u_min', float(self.u_min))
        object.__setattr__(self, 'u_max', float(self.u_max))

    @property
    def n(self) -> int:
        return self.terminal_halfwidth.shape[0]

    @property
    def state_rows(self) -> int:
        return self.state_h.shape[0]

    @classmethod
    def input_only(cls, n: int, u_min: float, u_max: float,
                   terminal_halfwidth: Optional[ArrayLike] = None) -> "ConstraintSpec":
        """X = ℝⁿ; only the input interval is constrained."""
        halfwidth = np.ones(n) if terminal_halfwidth is None else terminal_halfwidth
        return cls(np.zeros((0, n)), np.zeros(0), u_min, u_max, halfwidth)

    @classmethod
    def state_box(cls, bounds: ArrayLike, u_min: float, u_max: float,
                  terminal_halfwidth: Optional[ArrayLike] = None) -> "ConstraintSpec":
        """X = {|x_i| ≤ bounds_i} written as 2n half-spaces."""
        bounds = np.asarray(bounds, dtype=np.float64)
        n = bounds.shape[0]
        h = np.vstack([np.eye(n), -np.eye(n)])
        rhs = np.concatenate([bounds, bounds])
        halfwidth = np.ones(n) if terminal_halfwidth is None else terminal_halfwidth
        return cls(h, rhs, u_min, u_max, halfwidth)

    def with_terminal_halfwidth(self, halfwidth: ArrayLike) -> "ConstraintSpec":
        return replace(self, terminal_halfwidth=np.asarray(halfwidth, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class PredictionStack:
    """Stacked maps from (x(k), U(k)) to x(1|k) … x(n|k)."""
    phi: Mat
    s_row: Mat
    gamma: Mat
    n: int

    def stage_phi(self, i: int) -> Mat:
        """A^i (1-indexed stage)."""
        return self.phi[(i - 1) * self.n:i * self.n, :]

    def stage_gamma(self, i: int) -> Mat:
        """Block row of gamma producing x(i|k)."""
        return self.gamma[(i - 1) * self.n:i * self.n, :]

    @property
    def a_pow_n(self) -> Mat:
        return self.stage_phi(self.n)

    def predict(self, x: ArrayLike, u_sequence: ArrayLike) -> NDArray[np.float64]:
        """Predicted states as an n×n array whose row i−1 is x(i|k)."""
        stacked = self.phi @ np.asarray(x, dtype=np.float64) + self.gamma @ np.asarray(u_sequence, dtype=np.float64)
        return stacked.reshape(self.n, self.n)

    def terminal_state(self, x: ArrayLike, u_sequence: ArrayLike) -> NDArray[np.float64]:
        """x(n|k) = Aⁿx + S·U."""
        return self.a_pow_n @ np.asarray(x, dtype=np.float64) + self.s_row @ np.asarray(u_sequence, dtype=np.float64)


@dataclass
class MembershipReport:
    """Per-row slack of a state/input pair against a ConstraintSpec (slack ≥ 0 means satisfied)."""
    state_slack: NDArray[np.float64]
    control_slack: NDArray[np.float64]
    terminal_slack: NDArray[np.float64]
    tolerance: float = MEMBERSHIP_TOLERANCE
    in_state_set: bool = field(init=False)
    in_control_set: bool = field(init=False)
    in_terminal_set: bool = field(init=False)

    def __post_init__(self):
        self.in_state_set = bool(np.all(self.state_slack >= -self.tolerance))
        self.in_control_set = bool(np.all(self.control_slack >= -self.tolerance))
        self.in_terminal_set = bool(np.all(self.terminal_slack >= -self.tolerance))

    @property
    def admissible(self) -> bool:
        """x ∈ X and u ∈ U (terminal membership not required)."""
        return self.in_state_set and self.in_control_set


def controllability_matrix(sys: LinearSystem) -> Mat:
    """S = [A^{n−1}B … AB B]; column j is A^{n−1−j}B."""
    return _descending_controllability(sys.a, sys.b)


def build_prediction(sys: LinearSystem) -> PredictionStack:
    """
    Build phi (A¹…Aⁿ stacked) and the block-lower-triangular gamma.

    Block (i, j) of gamma is A^{i−j−1}B for j < i (1-indexed). Its last block
    row reuses the controllability columns so it equals S bit for bit.
    """
    n = sys.n
    columns = _input_columns(sys.a, sys.b)

    phi = np.zeros((n * n, n))
    power = np.eye(n)
    for i in range(1, n + 1):
        power = power @ sys.a
        phi[(i - 1) * n:i * n, :] = power

    gamma = np.zeros((n * n, n))
    for i in range(1, n + 1):
        for j in range(1, i + 1):
            gamma[(i - 1) * n:i * n, j - 1] = columns[i - j]

    s_row = controllability_matrix(sys)
    return PredictionStack(phi=as_mat(phi, "phi"), s_row=s_row, gamma=as_mat(gamma, "gamma"), n=n)


def step(sys: LinearSystem, x: ArrayLike, u: float) -> NDArray[np.float64]:
    """One step of x(k+1) = A·x(k) + B·u(k)."""
    return sys.a @ np.asarray(x, dtype=np.float64) + sys.b_column * float(u)


def check_membership(spec: ConstraintSpec, x: ArrayLike, u: Optional[float] = None,
                     tolerance: float = MEMBERSHIP_TOLERANCE) -> MembershipReport:
    """
    Slack of H·x ≤ h, u_min ≤ u ≤ u_max and |x_i| ≤ ε_i.

    Args:
        spec: Constraint sets
        x: State vector
        u: Input; None skips the input check
        tolerance: Allowed violation on every inequality

    Returns:
        MembershipReport: slacks (negative = violated) and membership flags
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.n,):
        raise DimensionMismatch(f"state has shape {x.shape}, constraints expect ({spec.n},)")
    state_slack = spec.state_rhs - spec.state_h @ x
    if u is None:
        control_slack = np.zeros(2)
    else:
        control_slack = np.array([spec.u_max - u, u - spec.u_min])
    terminal_slack = spec.terminal_halfwidth - np.abs(x)
    return MembershipReport(state_slack, control_slack, terminal_slack, tolerance)
