"""
Dense real-matrix kernel.

Matrices are read-only 2-D float64 numpy arrays; vectors are read-only 1-D
arrays. The LU and Cholesky routines wrap LAPACK through scipy and apply this
toolkit's pivot thresholds on top of the factors.
"""
import logging
import warnings
from typing import Sequence, Union

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import LinAlgWarning
from scipy.linalg import lapack

from ..error_handling.exceptions import (
    DimensionMismatch, NonFiniteValue, NotSymmetric, PositiveDefinitenessFailure, SingularMatrix
)


logger = logging.getLogger(__name__)

Mat = NDArray[np.float64]

PIVOT_TOLERANCE = 1e-12
SYMMETRY_TOLERANCE = 1e-9


def _freeze(values: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise NonFiniteValue(f"{name} contains non-finite entries")
    values.setflags(write=False)
    return values


def as_mat(values: Union[ArrayLike, Sequence[Sequence[float]]], name: str = "matrix") -> Mat:
    """
    Build an immutable matrix.

    Args:
        values: Nested rows or any array-like with two dimensions
        name: Used in error messages

    Returns:
        Mat: Read-only float64 copy
    """
    array = np.array(values, dtype=np.float64)
    if array.ndim != 2 or array.shape[0] == 0 or array.shape[1] == 0:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D matrix, got shape {array.shape}")
    return _freeze(array, name)


def as_vector(values: ArrayLike, name: str = "vector") -> NDArray[np.float64]:
    """Build an immutable 1-D vector (a column matrix is flattened)."""
    array = np.array(values, dtype=np.float64)
    if array.ndim == 2 and 1 in array.shape:
        array = array.reshape(-1)
    if array.ndim != 1:
        raise DimensionMismatch(f"{name} must be a vector, got shape {array.shape}")
    return _freeze(array, name)


def identity(n: int) -> Mat:
    return _freeze(np.eye(n), "identity")


def max_norm(a: ArrayLike) -> float:
    """Largest absolute entry (0.0 for empty arrays)."""
    array = np.asarray(a, dtype=np.float64)
    return float(np.max(np.abs(array))) if array.size else 0.0


def is_square(a: np.ndarray) -> bool:
    return a.ndim == 2 and a.shape[0] == a.shape[1]


def lu_solve(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    """
    Solve a·x = b by LU factorization with partial pivoting.

    Args:
        a: Square matrix (not modified)
        b: Vector or matrix with a.rows rows

    Returns:
        Solution with the shape of b

    Raises:
        SingularMatrix: a pivot magnitude is below 1e-12·‖a‖_max
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if not is_square(a):
        raise DimensionMismatch(f"lu_solve needs a square matrix, got {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"right-hand side has {b.shape[0]} rows, matrix has {a.shape[0]}")

    scale = max_norm(a)
    if scale == 0.0:
        raise SingularMatrix("matrix is identically zero", pivot_index=0)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)

    pivots = np.abs(np.diag(lu))
    small = np.flatnonzero(pivots < PIVOT_TOLERANCE * scale)
    if small.size:
        index = int(small[0])
        raise SingularMatrix(
            f"pivot {index} is {pivots[index]:.3e}, below {PIVOT_TOLERANCE:g}·‖a‖_max",
            pivot_index=index,
            context={'size': a.shape[0], 'scale': scale},
        )
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def is_nonsingular(a: ArrayLike, relative_tolerance: float = PIVOT_TOLERANCE) -> bool:
    """Pivoted-LU rank test: True when every pivot exceeds tolerance·‖a‖_max."""
    a = np.asarray(a, dtype=np.float64)
    scale = max_norm(a)
    if scale == 0.0:
        return False
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, _ = scipy.linalg.lu_factor(a, check_finite=False)
    return bool(np.all(np.abs(np.diag(lu)) >= relative_tolerance * scale))


def inverse(a: ArrayLike) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return lu_solve(a, np.eye(a.shape[0]))


def check_symmetric(a: ArrayLike, tolerance: float = SYMMETRY_TOLERANCE) -> None:
    """Raise NotSymmetric unless ‖a − aᵀ‖_max ≤ tolerance·max(1, ‖a‖_max)."""
    a = np.asarray(a, dtype=np.float64)
    if not is_square(a):
        raise DimensionMismatch(f"expected a square matrix, got {a.shape}")
    asymmetry = max_norm(a - a.T)
    if asymmetry > tolerance * max(1.0, max_norm(a)):
        raise NotSymmetric(f"matrix asymmetry {asymmetry:.3e} exceeds tolerance", {'asymmetry': asymmetry})


def cholesky(a: ArrayLike) -> Mat:
    """
    Lower-triangular Cholesky factor L with L·Lᵀ = a.

    Raises:
        NotSymmetric: a is not symmetric to 1e-9 relative
        PositiveDefinitenessFailure: factorization broke down; pivot_index is 0-based
    """
    a = np.asarray(a, dtype=np.float64)
    check_symmetric(a)
    symmetric = 0.5 * (a + a.T)
    factor, info = lapack.dpotrf(symmetric, lower=1, clean=1)
    if info > 0:
        raise PositiveDefinitenessFailure(
            f"matrix is not positive definite (pivot {info - 1})", pivot_index=int(info - 1)
        )
    if info < 0:
        raise DimensionMismatch(f"dpotrf rejected argument {-info}")
    return _freeze(np.tril(factor), "cholesky factor")


def is_positive_definite(a: ArrayLike) -> bool:
    try:
        cholesky(a)
    except (NotSymmetric, PositiveDefinitenessFailure):
        return False
    return True


def cholesky_solve(factor: Mat, b: ArrayLike) -> np.ndarray:
    """Solve (L·Lᵀ)·x = b given the lower factor from cholesky()."""
    return scipy.linalg.cho_solve((factor, True), np.asarray(b, dtype=np.float64), check_finite=False)


def mat_pow(a: ArrayLike, k: int) -> Mat:
    """aᵏ by repeated multiplication; a⁰ = I."""
    a = np.asarray(a, dtype=np.float64)
    if not is_square(a):
        raise DimensionMismatch(f"mat_pow needs a square matrix, got {a.shape}")
    if k < 0:
        raise ValueError("mat_pow exponent must be non-negative")
    result = np.eye(a.shape[0])
    for _ in range(k):
        result = result @ a
    return _freeze(result, "matrix power")
