"""
Dense linear-algebra kernel shared by every design and solver module.
"""

from .matrix import (
    Mat, as_mat, as_vector, cholesky, cholesky_solve, identity, inverse,
    is_nonsingular, is_positive_definite, lu_solve, mat_pow, max_norm,
)
