"""
Reference plants: the third-order benchmark and seeded random controllable plants.
"""
import logging

import numpy as np

from ..error_handling.exceptions import SingularMatrix, UncontrollablePair
from ..linalg.matrix import as_mat, inverse, max_norm
from .lti import LinearSystem, controllability_matrix


logger = logging.getLogger(__name__)

BENCHMARK_A = ((1.1, 2.0, 0.0),
               (0.0, 0.95, 1.0),
               (0.0, 0.0, 1.2))
BENCHMARK_B = (0.0, 0.079, 0.1)

# Published design values for the benchmark (4 printed decimals).
BENCHMARK_DEADBEAT_GAIN = (7.2258, 25.1192, 12.6558)
BENCHMARK_STABILIZING_GAIN = (2.2150, 15.0471, 14.6128)
BENCHMARK_TERMINAL_WEIGHT = ((6.1590, 19.4637, 5.8132),
                             (19.4637, 96.8173, 40.0964),
                             (5.8132, 40.0964, 29.9407))
BENCHMARK_INPUT_BOUND = 6.0
BENCHMARK_Q_SCALE = 1.0
BENCHMARK_R = 0.1

MAX_CONDITION_ESTIMATE = 1e6


def benchmark_plant() -> LinearSystem:
    """Third-order unstable benchmark plant with input column [0, 0.079, 0.1]."""
    return LinearSystem.from_lists(BENCHMARK_A, BENCHMARK_B)


def condition_estimate(sys: LinearSystem) -> float:
    """‖S‖_max·‖S⁻¹‖_max for the controllability matrix S."""
    s = controllability_matrix(sys)
    return max_norm(s) * max_norm(inverse(s))


def random_controllable_system(rng: np.random.Generator, n: int, max_attempts: int = 100) -> LinearSystem:
    """
    Draw A, B with standard normal entries until the pair is controllable
    and the controllability matrix is reasonably conditioned.

    Args:
        rng: Seeded generator
        n: State dimension
        max_attempts: Draws before giving up

    Returns:
        LinearSystem: A controllable plant
    """
    for attempt in range(max_attempts):
        a = rng.standard_normal((n, n))
        b = rng.standard_normal((n, 1))
        try:
            sys = LinearSystem(as_mat(a, "A"), as_mat(b, "B"))
            if condition_estimate(sys) <= MAX_CONDITION_ESTIMATE:
                return sys
        except (UncontrollablePair, SingularMatrix):
            pass
        logger.debug(f"Rejected random plant draw {attempt} (n={n})")
    raise UncontrollablePair(f"no well-conditioned controllable plant found in {max_attempts} draws", {'n': n})
