#!/usr/bin/env python3
"""
Test script for the discrete Lyapunov solver and terminal weight.
"""
import sys
from pathlib import Path

# Add project root to Python path
sys.path.insert(0, str(Path(__file__).parent))

import numpy as np

from src.control.deadbeat import WeightSpec, closed_loop_matrix, deadbeat_gain
from src.control.lyap import (
    is_schur_stable, lyapunov_residual, solve_discrete_lyapunov, terminal_weight
)
from src.error_handling.exceptions import Unstable
from src.linalg.matrix import is_positive_definite, max_norm
from src.plant.catalog import BENCHMARK_STABILIZING_GAIN, BENCHMARK_TERMINAL_WEIGHT, benchmark_plant


def test_closed_form_cases():
    """Nilpotent-in-one-step and scalar cases."""
    print("Testing closed-form Lyapunov cases...")

    q_eff = np.array([[2.0, 0.5], [0.5, 1.0]])
    result = solve_discrete_lyapunov(np.zeros((2, 2)), q_eff)
    assert max_norm(result.p - q_eff) < 1e-15

    result = solve_discrete_lyapunov([[0.5]], [[1.0]])
    assert abs(result.p[0, 0] - 4.0 / 3.0) < 1e-14
    assert result.residual < 1e-14

    a_k = np.array([[0.3, 0.4], [-0.2, 0.5]])
    column = solve_discrete_lyapunov(a_k, np.eye(2), order="F")
    row = solve_discrete_lyapunov(a_k, np.eye(2), order="C")
    assert max_norm(column.p - row.p) < 1e-12
    assert lyapunov_residual(a_k, column.p, np.eye(2)) < 1e-12
    print("✓ Closed-form cases")


def test_stability_certificate():
    """Schur stability without eigenvalues."""
    print("Testing stability certificate...")

    assert is_schur_stable(0.5 * np.eye(2))
    assert not is_schur_stable(np.eye(2))
    assert not is_schur_stable(np.array([[1.5, 0.0], [0.0, 0.2]]))

    plant = benchmark_plant()
    gain = deadbeat_gain(plant)
    assert is_schur_stable(closed_loop_matrix(plant, gain.k_db))

    try:
        solve_discrete_lyapunov(plant.a, np.eye(3))
        assert False, "the open-loop benchmark is unstable"
    except Unstable:
        pass
    print("✓ Stability certificate")


def test_benchmark_terminal_weight():
    """P for the published stabilizing gain with Q = I, R = 0.1."""
    print("Testing benchmark terminal weight...")

    plant = benchmark_plant()
    k = np.array(BENCHMARK_STABILIZING_GAIN)
    weights = WeightSpec.scaled_identity(3, 1.0, 0.1)
    result = terminal_weight(plant, k, weights)

    q_eff = np.eye(3) + 0.1 * np.outer(k, k)
    residual = lyapunov_residual(closed_loop_matrix(plant, k), result.p, q_eff)
    assert residual <= 1e-8 * max(1.0, max_norm(result.p))
    assert np.array_equal(result.p, result.p.T)

    deviation = max_norm(result.p - np.array(BENCHMARK_TERMINAL_WEIGHT))
    print(f"  deviation from published P: {deviation:.3e} (informational)")

    try:
        terminal_weight(plant, np.zeros(3), weights)
        assert False, "K = 0 leaves the benchmark unstable"
    except Unstable:
        pass
    print("✓ Benchmark terminal weight")


def random_stable(rng: np.random.Generator, n: int) -> np.ndarray:
    """R·D·R⁻¹ with |d_i| < 0.9."""
    r = rng.standard_normal((n, n)) + n * np.eye(n)
    d = np.diag(rng.uniform(-0.9, 0.9, size=n))
    return r @ d @ np.linalg.inv(r)


def test_random_stable_matrices():
    """Residual and positive definiteness on seeded Schur-stable matrices."""
    print("Testing Lyapunov solve on random stable matrices...")

    rng = np.random.default_rng(23)
    worst = 0.0
    for trial in range(40):
        n = 1 + trial % 5
        a_k = random_stable(rng, n)
        m = rng.standard_normal((n, n))
        q_eff = m @ m.T + np.eye(n)
        result = solve_discrete_lyapunov(a_k, q_eff)
        worst = max(worst, result.residual / max(1.0, max_norm(result.p)))
        assert is_positive_definite(result.p)
        assert is_schur_stable(a_k)
    assert worst <= 1e-9, f"worst relative residual {worst:.3e}"
    print(f"✓ 40 random stable matrices, worst relative residual {worst:.1e}")


def test_monotone_in_weight():
    """A larger Q_eff gives a larger P in the positive semidefinite order."""
    print("Testing Lyapunov monotonicity...")

    rng = np.random.default_rng(31)
    for trial in range(20):
        n = 1 + trial % 4
        a_k = random_stable(rng, n)
        m = rng.standard_normal((n, n))
        q_small = m @ m.T + np.eye(n)
        extra = rng.standard_normal((n, 1))
        q_large = q_small + extra @ extra.T
        p_small = solve_discrete_lyapunov(a_k, q_small).p
        p_large = solve_discrete_lyapunov(a_k, q_large).p
        difference = np.asarray(p_large - p_small)
        lowest = np.linalg.eigvalsh(0.5 * (difference + difference.T)).min()
        assert lowest >= -1e-9 * max(1.0, max_norm(p_large)), f"trial {trial}: eigenvalue {lowest:.3e}"
    print("✓ P grows with Q_eff")


if __name__ == "__main__":
    test_closed_form_cases()
    test_stability_certificate()
    test_benchmark_terminal_weight()
    test_random_stable_matrices()
    test_monotone_in_weight()
    print("\n✓ Lyapunov tests completed")
