#!/usr/bin/env python3
"""
Test script for the active-set QP solver.
"""
import itertools
import sys
from pathlib import Path

# Add project root to Python path
sys.path.insert(0, str(Path(__file__).parent))

import numpy as np

from src.error_handling.exceptions import DimensionMismatch
from src.optimization.qp import QpProblem, QpStatus, kkt_report, phase1_feasible, qp_solve


def enumerate_optimum(h, f, g, rhs):
    """Exact minimizer by trying every linearly independent working set."""
    m = h.shape[0]
    best = None
    for size in range(0, m + 1):
        for rows in itertools.combinations(range(g.shape[0]), size):
            rows = list(rows)
            g_w = g[rows, :]
            if size and np.linalg.matrix_rank(g_w) < size:
                continue
            kkt = np.zeros((m + size, m + size))
            kkt[:m, :m] = h
            kkt[:m, m:] = g_w.T
            kkt[m:, :m] = g_w
            solution = np.linalg.solve(kkt, np.concatenate([-f, rhs[rows]]))
            z, lam = solution[:m], solution[m:]
            if np.max(g @ z - rhs) > 1e-9 or (size and np.min(lam) < -1e-9):
                continue
            value = 0.5 * z @ h @ z + f @ z
            if best is None or value < best[1]:
                best = (z, value)
    return best


def random_problem(rng, m, p):
    root = rng.standard_normal((m, m))
    h = root @ root.T + m * np.eye(m)
    f = 5.0 * rng.standard_normal(m)
    g = rng.standard_normal((p, m))
    z_feasible = rng.standard_normal(m)
    rhs = g @ z_feasible + rng.uniform(0.1, 1.0, p)
    return QpProblem(h, f, g, rhs)


def test_simple_problems():
    """Hand-solved problems."""
    print("Testing hand-solved QPs...")

    free = QpProblem(np.eye(2), [-1.0, -1.0], [[1.0, 0.0]], [5.0])
    sol = qp_solve(free)
    assert sol.optimal
    assert np.allclose(sol.z, [1.0, 1.0], atol=1e-14)
    assert sol.active_set == []
    assert sol.iterations == 0

    boxed = QpProblem(np.eye(2), [-2.0, -2.0], [[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0])
    sol = qp_solve(boxed)
    assert sol.optimal
    assert np.allclose(sol.z, [1.0, 1.0], atol=1e-12)
    assert sol.active_set == [0, 1]
    assert np.allclose(sol.multipliers, [1.0, 1.0], atol=1e-12)
    assert abs(sol.objective - (-3.0)) < 1e-12
    assert kkt_report(boxed, sol).passed()

    duplicated = QpProblem(np.eye(2), [-2.0, -2.0],
                           [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [1.0, 1.0, 1.0])
    sol = qp_solve(duplicated)
    assert sol.optimal
    assert np.allclose(sol.z, [1.0, 1.0], atol=1e-12)
    assert 1 not in sol.active_set
    assert kkt_report(duplicated, sol).passed()
    print("✓ Hand-solved QPs")


def test_infeasible_problems():
    """Phase 1 and constant-row infeasibility."""
    print("Testing infeasibility detection...")

    contradictory = QpProblem([[1.0]], [0.0], [[1.0], [-1.0]], [-1.0, -1.0])
    sol = qp_solve(contradictory)
    assert sol.status == QpStatus.INFEASIBLE
    assert sol.max_violation > 0.5
    assert not sol.optimal

    phase1 = phase1_feasible([[1.0], [-1.0]], [-1.0, -1.0])
    assert not phase1.feasible
    assert abs(phase1.max_violation - 1.0) < 1e-6

    constant = QpProblem(np.eye(2), [0.0, 0.0], np.zeros((0, 2)), [], constant_violations=("f:0:0+",))
    sol = qp_solve(constant)
    assert sol.status == QpStatus.INFEASIBLE
    assert sol.iterations == 0

    trivial = phase1_feasible([[1.0, 2.0]], [0.5])
    assert trivial.feasible and trivial.iterations == 0
    assert np.array_equal(trivial.z, [0.0, 0.0])

    shifted = phase1_feasible([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]], [-2.0, -3.0, 6.0])
    assert shifted.feasible
    assert shifted.z[0] >= 2.0 - 1e-9 and shifted.z[1] >= 3.0 - 1e-9 and shifted.z.sum() <= 6.0 + 1e-9
    print("✓ Infeasibility detection")


def test_against_enumeration():
    """Random strictly convex problems against the exhaustive active-set oracle."""
    print("Testing against exhaustive enumeration...")

    rng = np.random.default_rng(2024)
    for trial in range(40):
        m = 2 + trial % 3
        prob = random_problem(rng, m, 2 * m + 1)
        sol = qp_solve(prob)
        assert sol.optimal, f"trial {trial}: {sol.status}"
        expected_z, expected_value = enumerate_optimum(prob.h, prob.f, prob.g, prob.rhs)
        assert np.max(np.abs(sol.z - expected_z)) <= 1e-7 * max(1.0, np.max(np.abs(expected_z)))
        assert abs(sol.objective - expected_value) <= 1e-7 * max(1.0, abs(expected_value))
        assert kkt_report(prob, sol).passed()
    print("✓ 40 random problems match the enumeration oracle")


def test_against_grid():
    """No feasible grid point beats the solver on a 2-D problem."""
    print("Testing against grid search...")

    prob = QpProblem([[2.0, 0.5], [0.5, 1.0]], [-4.0, 3.0],
                     [[1.0, 1.0], [-1.0, 2.0], [0.0, -1.0]], [1.0, 2.0, 1.5])
    sol = qp_solve(prob)
    assert sol.optimal

    axis = np.arange(-4.0, 4.0 + 1e-9, 0.01)
    zx, zy = np.meshgrid(axis, axis)
    points = np.column_stack([zx.ravel(), zy.ravel()])
    feasible = np.all(points @ prob.g.T <= prob.rhs, axis=1)
    values = 0.5 * np.einsum('ij,jk,ik->i', points, prob.h, points) + points @ prob.f
    best_grid = np.min(values[feasible])
    assert sol.objective <= best_grid + 1e-12
    assert best_grid - sol.objective < 0.1
    print("✓ Grid search never beats the solver")


def test_box_grid_oracle():
    """Seeded 2-D problems on a box: the solver is never beaten by the grid and sits near its best point."""
    print("Testing box-constrained problems against a grid...")

    rng = np.random.default_rng(77)
    axis = np.linspace(-2.0, 2.0, 201)
    zx, zy = np.meshgrid(axis, axis)
    points = np.column_stack([zx.ravel(), zy.ravel()])
    spacing = (axis[1] - axis[0]) / 2.0 * np.sqrt(2.0)
    box = np.vstack([np.eye(2), -np.eye(2)])
    for trial in range(50):
        root = rng.standard_normal((2, 2))
        h = root @ root.T + 0.5 * np.eye(2)
        f = 4.0 * rng.standard_normal(2)
        prob = QpProblem(h, f, box, np.full(4, 2.0))
        sol = qp_solve(prob)
        assert sol.optimal, f"trial {trial}: {sol.status}"
        assert np.max(np.abs(sol.z)) <= 2.0 + 1e-12

        values = 0.5 * np.einsum('ij,jk,ik->i', points, h, points) + points @ f
        best_grid = np.min(values)
        # The nearest grid point is within half a cell diagonal of z*
        slack = np.linalg.norm(h @ sol.z + f) * spacing + 0.5 * np.linalg.eigvalsh(h).max() * spacing ** 2
        assert sol.objective <= best_grid + 1e-9, f"trial {trial}: grid beats solver"
        assert best_grid - sol.objective <= slack + 1e-9, f"trial {trial}: solver far above grid"
    print("✓ 50 box problems agree with the grid")


def test_inactive_rows_irrelevant():
    """Dropping a row that is not active leaves the minimizer unchanged."""
    print("Testing removal of inactive constraints...")

    rng = np.random.default_rng(41)
    dropped = 0
    for trial in range(30):
        m = 2 + trial % 3
        prob = random_problem(rng, m, 2 * m + 1)
        sol = qp_solve(prob)
        assert sol.optimal
        slack = prob.rhs - prob.g @ sol.z
        for row in range(prob.p):
            if row in sol.active_set or slack[row] <= 1e-6:
                continue
            keep = [i for i in range(prob.p) if i != row]
            reduced = qp_solve(QpProblem(prob.h, prob.f, prob.g[keep], prob.rhs[keep]))
            assert reduced.optimal
            assert np.max(np.abs(reduced.z - sol.z)) <= 1e-9 * max(1.0, np.max(np.abs(sol.z)))
            dropped += 1
    assert dropped > 0
    print(f"✓ {dropped} inactive rows dropped without moving z*")


def test_warm_start():
    """A correct warm start is accepted; a wrong one falls back to phase 1."""
    print("Testing warm start...")

    rng = np.random.default_rng(9)
    prob = random_problem(rng, 3, 7)
    cold = qp_solve(prob)
    assert cold.optimal

    warm = qp_solve(prob, warm_start=cold.active_set)
    assert warm.optimal
    if cold.active_set:
        assert warm.warm_started
        assert warm.phase1_iterations == 0
        assert warm.iterations <= cold.iterations
    assert np.max(np.abs(warm.z - cold.z)) <= 1e-9 * max(1.0, np.max(np.abs(cold.z)))

    boxed = QpProblem(np.eye(2), [-2.0, -2.0], [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]], [1.0, 1.0, 5.0])
    # Holding row 2 at equality puts z[0] = -5, which is optimal for nothing
    fallback = qp_solve(boxed, warm_start=[2, 9])
    assert fallback.optimal
    assert np.allclose(fallback.z, [1.0, 1.0], atol=1e-12)
    print("✓ Warm start")


def test_validation():
    """Malformed problems are rejected."""
    print("Testing problem validation...")

    try:
        QpProblem(np.eye(2), [1.0, 2.0, 3.0], [[1.0, 0.0]], [1.0])
        assert False, "linear term length mismatch should be rejected"
    except DimensionMismatch:
        pass

    try:
        QpProblem(np.eye(2), [0.0, 0.0], [[0.0, 0.0]], [1.0])
        assert False, "zero row should be rejected"
    except ValueError:
        pass

    prob = QpProblem(np.eye(2), [0.0, 1.0], [[1.0, 1.0]], [2.0], labels=("u:0:max",))
    assert prob.labels == ("u:0:max",)
    assert "rhs = [2.0]" in prob.dump()
    assert QpProblem(np.eye(2), [0.0, 1.0], [[1.0, 1.0]], [2.0]).labels == ("row0",)
    print("✓ Problem validation")


if __name__ == "__main__":
    test_simple_problems()
    test_infeasible_problems()
    test_against_enumeration()
    test_against_grid()
    test_box_grid_oracle()
    test_inactive_rows_irrelevant()
    test_warm_start()
    test_validation()
    print("\n✓ QP solver tests completed")
