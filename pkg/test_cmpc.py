#!/usr/bin/env python3
"""
Test script for the constrained deadbeat MPC.
"""
import sys
from pathlib import Path

# Add project root to Python path
sys.path.insert(0, str(Path(__file__).parent))

import numpy as np

from src.control.cmpc import (
    ConstrainedMpc, _shift_label, bisect_terminal_halfwidth, design_constrained_mpc,
    perturbed_solution_residual, verify_terminal_set
)
from src.control.deadbeat import WeightSpec, deadbeat_gain
from src.error_handling.exceptions import PreconditionViolation, TerminalSetUnverifiable
from src.linalg.matrix import max_norm
from src.plant.catalog import BENCHMARK_STABILIZING_GAIN, benchmark_plant
from src.plant.lti import ConstraintSpec, step
from src.verification.property_suite import qp_feasible_at, saturating_initial_state


X0 = np.array([0.15, 0.075, -0.075])


def benchmark_mpc(stabilizing_gain=None, spec=None) -> ConstrainedMpc:
    plant = benchmark_plant()
    spec = spec or ConstraintSpec.input_only(3, -6.0, 6.0)
    return design_constrained_mpc(plant, spec, WeightSpec.scaled_identity(3), stabilizing_gain, auto_bisect=True)


def closed_loop(mpc: ConstrainedMpc, x0, steps: int):
    results = []
    x = np.array(x0, dtype=np.float64)
    for _ in range(steps):
        result = mpc.controller_step(x)
        assert result.feasible, f"infeasible at x={x.tolist()}: {result.diagnostics}"
        results.append(result)
        x = step(mpc.sys, x, result.u_applied)
    return results, x


def test_terminal_set_certificate():
    """Vertex certificate and bisection of the terminal box."""
    print("Testing terminal set certificate...")

    plant = benchmark_plant()
    gain = deadbeat_gain(plant)
    spec = ConstraintSpec.input_only(3, -6.0, 6.0)

    certificate = verify_terminal_set(plant, spec, gain)
    assert certificate.vertex_count == 8
    assert not certificate.certified
    assert any(v.condition == "input" for v in certificate.gating_violations)

    small = verify_terminal_set(plant, spec.with_terminal_halfwidth([0.05, 0.05, 0.05]), gain)
    assert small.certified

    # Input-only: the binding vertex gives |K_db|·δ = 6
    halfwidth, certificate = bisect_terminal_halfwidth(plant, spec, gain)
    expected = 6.0 / np.sum(np.abs(gain.k_db))
    assert certificate.certified
    assert np.max(np.abs(halfwidth - expected)) <= 1e-9 * expected
    assert not verify_terminal_set(plant, spec.with_terminal_halfwidth(halfwidth * 1.001), gain).certified

    try:
        ConstrainedMpc(plant, spec, np.eye(3), gain=gain)
        assert False, "the unit box violates the input bound"
    except TerminalSetUnverifiable as e:
        assert e.violations
    print(f"✓ Terminal box halfwidth {expected:.6f}")


def test_assemble_qp():
    """Row labels, dropped rows and constant violations."""
    print("Testing QP assembly...")

    mpc = benchmark_mpc()
    prob = mpc.assemble_qp(X0)
    u_labels = [label for label in prob.labels if label.startswith("u:")]
    assert u_labels == ["u:0:max", "u:0:min", "u:1:max", "u:1:min", "u:2:max", "u:2:min"]
    # Orbit rows of A_db^j·S can vanish for j > 0; the j = 0 rows never do
    assert 12 <= prob.p <= 6 + 6 * len(mpc.terminal_orbit)
    assert sum(label.startswith("f:0:") for label in prob.labels) == 6
    assert not any(label.startswith("x:") for label in prob.labels)
    assert np.allclose(prob.h, prob.h.T)

    boxed = benchmark_mpc(spec=ConstraintSpec.state_box([5.0, 5.0, 5.0], -6.0, 6.0))
    prob = boxed.assemble_qp(X0)
    # x1(1|k) does not depend on u(0|k), so its rows are dropped at stage 1
    assert "x:1:0" not in prob.labels and "x:1:3" not in prob.labels
    assert "x:1:1" in prob.labels
    assert "x:2:0" in prob.labels

    far = boxed.assemble_qp(np.array([10.0, 0.0, 0.0]))
    assert "x:1:0" in far.constant_violations
    result = boxed.controller_step(np.array([10.0, 0.0, 0.0]))
    assert not result.feasible
    assert "x:1:0" in result.diagnostics
    print("✓ QP assembly")


def test_controller_step():
    """One receding-horizon step from a feasible state."""
    print("Testing controller step...")

    mpc = benchmark_mpc()
    assert qp_feasible_at(mpc, X0)
    result = mpc.controller_step(X0)
    assert result.feasible
    assert -6.0 - 1e-9 <= result.u_applied <= 6.0 + 1e-9
    assert np.all(np.abs(result.u_sequence) <= 6.0 + 1e-9)
    assert result.decomposition_residual <= 1e-7 * max(1.0, max_norm(X0))
    assert mpc.in_terminal_set(result.terminal_state)
    assert abs(result.objective - result.terminal_state @ mpc.p @ result.terminal_state) < 1e-12
    expected_u = -mpc.gain.k_db @ X0 + mpc.gain.s_inv_first_row @ result.terminal_state
    assert abs(result.u_applied - expected_u) <= 1e-7
    print("✓ Controller step")


def test_recursive_feasibility_and_cost_decrease():
    """Shifted candidates stay feasible and J* does not increase with P from K_db."""
    print("Testing recursive feasibility and cost decrease...")

    mpc = benchmark_mpc()
    assert mpc.gain_is_deadbeat
    rng = np.random.default_rng(4)
    starts = [X0] + [saturating_initial_state(mpc, rng) for _ in range(5)]
    for x0 in starts:
        assert x0 is not None
        mpc.reset()
        results, x_final = closed_loop(mpc, x0, 25)
        for prev, nxt in zip(results, results[1:]):
            candidate = mpc.verify_candidate(prev)
            assert candidate.feasible
            assert max_norm(candidate.x_next - nxt.x) == 0.0
            report = mpc.cost_decrease_check(prev, nxt)
            assert report.asserted
            assert not report.violated, f"J* increased by {report.delta:.3e}"
            assert report.delta <= report.candidate_bound + report.tolerance
        assert max_norm(x_final) <= 1e-6 * max_norm(x0)

    try:
        mpc.cost_decrease_check(results[0], results[2])
        assert False, "non-consecutive steps should be rejected"
    except PreconditionViolation:
        pass
    print("✓ Recursive feasibility and cost decrease")


def test_saturating_start():
    """From a state where deadbeat would saturate, inputs stay in bounds and the loop converges."""
    print("Testing saturating initial state...")

    mpc = benchmark_mpc()
    x0 = saturating_initial_state(mpc, np.random.default_rng(21))
    assert x0 is not None
    assert abs(mpc.gain.k_db @ x0) > 6.0
    results, x_final = closed_loop(mpc, x0, 30)
    # The unconstrained optimum is infeasible, so the first QP has active rows
    assert results[0].active_set
    assert all(abs(r.u_applied) <= 6.0 + 1e-9 for r in results)
    assert max_norm(x_final) <= 1e-6 * max_norm(x0)
    print("✓ Saturating start converges within bounds")


def test_perturbed_solution_identity():
    """x(k) is rebuilt from the last n optimal terminal states."""
    print("Testing perturbed solution identity...")

    mpc = benchmark_mpc()
    x0 = saturating_initial_state(mpc, np.random.default_rng(8))
    results, x_final = closed_loop(mpc, x0, 12)
    states = [r.x for r in results] + [x_final]
    terminal = [r.terminal_state for r in results]
    for k in range(3, len(terminal) + 1):
        assert perturbed_solution_residual(mpc.sys, mpc.gain, states, terminal, k) <= 1e-9

    try:
        perturbed_solution_residual(mpc.sys, mpc.gain, states, terminal, 2)
        assert False, "k < n should be rejected"
    except PreconditionViolation:
        pass
    print("✓ Perturbed solution identity")


def test_published_stabilizing_gain():
    """With K != K_db the decrease is only reported."""
    print("Testing published stabilizing gain...")

    mpc = benchmark_mpc(stabilizing_gain=np.array(BENCHMARK_STABILIZING_GAIN))
    assert not mpc.gain_is_deadbeat
    results, _ = closed_loop(mpc, X0, 10)
    report = mpc.cost_decrease_check(results[0], results[1])
    assert not report.asserted
    assert not report.violated
    print("✓ Published stabilizing gain")


def test_warm_start_labels():
    """Labels shift one stage forward and drop at the horizon start."""
    print("Testing warm start labels...")

    assert _shift_label("x:1:0") is None
    assert _shift_label("x:3:2") == "x:2:2"
    assert _shift_label("u:0:max") is None
    assert _shift_label("u:2:min") == "u:1:min"
    assert _shift_label("f:0:1+") is None
    assert _shift_label("f:2:0-") == "f:1:0-"
    assert _shift_label("row4") is None

    mpc = benchmark_mpc()
    fresh = mpc.fresh()
    assert fresh is not mpc
    assert fresh.warm is None
    assert fresh.certificate is mpc.certificate
    print("✓ Warm start labels")


if __name__ == "__main__":
    test_terminal_set_certificate()
    test_assemble_qp()
    test_controller_step()
    test_recursive_feasibility_and_cost_decrease()
    test_saturating_start()
    test_perturbed_solution_identity()
    test_published_stabilizing_gain()
    test_warm_start_labels()
    print("\n✓ Constrained MPC tests completed")
