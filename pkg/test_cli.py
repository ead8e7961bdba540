#!/usr/bin/env python3
"""
Test script for the design / simulate / verify commands end to end.
"""
import json
import sys
import tempfile
from pathlib import Path

import numpy as np

# Add project root to Python path
sys.path.insert(0, str(Path(__file__).parent))

import main as app
from src.reporting.trajectory_csv import read_trajectory_csv


SCENARIO_DIR = Path(__file__).parent / "scenarios"

BENCHMARK_PLANT = """\
plant:
  a:
    - [1.1, 2.0, 0.0]
    - [0.0, 0.95, 1.0]
    - [0.0, 0.0, 1.2]
  b: [0.0, 0.079, 0.1]
"""


def write_scenario(directory: str, name: str, text: str) -> str:
    path = Path(directory) / f"{name}.yaml"
    path.write_text(text, encoding='utf-8')
    return str(path)


def test_design_command():
    """design prints and saves the report."""
    print("Testing design command...")

    with tempfile.TemporaryDirectory() as temp_dir:
        code = app.main(["design", str(SCENARIO_DIR / "benchmark_constrained.yaml"), "--out", temp_dir])
        assert code == 0, f"design exited with {code}"
        report = (Path(temp_dir) / "design_report.txt").read_text(encoding='utf-8')
        assert "Deadbeat gain K_db" in report
        assert "Nilpotency index of A - B*K_db: 3" in report
        assert "Vertex certificate: PASSED" in report
        assert "Reference K_db deviation" in report and "(OK)" in report
    print("✓ Design command")


def test_simulate_unconstrained():
    """simulate writes a trajectory that reaches the origin after n steps."""
    print("Testing unconstrained simulate...")

    with tempfile.TemporaryDirectory() as temp_dir:
        code = app.main(["simulate", str(SCENARIO_DIR / "benchmark_unconstrained.yaml"), "--out", temp_dir])
        assert code == 0, f"simulate exited with {code}"
        table = read_trajectory_csv(Path(temp_dir) / "trajectory.csv")
        assert len(table.k) == 11
        assert np.max(np.abs(table.states[3:])) < 1e-8
        assert (Path(temp_dir) / "trajectory.svg").exists()
    print("✓ Unconstrained simulate")


def test_simulate_constrained():
    """The constrained benchmark respects the input bound along the run."""
    print("Testing constrained simulate...")

    with tempfile.TemporaryDirectory() as temp_dir:
        code = app.main(["simulate", str(SCENARIO_DIR / "benchmark_constrained_deadbeat.yaml"),
                         "--out", temp_dir, "--log-level", "WARNING"])
        assert code == 0, f"simulate exited with {code}"
        table = read_trajectory_csv(Path(temp_dir) / "trajectory.csv")
        assert len(table.applied_controls) == 20
        assert np.all(np.abs(table.applied_controls) <= 6.0 + 1e-9)
        assert np.all(table.active_set_sizes[:-1] >= 0)
        # The deadbeat input at x0 leaves the bounds, so the first QP has active rows
        assert table.active_set_sizes[0] >= 1
        settled = next(k for k in range(len(table.k)) if np.max(np.abs(table.states[k:])) <= 1e-9 * 0.52)
        assert settled >= 3
        svg = (Path(temp_dir) / "trajectory.svg").read_text(encoding='utf-8')
        assert "stroke-dasharray" in svg
    print("✓ Constrained simulate")


def test_verify_command():
    """verify reports all fourteen properties and passes on the benchmark."""
    print("Testing verify command...")

    with tempfile.TemporaryDirectory() as temp_dir:
        path = write_scenario(temp_dir, "verify", BENCHMARK_PLANT + f"""\
controller:
  kind: constrained
  stabilizing_gain: deadbeat
constraints:
  u_min: -6.0
  u_max: 6.0
simulation:
  x0: [0.0, 0.0, 0.52]
  steps: 15
verify:
  random_systems: 4
  random_runs: 3
  max_dimension: 3
  steps: 15
  workers: 2
output:
  directory: {temp_dir}
""")
        code = app.main(["verify", path, "--seed", "5"])
        report = json.loads((Path(temp_dir) / "verify_report.json").read_text(encoding='utf-8'))
        assert report['seed'] == 5
        assert len(report['properties']) == 14
        assert [p['index'] for p in report['properties']] == list(range(14))
        failing = [p for p in report['properties'] if p['status'] == 'fail']
        assert code == 0 and report['passed'], f"failed properties: {failing}"
        names = {p['name']: p['status'] for p in report['properties']}
        assert names['recursive_feasibility'] == 'pass'
        assert names['deadbeat_in_n'] == 'pass'
    print("✓ Verify command")


def test_verify_unconstrained_skips():
    """Constrained-only properties are skipped for an unconstrained scenario."""
    print("Testing verify on an unconstrained scenario...")

    with tempfile.TemporaryDirectory() as temp_dir:
        path = write_scenario(temp_dir, "plain", BENCHMARK_PLANT + f"""\
verify:
  random_systems: 3
  random_runs: 2
  max_dimension: 3
output:
  directory: {temp_dir}
""")
        code = app.main(["verify", path])
        assert code == 0
        report = json.loads((Path(temp_dir) / "verify_report.json").read_text(encoding='utf-8'))
        statuses = {p['name']: p['status'] for p in report['properties']}
        assert statuses['recursive_feasibility'] == 'skip'
        assert statuses['cost_decrease'] == 'skip'
        assert statuses['nilpotency'] == 'pass'
    print("✓ Unconstrained verify")


def test_error_exit_codes():
    """Invalid scenarios and design errors exit with 1, infeasibility with 2."""
    print("Testing exit codes...")

    with tempfile.TemporaryDirectory() as temp_dir:
        invalid = write_scenario(temp_dir, "invalid", BENCHMARK_PLANT + "weights:\n  r: 0\n")
        assert app.main(["design", invalid, "--out", temp_dir]) == 1

        assert app.main(["design", str(Path(temp_dir) / "missing.yaml")]) == 1

        uncontrollable = write_scenario(temp_dir, "uncontrollable", """\
plant:
  a:
    - [1.0, 0.0]
    - [0.0, 2.0]
  b: [1.0, 0.0]
""")
        assert app.main(["design", uncontrollable, "--out", temp_dir]) == 1

        no_x0 = write_scenario(temp_dir, "no_x0", BENCHMARK_PLANT)
        assert app.main(["simulate", no_x0, "--out", temp_dir]) == 1

        infeasible = write_scenario(temp_dir, "infeasible", BENCHMARK_PLANT + """\
controller:
  kind: constrained
constraints:
  u_min: -0.001
  u_max: 0.001
simulation:
  x0: [1.0, 1.0, 1.0]
  steps: 5
""")
        out_dir = Path(temp_dir) / "infeasible_out"
        assert app.main(["simulate", infeasible, "--out", str(out_dir)]) == 2
        # Partial outputs still written
        assert (out_dir / "trajectory.csv").exists()
    print("✓ Exit codes")


if __name__ == "__main__":
    test_design_command()
    test_simulate_unconstrained()
    test_simulate_constrained()
    test_verify_command()
    test_verify_unconstrained_skips()
    test_error_exit_codes()
    print("\n✓ Command tests completed")
