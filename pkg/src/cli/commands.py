"""
Command implementations: design, simulate and verify.

Each command takes a validated Scenario and returns the process exit code;
design-stage failures propagate as exceptions and are mapped to exit codes
by the error handler in main.py.
"""
import json
import logging
from pathlib import Path

import numpy as np

from ..config.models import ControllerKind, Scenario
from ..error_handling.error_handler import handle_infeasibility
from ..error_handling.exceptions import ControllerInfeasible, OutputError, ScenarioError
from ..reporting.design_report import write_design_report
from ..reporting.svg_plot import write_trajectory_svg
from ..reporting.trajectory_csv import write_trajectory_csv
from ..simulation.simkit import run_closed_loop
from ..verification.property_suite import PropertyStatus, PropertySuite
from .pipeline import build_controller, design_scenario


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PROPERTY_FAILURE = 3


def _output_path(scenario: Scenario, name: str) -> Path:
    return Path(scenario.output.directory) / name


def cmd_design(scenario: Scenario) -> int:
    """Print the design report and save it next to the other outputs."""
    result = design_scenario(scenario)
    text = result.report.render()
    print(text, end="")
    write_design_report(result.report, _output_path(scenario, scenario.output.report))
    return EXIT_OK


def cmd_simulate(scenario: Scenario) -> int:
    """
    Design, run the closed loop from simulation.x0 and write CSV and SVG.

    Returns:
        int: 0, or 2 when the controller became infeasible (partial files are still written)
    """
    if scenario.simulation.x0 is None:
        raise ScenarioError(["simulation.x0: required for simulate"])
    result = design_scenario(scenario)
    controller = build_controller(result)
    constrained = scenario.kind == ControllerKind.CONSTRAINED

    trajectory = run_closed_loop(
        result.sys, controller, np.asarray(scenario.simulation.x0, dtype=np.float64),
        scenario.simulation.steps,
        spec=result.spec if constrained else None,
        settle_tolerance=scenario.simulation.settle_tolerance,
    )

    csv_path = write_trajectory_csv(trajectory, _output_path(scenario, scenario.output.csv))
    u_bounds = (result.spec.u_min, result.spec.u_max) if constrained else None
    svg_path = write_trajectory_svg(trajectory, _output_path(scenario, scenario.output.svg), u_bounds,
                                   title=scenario.name)

    print(f"Scenario: {scenario.name} ({scenario.kind.value})")
    print(f"Steps simulated: {len(trajectory.steps) - 1}")
    print(f"Settled at: {trajectory.settled_at if trajectory.settled_at is not None else 'not settled'}")
    if constrained:
        print(f"Constraint violations: {trajectory.constraint_violations}")
    print(f"Trajectory CSV: {csv_path}")
    print(f"Plot: {svg_path}")

    if not trajectory.completed:
        handle_infeasibility(f"controller infeasible at k={trajectory.failed_at}: {trajectory.failure}",
                             {'scenario': scenario.name})
        print(f"Run halted at k={trajectory.failed_at}: {trajectory.failure}")
        return ControllerInfeasible.exit_code
    return EXIT_OK


def cmd_verify(scenario: Scenario) -> int:
    """
    Run the property suite, print one line per property and save a JSON report.

    Returns:
        int: 0 when no property fails, 3 otherwise
    """
    result = design_scenario(scenario)
    suite = PropertySuite(result, scenario.simulation.seed, scenario.verify)
    results = suite.run()

    for item in results:
        print(f"{item.name}: {item.status.value.upper()} - {item.detail}")
    failed = [item.name for item in results if item.status == PropertyStatus.FAIL]

    report = {
        'scenario': scenario.name,
        'seed': scenario.simulation.seed,
        'passed': not failed,
        'properties': [item.to_dict() for item in results],
    }
    path = _output_path(scenario, scenario.output.verify_report)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding='utf-8')
    except OSError as e:
        raise OutputError(f"cannot write verify report ({e.strerror})", str(path))

    if failed:
        logger.error(f"Properties failed: {', '.join(failed)}")
        return EXIT_PROPERTY_FAILURE
    return EXIT_OK


COMMANDS = {
    'design': cmd_design,
    'simulate': cmd_simulate,
    'verify': cmd_verify,
}
