"""
Scenario manager for loading and validating scenario files.
"""
import argparse
import logging
import math
import os
from dataclasses import asdict, fields
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from .. import __version__
from ..error_handling.exceptions import ScenarioError
from ..linalg.matrix import is_positive_definite
from .models import (
    AUTO_BISECT, DEADBEAT_GAIN, TERMINAL_WEIGHT_KEYWORDS, ConstraintsConfig, ControllerConfig,
    ControllerKind, LoggingConfig, OutputConfig, PlantConfig, ReferenceConfig, Scenario,
    SimulationConfig, StateConstraintConfig, VerifyConfig, WeightsConfig
)


LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']

_SECTIONS = {
    'plant': PlantConfig,
    'weights': WeightsConfig,
    'controller': ControllerConfig,
    'constraints': ConstraintsConfig,
    'simulation': SimulationConfig,
    'verify': VerifyConfig,
    'output': OutputConfig,
    'reference': ReferenceConfig,
    'logging': LoggingConfig,
}


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _is_integer(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


class ScenarioManager:
    """Loads scenario files and reports every validation problem with its YAML line."""

    def __init__(self):
        self.logger = logging.getLogger(__name__)
        self._scenario: Optional[Scenario] = None
        self._lines: Dict[str, int] = {}
        self._path: Optional[str] = None

    def load_scenario(self, scenario_path: str, cli_args: Optional[Dict[str, Any]] = None) -> Scenario:
        """
        Load a scenario from a YAML file and apply CLI overrides.

        Args:
            scenario_path: Path to the scenario file
            cli_args: Dictionary of CLI arguments to override scenario values

        Returns:
            Scenario: Loaded and validated scenario

        Raises:
            ScenarioError: the file is missing, unreadable or invalid
        """
        if not os.path.exists(scenario_path):
            raise ScenarioError([f"scenario file not found: {scenario_path}"], scenario_path)
        try:
            with open(scenario_path, 'r', encoding='utf-8') as f:
                text = f.read()
        except OSError as e:
            raise ScenarioError([f"cannot read scenario file: {e}"], scenario_path)
        scenario = self.load_scenario_text(text, cli_args, source=scenario_path)
        self.logger.info(f"Loaded scenario '{scenario.name}' from {scenario_path}")
        return scenario

    def load_scenario_text(self, text: str, cli_args: Optional[Dict[str, Any]] = None,
                           source: Optional[str] = None) -> Scenario:
        """Same as load_scenario for a YAML document held in memory."""
        self._path = source
        file_config = self._parse_yaml(text)

        config_dict = self._merge_configs(self._get_default_config(), file_config)
        if cli_args:
            config_dict = self._apply_cli_overrides(config_dict, cli_args)

        self._scenario = self._create_scenario_object(config_dict)
        self._validate_scenario(self._scenario)
        return self._scenario

    def _get_default_config(self) -> Dict[str, Any]:
        """Get default scenario as dictionary."""
        return asdict(Scenario())

    def _parse_yaml(self, text: str) -> Dict[str, Any]:
        """Parse the document and record the line of every mapping key and list item."""
        try:
            root = yaml.compose(text, Loader=yaml.SafeLoader)
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, 'problem_mark', None)
            where = f" (line {mark.line + 1})" if mark is not None else ""
            raise ScenarioError([f"YAML syntax error{where}: {getattr(e, 'problem', e)}"], self._path)

        self._lines = {}
        if root is not None:
            self._record_lines(root, "")
        if data is None:
            return {}
        if not isinstance(data, dict):
            raise ScenarioError(["scenario must be a mapping of sections"], self._path)
        return data

    def _record_lines(self, node: yaml.Node, prefix: str):
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
                self._lines[path] = key_node.start_mark.line + 1
                self._record_lines(value_node, path)
        elif isinstance(node, yaml.SequenceNode):
            for index, item in enumerate(node.value):
                path = f"{prefix}[{index}]"
                self._lines[path] = item.start_mark.line + 1
                self._record_lines(item, path)

    def _where(self, path: str) -> str:
        """Field path with the closest recorded YAML line."""
        key = path
        while key:
            if key in self._lines:
                return f"{path} (line {self._lines[key]})"
            cut = max(key.rfind('.'), key.rfind('['))
            key = key[:cut] if cut > 0 else ""
        return path

    def _merge_configs(self, base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
        """Recursively merge configuration dictionaries."""
        result = base.copy()

        for key, value in override.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._merge_configs(result[key], value)
            else:
                result[key] = value

        return result

    def _apply_cli_overrides(self, config: Dict[str, Any], cli_args: Dict[str, Any]) -> Dict[str, Any]:
        """Apply CLI argument overrides to the scenario."""
        result = {key: dict(value) if isinstance(value, dict) else value for key, value in config.items()}

        cli_mappings = {
            'out': ('output', 'directory'),
            'seed': ('simulation', 'seed'),
            'log_level': ('logging', 'level'),
        }

        for cli_key, (section, key) in cli_mappings.items():
            if cli_args.get(cli_key) is not None:
                result.setdefault(section, {})[key] = cli_args[cli_key]

        return result

    def _create_scenario_object(self, config_dict: Dict[str, Any]) -> Scenario:
        """Create the Scenario object, rejecting unknown sections and fields."""
        errors: List[str] = []
        known_top = set(_SECTIONS) | {'name'}
        for key in config_dict:
            if key not in known_top:
                errors.append(f"{self._where(key)}: unknown section")

        sections: Dict[str, Any] = {}
        for section, model in _SECTIONS.items():
            values = config_dict.get(section) or {}
            if not isinstance(values, dict):
                errors.append(f"{self._where(section)}: must be a mapping")
                values = {}
            sections[section] = self._build(model, values, section, errors)

        if errors:
            self.logger.error("Scenario validation errors: " + "; ".join(errors))
            raise ScenarioError(errors, self._path)

        return Scenario(name=str(config_dict.get('name', 'scenario')), **sections)

    def _build(self, model, values: Dict[str, Any], path: str, errors: List[str]):
        allowed = {f.name for f in fields(model)}
        for key in values:
            if key not in allowed:
                errors.append(f"{self._where(f'{path}.{key}')}: unknown field")
        kwargs = {key: value for key, value in values.items() if key in allowed}
        if model is ConstraintsConfig:
            state = kwargs.get('state') or {}
            if not isinstance(state, dict):
                errors.append(f"{self._where(f'{path}.state')}: must be a mapping")
                state = {}
            kwargs['state'] = self._build(StateConstraintConfig, state, f"{path}.state", errors)
        return model(**kwargs)

    # ------------------------------------------------------------------
    # Field checks
    # ------------------------------------------------------------------

    def _matrix(self, value: Any, path: str, errors: List[str],
                rows: Optional[int] = None, cols: Optional[int] = None) -> Optional[np.ndarray]:
        if not isinstance(value, list) or not all(isinstance(row, list) for row in value):
            errors.append(f"{self._where(path)}: must be a list of rows")
            return None
        width = cols if cols is not None else (len(value[0]) if value else 0)
        ok = True
        for i, row in enumerate(value):
            if len(row) != width:
                errors.append(f"{self._where(f'{path}[{i}]')}: row {i + 1} has {len(row)} entries, expected {width}")
                ok = False
            elif not all(_is_number(entry) for entry in row):
                errors.append(f"{self._where(f'{path}[{i}]')}: row {i + 1} must contain finite numbers")
                ok = False
        if rows is not None and len(value) != rows:
            errors.append(f"{self._where(path)}: has {len(value)} rows, expected {rows}")
            ok = False
        return np.array(value, dtype=np.float64).reshape(len(value), width) if ok else None

    def _vector(self, value: Any, path: str, errors: List[str], length: Optional[int] = None) -> Optional[np.ndarray]:
        if not isinstance(value, list) or not all(_is_number(entry) for entry in value):
            errors.append(f"{self._where(path)}: must be a list of finite numbers")
            return None
        if length is not None and len(value) != length:
            errors.append(f"{self._where(path)}: has {len(value)} entries, expected {length}")
            return None
        return np.array(value, dtype=np.float64)

    def _validate_scenario(self, scenario: Scenario) -> None:
        """Validate scenario values."""
        errors: List[str] = []

        # Plant
        n = 0
        if scenario.plant.a is None:
            errors.append(f"{self._where('plant.a')}: required")
        else:
            a = self._matrix(scenario.plant.a, 'plant.a', errors)
            if a is not None:
                if a.shape[0] == 0 or a.shape[0] != a.shape[1]:
                    errors.append(f"{self._where('plant.a')}: must be square and non-empty, got {a.shape[0]}x{a.shape[1]}")
                else:
                    n = a.shape[0]
        if scenario.plant.b is None:
            errors.append(f"{self._where('plant.b')}: required")
        elif n:
            self._vector(scenario.plant.b, 'plant.b', errors, n)

        # Weights
        q = scenario.weights.q
        if _is_number(q):
            if q <= 0:
                errors.append(f"{self._where('weights.q')}: scalar weight must be > 0")
        elif n:
            q_mat = self._matrix(q, 'weights.q', errors, n, n)
            if q_mat is not None and not is_positive_definite(q_mat):
                errors.append(f"{self._where('weights.q')}: must be symmetric positive definite")
        if not _is_number(scenario.weights.r) or scenario.weights.r <= 0:
            errors.append(f"{self._where('weights.r')}: must be a number > 0")

        # Controller
        kinds = [kind.value for kind in ControllerKind]
        if scenario.controller.kind not in kinds:
            errors.append(f"{self._where('controller.kind')}: must be one of: {', '.join(kinds)}")
        gain = scenario.controller.stabilizing_gain
        if gain != DEADBEAT_GAIN and n:
            self._vector(gain, 'controller.stabilizing_gain', errors, n)
        weight = scenario.controller.terminal_weight
        if weight not in TERMINAL_WEIGHT_KEYWORDS and n:
            p_mat = self._matrix(weight, 'controller.terminal_weight', errors, n, n)
            if p_mat is not None and not is_positive_definite(p_mat):
                errors.append(f"{self._where('controller.terminal_weight')}: must be symmetric positive definite")

        # Constraints
        constraints = scenario.constraints
        if n and constraints.state.h:
            h = self._matrix(constraints.state.h, 'constraints.state.h', errors, cols=n)
            rhs = self._vector(constraints.state.rhs, 'constraints.state.rhs', errors,
                               len(constraints.state.h))
            if h is not None and rhs is not None and np.any(rhs <= 0):
                errors.append(f"{self._where('constraints.state.rhs')}: entries must be > 0 so the origin is interior")
        elif constraints.state.rhs:
            errors.append(f"{self._where('constraints.state.rhs')}: given without constraints.state.h")
        if not (_is_number(constraints.u_min) and _is_number(constraints.u_max)):
            errors.append(f"{self._where('constraints')}: u_min and u_max must be finite numbers")
        elif not constraints.u_min < 0 < constraints.u_max:
            errors.append(f"{self._where('constraints.u_min')}: need u_min < 0 < u_max")
        if constraints.terminal_halfwidth != AUTO_BISECT and n:
            halfwidth = self._vector(constraints.terminal_halfwidth, 'constraints.terminal_halfwidth', errors, n)
            if halfwidth is not None and np.any(halfwidth <= 0):
                errors.append(f"{self._where('constraints.terminal_halfwidth')}: entries must be > 0")

        # Simulation
        simulation = scenario.simulation
        if simulation.x0 is not None and n:
            self._vector(simulation.x0, 'simulation.x0', errors, n)
        if not _is_integer(simulation.steps) or simulation.steps < 1:
            errors.append(f"{self._where('simulation.steps')}: must be an integer >= 1")
        if not _is_integer(simulation.seed) or simulation.seed < 0:
            errors.append(f"{self._where('simulation.seed')}: must be an integer >= 0")
        if not _is_number(simulation.settle_tolerance) or simulation.settle_tolerance <= 0:
            errors.append(f"{self._where('simulation.settle_tolerance')}: must be > 0")

        # Verify
        verify = scenario.verify
        for key in ('random_systems', 'random_runs'):
            value = getattr(verify, key)
            if not _is_integer(value) or value < 0:
                errors.append(f"{self._where(f'verify.{key}')}: must be an integer >= 0")
        if not _is_integer(verify.max_dimension) or not 1 <= verify.max_dimension <= 8:
            errors.append(f"{self._where('verify.max_dimension')}: must be an integer in 1..8")
        for key in ('steps', 'workers'):
            value = getattr(verify, key)
            if not _is_integer(value) or value < 1:
                errors.append(f"{self._where(f'verify.{key}')}: must be an integer >= 1")

        # Reference values
        if scenario.reference.deadbeat_gain is not None and n:
            self._vector(scenario.reference.deadbeat_gain, 'reference.deadbeat_gain', errors, n)
        if scenario.reference.terminal_weight is not None and n:
            self._matrix(scenario.reference.terminal_weight, 'reference.terminal_weight', errors, n, n)
        if not _is_number(scenario.reference.tolerance) or scenario.reference.tolerance <= 0:
            errors.append(f"{self._where('reference.tolerance')}: must be > 0")

        # Logging
        if str(scenario.logging.level).upper() not in LOG_LEVELS:
            errors.append(f"{self._where('logging.level')}: must be one of: {', '.join(LOG_LEVELS)}")
        size = scenario.logging.max_file_size_mb
        if not _is_number(size) or size <= 0:
            errors.append(f"{self._where('logging.max_file_size_mb')}: must be > 0")
        backups = scenario.logging.backup_count
        if not _is_integer(backups) or backups < 0:
            errors.append(f"{self._where('logging.backup_count')}: must be an integer >= 0")

        if errors:
            self.logger.error("Scenario validation errors: " + "; ".join(errors))
            raise ScenarioError(errors, self._path)

    @property
    def scenario(self) -> Optional[Scenario]:
        """Get the current scenario."""
        return self._scenario


def create_cli_parser() -> argparse.ArgumentParser:
    """Create command line argument parser."""
    parser = argparse.ArgumentParser(
        prog="deadbeat-mpc",
        description="Deadbeat MPC design, closed-loop simulation and property verification"
    )

    parser.add_argument(
        '--version',
        action='version',
        version=f"%(prog)s {__version__}"
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        'scenario',
        type=str,
        help='Path to scenario file (YAML)'
    )
    common.add_argument(
        '--out',
        type=str,
        help='Output directory (overrides output.directory)'
    )
    common.add_argument(
        '--log-level',
        choices=LOG_LEVELS,
        help='Logging level (overrides DEADBEAT_MPC_LOG and the scenario)'
    )

    commands = parser.add_subparsers(dest='command', required=True, metavar='{design,simulate,verify}')
    commands.add_parser('design', parents=[common],
                        help='Compute K_db, the terminal weight and the terminal-set certificate')
    commands.add_parser('simulate', parents=[common],
                        help='Run the closed loop and write the trajectory CSV and SVG plot')
    verify = commands.add_parser('verify', parents=[common],
                                 help='Run the property suite and report pass/fail per property')
    verify.add_argument(
        '--seed',
        type=int,
        help='Random seed for the property runs (overrides simulation.seed)'
    )

    return parser
