"""
Scenario models, scenario loading and logging setup.
"""

from .config_manager import ScenarioManager, create_cli_parser
from .logging_setup import LoggingSetup, resolve_log_level
from .models import ControllerKind, LoggingConfig, Scenario
