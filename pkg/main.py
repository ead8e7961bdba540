#!/usr/bin/env python3
"""
Main entry point for the deadbeat MPC toolkit.
"""
import sys
import logging
from pathlib import Path

# Add the project root to the Python path
sys.path.insert(0, str(Path(__file__).parent))

from src.cli.commands import COMMANDS
from src.config.config_manager import ScenarioManager, create_cli_parser
from src.config.logging_setup import LoggingSetup
from src.error_handling.error_handler import error_handler
from src.error_handling.exceptions import DeadbeatMpcError, ScenarioError
from src.system.dependency_validator import DependencyValidator


def main(argv=None):
    """Main application entry point with error-to-exit-code mapping."""
    parser = create_cli_parser()
    args = parser.parse_args(argv)

    # Validate dependencies first (before logging setup)
    dependency_validator = DependencyValidator()
    dep_result = dependency_validator.validate_dependencies()
    if not dep_result['all_available']:
        print("CRITICAL ERROR: Required dependencies are missing!", file=sys.stderr)
        for instruction in dep_result['installation_instructions']:
            if instruction.strip():
                print(instruction, file=sys.stderr)
        return 1

    # Preliminary logging until the scenario's logging section is known
    logging.basicConfig(level=logging.WARNING, format='%(levelname)s - %(name)s - %(message)s')

    cli_args = {
        'out': args.out,
        'seed': getattr(args, 'seed', None),
        'log_level': args.log_level,
    }

    try:
        scenario = ScenarioManager().load_scenario(args.scenario, cli_args)
    except ScenarioError as e:
        print(f"Scenario error: {args.scenario}", file=sys.stderr)
        for problem in e.errors:
            print(f"  {problem}", file=sys.stderr)
        return error_handler.handle_exception(e, {'command': args.command})

    try:
        LoggingSetup.setup_logging(scenario.logging, args.log_level)
    except Exception as e:
        print(f"Logging setup error: {e}", file=sys.stderr)
        logging.basicConfig(level=logging.INFO)
    logger = logging.getLogger(__name__)

    dependency_validator.log_dependency_status(dep_result)
    logger.info(f"Running '{args.command}' for scenario '{scenario.name}'")

    try:
        return COMMANDS[args.command](scenario)
    except ScenarioError as e:
        for problem in e.errors:
            print(f"  {problem}", file=sys.stderr)
        return error_handler.handle_exception(e, {'command': args.command})
    except DeadbeatMpcError as e:
        print(f"Error: {e.message}", file=sys.stderr)
        return error_handler.handle_exception(e, {'command': args.command, 'scenario': scenario.name})
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return 1
    except Exception as e:
        logger.critical(f"Unhandled application error: {e}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
