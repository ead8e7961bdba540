"""
Logging setup with file rotation support.
"""
import logging
import logging.handlers
import os
from pathlib import Path
from typing import Optional

from .models import LoggingConfig


LOG_ENV_VAR = "DEADBEAT_MPC_LOG"
ENV_LEVELS = {
    'quiet': 'WARNING',
    'info': 'INFO',
    'debug': 'DEBUG',
}


def resolve_log_level(config_level: str, cli_level: Optional[str] = None) -> str:
    """
    Effective level: --log-level, then DEADBEAT_MPC_LOG, then the scenario.

    Unknown DEADBEAT_MPC_LOG values are ignored.
    """
    if cli_level:
        return cli_level.upper()
    env_value = os.environ.get(LOG_ENV_VAR, '').strip().lower()
    if env_value in ENV_LEVELS:
        return ENV_LEVELS[env_value]
    return str(config_level).upper()


class LoggingSetup:
    """Sets up application logging with file rotation."""

    @staticmethod
    def setup_logging(config: LoggingConfig, cli_level: Optional[str] = None) -> str:
        """
        Set up logging based on configuration.

        Args:
            config: Logging configuration
            cli_level: Level from the command line, if any

        Returns:
            str: The level that was applied
        """
        level_name = resolve_log_level(config.level, cli_level)
        level = getattr(logging, level_name)

        root_logger = logging.getLogger()
        root_logger.setLevel(level)
        root_logger.handlers.clear()

        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )

        if config.log_to_console:
            console_handler = logging.StreamHandler()
            console_handler.setLevel(level)
            console_handler.setFormatter(formatter)
            root_logger.addHandler(console_handler)

        if config.log_to_file:
            try:
                log_path = Path(config.log_file_path)
                log_path.parent.mkdir(parents=True, exist_ok=True)

                file_handler = logging.handlers.RotatingFileHandler(
                    filename=config.log_file_path,
                    maxBytes=config.max_file_size_mb * 1024 * 1024,
                    backupCount=config.backup_count,
                    encoding='utf-8'
                )
                file_handler.setLevel(level)
                file_handler.setFormatter(formatter)
                root_logger.addHandler(file_handler)
            except OSError as e:
                logging.error(f"Failed to set up file logging: {e}")
                if not config.log_to_console:
                    console_handler = logging.StreamHandler()
                    console_handler.setLevel(level)
                    console_handler.setFormatter(formatter)
                    root_logger.addHandler(console_handler)

        logging.debug(f"Logging initialized at {level_name}"
                      + (f", file {config.log_file_path}" if config.log_to_file else ""))
        return level_name
