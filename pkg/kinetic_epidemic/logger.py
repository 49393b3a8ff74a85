"""
Unified logging

Provides one logging configuration and logger factory for the whole simulator.
"""

import logging
import os
import tempfile

# Map level names to logging constants so the CLI and the environment can pass strings
LOG_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
    "CRITICAL": logging.CRITICAL
}

ROOT_LOGGER_NAME = "KineticEpidemic"


def get_default_log_level():
    """Default level, overridable through KINETIC_EPIDEMIC_LOG_LEVEL."""
    name = os.environ.get("KINETIC_EPIDEMIC_LOG_LEVEL", "").upper()
    return LOG_LEVELS.get(name, logging.INFO)


DEFAULT_LOG_LEVEL = get_default_log_level()

# Global configuration flag
_logger_configured = False

# Log file path
LOG_FILE = os.path.join(tempfile.gettempdir(), "kinetic_epidemic.log")

# Log format
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(log_level=None, log_file=None):
    """
    Configure the global logging system

    Args:
        log_level: level name or logging constant
        log_file: log file path, defaults to LOG_FILE

    Returns:
        The configured root logger of the simulator
    """
    global _logger_configured

    root_logger = logging.getLogger(ROOT_LOGGER_NAME)
    if _logger_configured:
        if log_level is not None:
            set_log_level(log_level)
        return root_logger

    level = _resolve_level(log_level)
    root_logger.setLevel(level)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)
    console_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root_logger.addHandler(console_handler)

    file_path = log_file or LOG_FILE
    try:
        file_handler = logging.FileHandler(file_path, mode='a', encoding='utf-8')
        file_handler.setLevel(level)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root_logger.addHandler(file_handler)
    except (IOError, PermissionError) as e:
        console_handler.setLevel(logging.WARNING)
        root_logger.warning(f"Cannot create log file: {e}")

    _logger_configured = True
    return root_logger


def set_log_level(log_level):
    """Change the level of the root logger and of all its handlers."""
    level = _resolve_level(log_level)
    root_logger = logging.getLogger(ROOT_LOGGER_NAME)
    root_logger.setLevel(level)
    for handler in root_logger.handlers:
        handler.setLevel(level)


def _resolve_level(log_level):
    if log_level is None:
        return DEFAULT_LOG_LEVEL
    if isinstance(log_level, str) and log_level.upper() in LOG_LEVELS:
        return LOG_LEVELS[log_level.upper()]
    if isinstance(log_level, int):
        return log_level
    return DEFAULT_LOG_LEVEL


def get_logger(name):
    """
    Get a logger by name

    Args:
        name: logger name, usually "KineticEpidemic.<Component>"

    Returns:
        Logger object
    """
    if not _logger_configured:
        configure_logging()
    return logging.getLogger(name)
