"""
CLI subcommands
"""

import importlib
import logging
import os
import traceback
from pathlib import Path

from .base import Command, commands, register_command

logger = logging.getLogger("KineticEpidemic.CLI")

current_dir = os.path.dirname(os.path.abspath(__file__))

# every module but this one and base registers one command when imported
for file_path in sorted(Path(current_dir).glob("*.py")):
    module_name = file_path.stem
    if module_name in ("__init__", "base"):
        continue
    try:
        importlib.import_module(f".{module_name}", __package__)
        logger.debug(f"Imported command module: {module_name}")
    except Exception as e:
        logger.error(f"Error importing command module {module_name}: {e}")
        logger.error(traceback.format_exc())

__all__ = ["Command", "commands", "register_command"]
