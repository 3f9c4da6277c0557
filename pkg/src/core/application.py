# src/core/application.py
"""
Builds the command-line application: logging, directories, the argument
parser with every registered subcommand, and the dispatch loop that turns
exceptions into exit codes.
"""
import argparse
import logging
import os
import sys
from typing import List, Optional

import src.config as config
from src import handlers
from src.core import run_config, tasks
from src.services import monitoring
from src.utils import error_handler
from src.utils import logging as logging_utils
from src.utils.error_handler import ConfigurationError

logger = logging.getLogger(__name__)


def required_dirs() -> List[str]:
    return [config.DATA_DIR, config.LOGS_DIR, config.RUN_LOGS_DIR, config.OUTPUT_DIR]


def ensure_directories():
    for path in required_dirs():
        try:
            os.makedirs(path, exist_ok=True)
            logger.debug(f"Ensured directory exists: {path}")
        except OSError as e:
            logger.critical(f"Failed to create directory {path}: {e}")
            raise ConfigurationError(f"Could not create essential directory {path}") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mckv",
        description="Stationary states, PDE, SPDE and particle simulations of the "
                    "McKean-Vlasov double-well model on the torus.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    handlers.analysis.register(subparsers)
    handlers.dynamics.register(subparsers)
    handlers.ensemble.register(subparsers)
    return parser


def create_app() -> argparse.ArgumentParser:
    """Configures logging and directories and returns the parser."""
    ensure_directories()
    logging_utils.setup_logging()
    return build_parser()


def parse_and_dispatch(argv: Optional[List[str]] = None) -> int:
    """
    Runs one subcommand and returns the process exit code: 0 on success,
    2 on configuration errors (including usage errors), 3 on numerical
    failures and 1 on anything unexpected.
    """
    try:
        parser = create_app()
    except ConfigurationError as e:
        sys.stderr.write(f"{e}\n")
        return error_handler.EXIT_CONFIGURATION

    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse has already printed usage (or help) to the console
        if e.code is None:
            return error_handler.EXIT_OK
        return e.code if isinstance(e.code, int) else error_handler.EXIT_CONFIGURATION

    run_id = monitoring.performance_monitor.start_run(args.command)
    exit_code = error_handler.EXIT_OK
    try:
        cfg = run_config.resolve(args.model, args, args.parser)
        logger.info(f"Run {run_id}: {args.command} with {cfg.model_dump()}")
        args.handler(cfg, run_id)
    except Exception as e:
        exit_code = error_handler.handle_error(e, args.command)
    finally:
        monitoring.performance_monitor.end_run(run_id, exit_code)
        tasks.performance_report_task()
    return exit_code


run = parse_and_dispatch
