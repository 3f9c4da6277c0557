# src/utils/error_handler.py
"""
Defines the exception hierarchy and the global error handler for the application.
"""
import logging
import os
import time
import traceback
from typing import Optional

import src.config as config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIGURATION = 2
EXIT_NUMERICAL = 3

# To prevent flooding the logs directory during cascading failures in scans
LAST_ERROR_REPORT_TIME = 0.0
ERROR_REPORT_COOLDOWN = 30  # seconds


class McKVError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(McKVError, ValueError):
    """Invalid parameters, inconsistent resolutions or malformed input files."""


class NumericalError(McKVError, RuntimeError):
    """A numerical procedure failed where the theory says it should not."""


class BlowUpError(NumericalError):
    def __init__(self, time: float, message: str = "non-finite state detected"):
        super().__init__(f"{message} at t={time:.6g}")
        self.time = time


class BracketError(NumericalError):
    """A root bracket does not contain a sign change."""


class ConvergenceError(NumericalError):
    """An iterative method or series did not converge within its budget."""


class UncontrollableModeError(NumericalError):
    """A control needs a Fourier mode on which the noise covariance vanishes."""


class BesselOverflowError(NumericalError):
    """The unscaled Bessel integral would overflow; use the scaled evaluation."""


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, ConfigurationError):
        return EXIT_CONFIGURATION
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_UNEXPECTED


def handle_error(error: BaseException, command: Optional[str] = None) -> int:
    """
    Catches all exceptions escaping a subcommand, logs them and writes a
    detailed report to the logs directory. Returns the process exit code.
    """
    code = exit_code_for(error)
    if code == EXIT_CONFIGURATION:
        logger.error(f"Configuration error in '{command}': {error}")
        return code
    if code == EXIT_NUMERICAL:
        logger.error(f"Numerical failure in '{command}': {error}", exc_info=error)
    else:
        logger.critical(f"Unexpected exception in '{command}': {error}", exc_info=error)

    # --- Write detailed report (rate-limited) ---
    global LAST_ERROR_REPORT_TIME
    current_time = time.time()
    if current_time - LAST_ERROR_REPORT_TIME < ERROR_REPORT_COOLDOWN:
        logger.warning(f"Error report skipped due to cooldown. Error: {error}")
        return code
    LAST_ERROR_REPORT_TIME = current_time

    # Local import to avoid a circular dependency with the file helpers
    from src.utils import files as file_utils

    tb_string = "".join(traceback.format_exception(type(error), error, error.__traceback__))
    report = {
        "command": command,
        "error_type": type(error).__name__,
        "error": str(error),
        "exit_code": code,
        "time": time.strftime("%Y-%m-%d %H:%M:%S"),
        "traceback": tb_string,
    }
    if isinstance(error, BlowUpError):
        report["blow_up_time"] = error.time
    date_str = time.strftime("%Y-%m-%d_%H-%M-%S")
    report_path = os.path.join(config.LOGS_DIR, f"error_report_{date_str}.json")
    if not file_utils.save_json(report_path, report):
        logger.critical(f"Failed to write error report to {report_path}")
    return code
