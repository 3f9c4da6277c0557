# src/utils/logging.py
"""
Configures logging for the entire application.
"""
import logging
import os
import sys
from logging.handlers import RotatingFileHandler

import src.config as config

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging():
    """Initializes console and file logging."""
    root_logger = logging.getLogger()
    root_logger.setLevel(logging.INFO)

    # Clear any existing handlers to prevent duplicates on successive calls
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    # Console output goes to stderr so that JSON results on stdout stay parseable.
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root_logger.addHandler(console_handler)

    os.makedirs(config.LOGS_DIR, exist_ok=True)
    log_file_path = os.path.join(config.LOGS_DIR, "mckv_runs.log")
    file_handler = RotatingFileHandler(
        log_file_path, maxBytes=5 * 1024 * 1024, backupCount=5, encoding='utf-8'
    )
    file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root_logger.addHandler(file_handler)

    # Reduce noise from overly verbose libraries.
    for lib_name in ["numpy", "scipy", "concurrent.futures"]:
        logging.getLogger(lib_name).setLevel(logging.WARNING)

    level = logging.DEBUG if config.DEBUG_LOGGING else logging.INFO
    logging.getLogger("src.services").setLevel(level)
    logger.info("Logging configured successfully.")


# --- Per-Run Logging ---

_run_loggers = {}  # Cache for run logger instances


def get_run_logger(run_id: str) -> logging.Logger:
    """
    Returns a dedicated logger for one experiment run that saves its monitor
    events (positivity warnings, stationarity, blow-up) to a separate file.
    When run logging is disabled, events go to the package logger instead.
    """
    if run_id in _run_loggers:
        return _run_loggers[run_id]

    if not config.RUN_LOGGING_ENABLED:
        return logging.getLogger(f"src.runs.{run_id}")

    try:
        sanitized = ''.join(c for c in run_id if c.isalnum() or c in ('-', '_', '.'))
        os.makedirs(config.RUN_LOGS_DIR, exist_ok=True)
        log_file = os.path.join(config.RUN_LOGS_DIR, f"{sanitized}.log")

        run_logger = logging.getLogger(f"run.{sanitized}")
        run_logger.setLevel(logging.INFO)
        run_logger.propagate = False

        handler = RotatingFileHandler(
            log_file, maxBytes=1 * 1024 * 1024, backupCount=1, encoding='utf-8'
        )
        handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))

        run_logger.addHandler(handler)
        _run_loggers[run_id] = run_logger

        logger.info(f"Initialized run logger for {run_id}.")
        return run_logger

    except Exception as e:
        logger.error(f"Failed to create logger for run {run_id}: {e}", exc_info=True)
        return logging.getLogger()
