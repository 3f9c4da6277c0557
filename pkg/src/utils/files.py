# src/utils/files.py
"""
This module contains shared utility functions used across the application,
such as loading experiment manifests and writing CSV / JSON results.
"""
import csv
import json
import logging
import math
import os
from typing import Any, Dict, Iterable, Sequence

import numpy as np

import src.config as config
from src.utils.error_handler import ConfigurationError

logger = logging.getLogger(__name__)


def load_key_value_file(path: str) -> Dict[str, str]:
    """
    Loads a key=value experiment manifest.

    Blank lines and lines starting with '#' are ignored. Keys are normalized
    so that 'n-list' and 'n_list' are the same setting.

    Returns:
        Dict[str, str]: raw string values; type conversion is left to the
        pydantic run configuration.
    """
    if not os.path.isfile(path):
        raise ConfigurationError(f"Config file not found: {path}")

    data: Dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            for lineno, raw in enumerate(f, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigurationError(f"{path}:{lineno}: expected key=value, got '{line}'")
                key, value = line.split("=", 1)
                data[key.strip().replace("-", "_")] = value.strip()
    except IOError as e:
        raise ConfigurationError(f"Failed to read config file {path}: {e}") from e
    logger.debug(f"Loaded {len(data)} settings from {path}")
    return data


def format_float(value: float) -> str:
    return format(float(value), config.FLOAT_FORMAT)


def _encode(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)) or value is None:
        return json.dumps(bool(value) if value is not None else None)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value) if math.isfinite(value) else "null"
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, dict):
        items = (f"{json.dumps(str(k), ensure_ascii=False)}: {_encode(v)}" for k, v in value.items())
        return "{" + ", ".join(items) + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in value) + "]"
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dumps_precise(data: Any) -> str:
    """JSON text with insertion-ordered keys and every float at 17 significant digits."""
    return _encode(data)


def load_json(filepath, default=None):
    """Load a JSON file safely. Return default if missing or broken."""
    if not os.path.isfile(filepath):
        return default or {}
    try:
        with open(filepath, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        logger.error(f"Failed to parse JSON from {filepath}: {e}")
        return default or {}
    except IOError as e:
        logger.error(f"Failed to read file {filepath}: {e}")
        return default or {}


def save_json(filepath, data):
    """Write data to JSON file safely."""
    try:
        directory = os.path.dirname(filepath)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(filepath, "w", encoding="utf-8", newline="\n") as f:
            f.write(dumps_precise(data))
            f.write("\n")
        return True
    except (IOError, OSError, TypeError) as e:
        logger.error(f"Failed to write file {filepath}: {e}")
        return False


def write_csv(filepath: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """
    Writes comma-separated rows with a header and LF line endings.
    Floats are printed with 17 significant digits.
    """
    directory = os.path.dirname(filepath)
    if directory:
        os.makedirs(directory, exist_ok=True)
    count = 0
    with open(filepath, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([
                format_float(v) if isinstance(v, (float, np.floating)) else v for v in row
            ])
            count += 1
    logger.info(f"Wrote {count} rows to {filepath}")
    return filepath


def read_csv_columns(filepath: str) -> Dict[str, np.ndarray]:
    """Reads a numeric CSV with a header row into a dict of column arrays."""
    if not os.path.isfile(filepath):
        raise ConfigurationError(f"CSV file not found: {filepath}")
    with open(filepath, "r", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header:
            raise ConfigurationError(f"CSV file is empty: {filepath}")
        try:
            rows = [[float(v) for v in row] for row in reader if row]
        except ValueError as e:
            raise ConfigurationError(f"Non-numeric value in {filepath}: {e}") from e
    table = np.asarray(rows, dtype=float).reshape(-1, len(header))
    return {name: table[:, i] for i, name in enumerate(header)}
