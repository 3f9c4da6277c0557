# utilities/clean_slate.py
"""
Resets the workspace: removes every __pycache__ directory and the data
directory holding results, logs and error reports.
"""
import logging
import os
import shutil
import sys
from typing import List

# Configure basic logging for the script itself
logging.basicConfig(level=logging.INFO, format='%(levelname)s: %(message)s')
logger = logging.getLogger(__name__)


def delete_directory(path: str) -> bool:
    """Deletes a directory if it exists. Returns True when something was removed."""
    if os.path.isdir(path):
        try:
            shutil.rmtree(path)
            logger.info(f"Successfully deleted: {path}")
            return True
        except OSError as e:
            logger.error(f"Error deleting {path}: {e}")
            return False
    logger.info(f"Directory not found or not a directory, skipping: {path}")
    return False


def clean(project_root: str, data_dir: str = None) -> List[str]:
    """Removes caches under project_root and the data directory; returns the deleted paths."""
    removed = []
    for dirpath, dirnames, _ in os.walk(project_root):
        if '__pycache__' in dirnames:
            if delete_directory(os.path.join(dirpath, '__pycache__')):
                removed.append(os.path.join(dirpath, '__pycache__'))
            dirnames.remove('__pycache__')

    data_dir = data_dir or os.getenv("MCKV_DATA_DIR", "data")
    if not os.path.isabs(data_dir):
        data_dir = os.path.join(project_root, data_dir)
    if delete_directory(data_dir):
        removed.append(data_dir)
    return removed


def main() -> int:
    project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    logger.info(f"Starting clean slate operation in: {project_root}")
    removed = clean(project_root)
    logger.info(f"Clean slate complete, {len(removed)} directories removed.")
    return 0


if __name__ == '__main__':
    sys.exit(main())
