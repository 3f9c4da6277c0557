# src/core/tasks.py
"""
Runs batches of independent jobs (σ-scans, seeds, replicates) in a process
pool, or serially when only one worker is configured.
"""
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Iterable, List, Optional

import src.config as config
from src import services

logger = logging.getLogger(__name__)


def run_parallel(func: Callable[[Any], Any], jobs: Iterable[Any], workers: Optional[int] = None) -> List[Any]:
    """
    Maps a module-level function over jobs, preserving order. Exceptions in a
    worker propagate to the caller unchanged.
    """
    jobs = list(jobs)
    workers = min(workers or config.MAX_WORKERS, len(jobs)) if jobs else 1
    if workers <= 1:
        return [func(job) for job in jobs]
    logger.info(f"Dispatching {len(jobs)} jobs to {workers} worker processes")
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, jobs))


def parallel_mapper(workers: Optional[int] = None) -> Callable:
    """A map-like callable backed by run_parallel, for services that accept a mapper."""
    return lambda func, jobs: run_parallel(func, jobs, workers)


def performance_report_task():
    """Exports the performance metrics of this process to a JSON file."""
    if not config.PERFORMANCE_REPORTING_ENABLED:
        return None
    date_str = time.strftime("%Y-%m-%d_%H-%M-%S")
    report_path = os.path.join(config.LOGS_DIR, f"performance_report_{date_str}.json")
    try:
        services.monitoring.export_performance_report(report_path)
    except Exception as e:
        logger.error(f"Error in performance report task: {e}", exc_info=True)
        return None
    return report_path
