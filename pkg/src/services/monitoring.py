# src/services/monitoring.py
"""
Service module for monitoring experiment runtimes and system health.
"""
import json
import logging
import os
import time
from collections import deque
from dataclasses import asdict, dataclass
from typing import Any, Deque, Dict, Optional

import psutil

logger = logging.getLogger(__name__)


# --- Performance Monitoring ---
@dataclass
class RunMetrics:
    run_id: str
    command: str
    start_time: float
    end_time: Optional[float] = None
    success: bool = True
    exit_code: Optional[int] = None
    peak_rss_mb: Optional[float] = None

    @property
    def duration(self) -> Optional[float]:
        return self.end_time - self.start_time if self.end_time else None


class _PerformanceMonitor:
    def __init__(self):
        self.active_runs: Dict[str, RunMetrics] = {}
        self.completed_runs: Deque[RunMetrics] = deque(maxlen=1000)
        self.start_time: float = time.time()

    def start_run(self, command: str) -> str:
        run_id = f"{command}_{time.strftime('%Y%m%d-%H%M%S')}_{os.getpid()}_{len(self.completed_runs)}"
        self.active_runs[run_id] = RunMetrics(run_id, command, time.time())
        return run_id

    def end_run(self, run_id: str, exit_code: int):
        metrics = self.active_runs.pop(run_id, None)
        if metrics is None:
            logger.warning(f"Attempted to end run {run_id} which was not found or already ended.")
            return None
        metrics.end_time = time.time()
        metrics.exit_code = exit_code
        metrics.success = exit_code == 0
        metrics.peak_rss_mb = system_monitor.get_metrics()["rss_mb"]
        self.completed_runs.append(metrics)
        logger.info(f"Run {run_id} finished in {metrics.duration:.3f}s with exit code {exit_code}")
        return metrics

    def get_overall_stats(self) -> Dict[str, Any]:
        completed = len(self.completed_runs)
        successful = sum(1 for m in self.completed_runs if m.success)
        total_time = sum(m.duration for m in self.completed_runs if m.duration is not None)
        return {
            'uptime_seconds': time.time() - self.start_time,
            'completed_runs': completed,
            'success_rate': successful / completed if completed else 1.0,
            'average_duration': total_time / completed if completed else 0.0,
        }

    def export_report(self, filepath: str) -> bool:
        logger.info(f"Exporting performance report to {filepath}...")
        try:
            os.makedirs(os.path.dirname(filepath) or ".", exist_ok=True)
            data = {
                'stats': self.get_overall_stats(),
                'system': system_monitor.get_metrics(),
                'runs': [asdict(m) for m in self.completed_runs if m.end_time],
            }
            with open(filepath, 'w', encoding='utf-8') as f:
                json.dump(data, f, indent=2, default=str)
            logger.info(f"Performance report exported to {filepath}.")
            return True
        except Exception as e:
            logger.error(f"Failed to export performance report to {filepath}: {e}", exc_info=True)
            return False


# --- System Monitoring ---
class _SystemMonitor:
    def __init__(self):
        self.process = psutil.Process(os.getpid())

    def get_metrics(self) -> Dict[str, Any]:
        return {
            'cpu_load': psutil.cpu_percent(interval=None),
            'cpu_count': psutil.cpu_count(logical=True),
            'memory_percent': psutil.virtual_memory().percent,
            'rss_mb': self.process.memory_info().rss / (1024 * 1024),
        }


# --- Public Interface ---
performance_monitor = _PerformanceMonitor()
system_monitor = _SystemMonitor()


def export_performance_report(filepath: str) -> bool:
    return performance_monitor.export_report(filepath)


def get_system_metrics() -> Dict[str, Any]:
    return system_monitor.get_metrics()
