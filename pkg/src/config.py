# src/config.py
"""
Defines application-wide settings and numerical defaults.
This module loads its values from environment variables.
"""
import os
import logging

logger = logging.getLogger(__name__)

# --- Directory Paths ---
DATA_DIR = os.getenv("MCKV_DATA_DIR", "data")
LOGS_DIR = os.path.join(DATA_DIR, "logs")
RUN_LOGS_DIR = os.path.join(LOGS_DIR, "run_logs")
OUTPUT_DIR = os.getenv("MCKV_OUTPUT_DIR", os.path.join(DATA_DIR, "output"))

# --- Parallel Execution ---
MAX_WORKERS = 1
try:
    MAX_WORKERS = max(1, int(os.getenv("MAX_WORKERS", "1")))
except ValueError:
    logger.error("MAX_WORKERS is not an integer. Falling back to serial execution.")

# --- Quadrature & Spectral Defaults ---
FOURIER_NODES = 1024          # grid for kernels and generic transforms
QUADRATURE_NODES = 1024       # trapezoid nodes for the stationary integrals
BESSEL_NODES = 512
BESSEL_OVERFLOW_GUARD = 700.0
HEAT_KERNEL_TOL = 1e-14

# --- Stationary Analysis ---
ROOT_SCAN_INTERVALS = 200
ROOT_TOL = 1e-10
FIXED_POINT_TOL = 1e-8
ROOT_MERGE_TOL = 1e-6
NEWTON_STEP = 1e-6
NEWTON_MAX_ITER = 60
PHASE_SCAN_SIGMA_MIN = 0.02
SERIES_MAX_TERMS = 200

# --- PDE / SPDE Defaults ---
PDE_MODES = int(os.getenv("PDE_MODES", "64"))
PDE_GRID = int(os.getenv("PDE_GRID", "256"))
PDE_DT = float(os.getenv("PDE_DT", "1e-3"))
STATIONARITY_TOL = 1e-7
POSITIVITY_TOL = 1e-8
SPDE_GAMMA = 0.9
SPDE_SCALE = 1.0

# --- Particle Defaults ---
PARTICLE_DT = float(os.getenv("PARTICLE_DT", "1e-3"))
HISTOGRAM_BINS = 64

# --- Reporting ---
PERFORMANCE_REPORTING_ENABLED = os.getenv("PERFORMANCE_REPORTING_ENABLED", "0") == "1"
RUN_LOGGING_ENABLED = os.getenv("RUN_LOGGING_ENABLED", "0") == "1"
FLOAT_FORMAT = ".17g"

# --- Debugging Configuration ---
DEBUG_LOGGING = os.getenv("DEBUG_LOGGING", "0") == "1"
