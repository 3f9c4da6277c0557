# src/handlers/analysis.py
"""
Subcommands for the stationary theory: the critical noise σ_c, the
fixed points of the self-consistency map and the phase diagram.
"""
import argparse
import logging
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import Field, field_validator, model_validator

import src.config as config
from src.core import tasks
from src.core.run_config import RunConfig, add_common_arguments, emit_json, output_path, split_list
from src.services import bessel, stationary
from src.utils import files as file_utils

logger = logging.getLogger(__name__)

PHASE_DIAGRAM_HEADER = ("sigma", "count", "m_star_on_M2", "zeta_prime0", "f_c")
SCAN_HEADER = ("sigma", "count", "m_star")


class SigmaCConfig(RunConfig):
    tol: float = Field(1e-10, gt=0)
    cross_check: bool = False


class StationaryConfig(RunConfig):
    format: Optional[Literal["csv", "json"]] = None
    sigma: Optional[float] = Field(None, gt=0)
    scan: Optional[Tuple[float, float, int]] = None
    tol: float = Field(config.FIXED_POINT_TOL, gt=0)
    workers: Optional[int] = Field(None, ge=1)

    @field_validator("scan", mode="before")
    @classmethod
    def split_scan(cls, value):
        return split_list(value)

    @model_validator(mode="after")
    def one_mode(self):
        if (self.sigma is None) == (self.scan is None):
            raise ValueError("give exactly one of --sigma or --scan SIGMA_MIN SIGMA_MAX N")
        if self.scan is not None:
            low, high, n = self.scan
            if not 0 < low <= high or n < 1:
                raise ValueError(f"scan needs 0 < SIGMA_MIN <= SIGMA_MAX and N >= 1, got {self.scan}")
        return self


class PhaseDiagramConfig(RunConfig):
    format: Literal["csv", "json"] = "csv"
    sigma_min: float = Field(config.PHASE_SCAN_SIGMA_MIN, gt=0)
    sigma_max: float = Field(1.5, gt=0)
    n: int = Field(60, ge=1)
    sigmas: Optional[List[float]] = None
    workers: Optional[int] = Field(None, ge=1)

    @field_validator("sigmas", mode="before")
    @classmethod
    def split_sigmas(cls, value):
        return split_list(value)

    @model_validator(mode="after")
    def ordered(self):
        if self.sigma_min > self.sigma_max:
            raise ValueError(f"sigma_min={self.sigma_min} exceeds sigma_max={self.sigma_max}")
        if self.sigmas is not None and any(s <= 0 for s in self.sigmas):
            raise ValueError("every sigma in the grid must be positive")
        return self

    def grid(self) -> List[float]:
        if self.sigmas:
            return list(self.sigmas)
        return np.linspace(self.sigma_min, self.sigma_max, self.n).tolist()


# --- Workers (module-level so process pools can pickle them) ---

def scan_row(job: Tuple[float, float]) -> Tuple[float, int, float]:
    sigma, tol = job
    report = stationary.find_fixed_points(sigma, tol)
    return sigma, report.count, report.m_star


def phase_diagram_rows(sigmas: List[float], workers: Optional[int] = None) -> List[Tuple]:
    """(sigma, count, m_star_on_M2, zeta_prime0, f_c) for every σ in the grid."""
    rows = tasks.run_parallel(stationary.phase_row, sigmas, workers)
    return [tuple(row[key] for key in ("sigma", "count", "m_star", "zeta_prime0", "f_c")) for row in rows]


def emit_phase_diagram(sigmas: List[float], path: str, workers: Optional[int] = None) -> Tuple[str, List[Tuple]]:
    """Writes the phase-diagram CSV for a σ grid and returns its path and rows."""
    rows = phase_diagram_rows(sigmas, workers)
    return file_utils.write_csv(path, PHASE_DIAGRAM_HEADER, rows), rows


# --- Commands ---

def sigma_c_command(cfg: SigmaCConfig, run_id: str):
    sigma_c = bessel.find_sigma_c(cfg.tol)
    result = {
        "sigma_c": sigma_c,
        "residual": abs(bessel.f_c(sigma_c)),
        "bracket": list(bessel.SIGMA_C_BRACKET),
    }
    if cfg.cross_check:
        from_zeta = stationary.find_sigma_c_from_zeta(cfg.tol)
        result["sigma_c_from_zeta"] = from_zeta
        result["difference"] = abs(from_zeta - sigma_c)
    logger.info(f"[{run_id}] sigma_c = {sigma_c:.12f}")
    emit_json(result, cfg)


def stationary_command(cfg: StationaryConfig, run_id: str):
    if cfg.sigma is not None:
        report = stationary.find_fixed_points(cfg.sigma, cfg.tol)
        logger.info(f"[{run_id}] {report.count} fixed point(s) at sigma={cfg.sigma}")
        emit_json(report.to_dict(), cfg.model_copy(update={"format": "json"}))
        return

    low, high, n = cfg.scan
    jobs = [(float(s), cfg.tol) for s in np.linspace(low, high, n)]
    rows = tasks.run_parallel(scan_row, jobs, cfg.workers)
    if cfg.format == "json":
        emit_json({"rows": [dict(zip(SCAN_HEADER, row)) for row in rows]}, cfg)
        return
    path = file_utils.write_csv(output_path(cfg, "stationary_scan", "csv"), SCAN_HEADER, rows)
    emit_json({"output": path, "rows": len(rows)}, cfg.model_copy(update={"format": "csv"}))


def _signs_agree(rows: List[Tuple]) -> bool:
    return all(np.sign(row[3]) == np.sign(row[4]) for row in rows)


def phase_diagram_command(cfg: PhaseDiagramConfig, run_id: str):
    if cfg.format == "json":
        rows = phase_diagram_rows(cfg.grid(), cfg.workers)
        summary = {"rows": [dict(zip(PHASE_DIAGRAM_HEADER, row)) for row in rows]}
    else:
        path, rows = emit_phase_diagram(cfg.grid(), output_path(cfg, "phase_diagram", "csv"), cfg.workers)
        summary = {"output": path, "rows": len(rows)}
    summary["sign_agreement"] = _signs_agree(rows)
    if not summary["sign_agreement"]:
        logger.warning(f"[{run_id}] zeta'(0) and f_c disagree in sign somewhere on the grid")
    emit_json(summary, cfg)


def register(subparsers):
    """Registers the sigma-c, stationary and phase-diagram subcommands."""
    parser = subparsers.add_parser(
        "sigma-c", help="critical noise strength from the Bessel criterion",
        argument_default=argparse.SUPPRESS,
    )
    add_common_arguments(parser)
    parser.add_argument("--tol", type=float, help="bisection tolerance")
    parser.add_argument("--cross-check", dest="cross_check", action="store_const", const=True,
                        help="also locate sigma_c as the zero of zeta'(0)")
    parser.set_defaults(handler=sigma_c_command, model=SigmaCConfig, parser=parser)

    parser = subparsers.add_parser(
        "stationary", help="stationary solutions at one sigma, or their count over a sigma range",
        argument_default=argparse.SUPPRESS,
    )
    add_common_arguments(parser)
    parser.add_argument("--sigma", type=float, help="diffusion strength")
    parser.add_argument("--scan", nargs=3, metavar=("SIGMA_MIN", "SIGMA_MAX", "N"), help="scan a sigma range")
    parser.add_argument("--tol", type=float, help="fixed-point residual tolerance")
    parser.add_argument("--workers", type=int, help="worker processes for --scan")
    parser.set_defaults(handler=stationary_command, model=StationaryConfig, parser=parser)

    parser = subparsers.add_parser(
        "phase-diagram", help="solution count, m* and the sign of f_c over a sigma grid",
        argument_default=argparse.SUPPRESS,
    )
    add_common_arguments(parser)
    parser.add_argument("--sigma-min", dest="sigma_min", type=float)
    parser.add_argument("--sigma-max", dest="sigma_max", type=float)
    parser.add_argument("--n", type=int, help="number of grid points")
    parser.add_argument("--sigmas", help="explicit comma-separated grid, overrides the range")
    parser.add_argument("--workers", type=int, help="worker processes")
    parser.set_defaults(handler=phase_diagram_command, model=PhaseDiagramConfig, parser=parser)
