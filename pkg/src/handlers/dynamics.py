# src/handlers/dynamics.py
"""
Subcommands that integrate a single density in time: the deterministic
PDE, one SPDE path, and the controlled system used for irreducibility.
"""
import argparse
import logging
from dataclasses import asdict
from typing import Literal, Optional

import numpy as np
from pydantic import Field

from src.core.run_config import (
    NoiseConfig, SimulationConfig, add_common_arguments, add_noise_arguments, add_simulation_arguments,
    covariance, emit_json, output_path, pde_config,
)
from src.services import mckv_pde, mckv_spde, stationary
from src.services.torus_fourier import SpectralField, l2_norm, mass, moments, resize
from src.utils.error_handler import ConfigurationError

logger = logging.getLogger(__name__)


class PdeRunConfig(SimulationConfig):
    format: Literal["csv", "json"] = "csv"
    init: str = "uniform"
    densities: Optional[str] = None
    stop_when_stationary: bool = False


class SpdeRunConfig(NoiseConfig):
    format: Literal["csv", "json"] = "csv"
    init: str = "uniform"
    cutoff: Optional[float] = Field(None, gt=0)


class ControlRunConfig(NoiseConfig):
    T: float = Field(1.0, gt=0)
    source: str = "uniform"
    target: str = "stationary"
    checks: int = Field(11, ge=2)


def target_density(spec: str, sigma: float, K: int) -> SpectralField:
    """
    'stationary' is the stationary density with the largest m2 at this σ
    (the symmetric state m = 0 above σ_c); 'stationary:M2' is the Gibbs density
    for moments (0, M2); anything else is parsed as an initial condition.
    """
    name, _, arg = spec.partition(":")
    if name != "stationary":
        return mckv_pde.initial_density(spec, K)
    if arg:
        try:
            m2 = float(arg)
        except ValueError as e:
            raise ConfigurationError(f"Malformed target '{spec}': {e}") from e
    else:
        report = stationary.find_fixed_points(sigma)
        m2 = max(s.m2 for s in report.solutions if s.m1 == 0.0)
    return stationary.density_field(sigma, stationary.MomentPair(0.0, m2), K)


def pde_command(cfg: PdeRunConfig, run_id: str):
    solver_cfg = pde_config(
        cfg, run_id, stop_when_stationary=cfg.stop_when_stationary, keep_densities=bool(cfg.densities),
    )
    trajectory = mckv_pde.evolve(mckv_pde.initial_density(cfg.init, cfg.K), solver_cfg)
    final = trajectory.snapshots[-1]
    summary = {
        "final": asdict(final),
        "steps": trajectory.steps_taken,
        "stationary": trajectory.stationary,
        "positivity_violations": trajectory.positivity_violations,
    }
    if cfg.densities:
        summary["densities"] = trajectory.write_density_csv(cfg.densities)
    if cfg.format == "json":
        summary["snapshots"] = [asdict(s) for s in trajectory.snapshots]
    else:
        summary["output"] = trajectory.write_csv(output_path(cfg, "pde", "csv"))
    emit_json(summary, cfg)


def spde_command(cfg: SpdeRunConfig, run_id: str):
    Q = covariance(cfg)
    if Q.is_zero:
        logger.info(f"[{run_id}] noise switched off; the path follows the deterministic PDE")
    trajectory = mckv_spde.simulate(
        mckv_pde.initial_density(cfg.init, cfg.K), pde_config(cfg, run_id), Q,
        seed=cfg.seed, cutoff_R=cfg.cutoff,
    )
    summary = {
        "final": dict(zip(trajectory.CSV_HEADER, trajectory.rows[-1])),
        "trace": Q.trace,
        "seed": cfg.seed,
    }
    if cfg.format == "json":
        summary["rows"] = [dict(zip(trajectory.CSV_HEADER, row)) for row in trajectory.rows]
    else:
        summary["output"] = trajectory.write_csv(output_path(cfg, "spde", "csv"))
    emit_json(summary, cfg)


def control_command(cfg: ControlRunConfig, run_id: str):
    solver_cfg = pde_config(cfg, run_id, output_interval=cfg.T)
    Q = covariance(cfg)
    y0 = mckv_pde.initial_density(cfg.source, cfg.K)
    y1 = resize(target_density(cfg.target, cfg.sigma, cfg.K), cfg.K)
    control = mckv_spde.build_control(y0, y1, cfg.T, Q, solver_cfg, checks=cfg.checks)
    reached = mckv_spde.integrate_controlled(y0, control, Q, solver_cfg)
    error = l2_norm(reached - y1)
    sup_norm = max(l2_norm(control.at(t)) for t in np.linspace(0.0, cfg.T, cfg.checks))
    logger.info(f"[{run_id}] control endpoint error {error:.3e} over T={cfg.T}")
    emit_json({
        "endpoint_error": error,
        "control_sup_norm": sup_norm,
        "target_moments": list(moments(y1)),
        "reached_moments": list(moments(reached)),
        "reached_mass": mass(reached),
    }, cfg)


def register(subparsers):
    """Registers the pde, spde and control subcommands."""
    parser = subparsers.add_parser(
        "pde", help="integrate the deterministic McKean-Vlasov equation", argument_default=argparse.SUPPRESS,
    )
    add_common_arguments(parser)
    add_simulation_arguments(parser)
    parser.add_argument("--init", help="uniform | perturbed[:eps] | bump:x0[:kappa] | CSV file with a rho column")
    parser.add_argument("--densities", help="also write (t, x, rho) density snapshots to this CSV")
    parser.add_argument("--stop-when-stationary", dest="stop_when_stationary", action="store_const", const=True)
    parser.set_defaults(handler=pde_command, model=PdeRunConfig, parser=parser)

    parser = subparsers.add_parser(
        "spde", help="simulate one path of the additive-noise equation", argument_default=argparse.SUPPRESS,
    )
    add_common_arguments(parser)
    add_simulation_arguments(parser)
    add_noise_arguments(parser)
    parser.add_argument("--init", help="initial condition, as for pde")
    parser.add_argument("--cutoff", type=float, help="radius R of the smooth interaction cutoff")
    parser.set_defaults(handler=spde_command, model=SpdeRunConfig, parser=parser)

    parser = subparsers.add_parser(
        "control", help="steer the controlled system between two densities", argument_default=argparse.SUPPRESS,
    )
    add_common_arguments(parser)
    add_simulation_arguments(parser)
    add_noise_arguments(parser)
    parser.add_argument("--source", help="starting density, as for pde --init")
    parser.add_argument("--target", help="stationary | stationary:M2 | any initial condition")
    parser.add_argument("--checks", type=int, help="times at which controllability is verified")
    parser.set_defaults(handler=control_command, model=ControlRunConfig, parser=parser)
