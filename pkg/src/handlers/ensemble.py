# src/handlers/ensemble.py
"""
Subcommands that need many samples: interacting particle runs, the
propagation-of-chaos comparison and the same-noise ergodicity runs.
"""
import argparse
import logging
from typing import List, Literal, Optional

from pydantic import Field, field_validator

import src.config as config
from src.core import tasks
from src.core.run_config import (
    NoiseConfig, RunConfig, add_common_arguments, add_noise_arguments, add_simulation_arguments,
    covariance, emit_json, output_path, pde_config, split_list,
)
from src.services import mckv_pde, mckv_spde, particles
from src.utils import files as file_utils

logger = logging.getLogger(__name__)

CHAOS_HEADER = ("N", "mean_m1", "mean_m2", "error")


class ParticleSettings(RunConfig):
    """Fields shared by the particle subcommands."""
    sigma: float = Field(gt=0)
    T: float = Field(1.0, gt=0)
    dt: float = Field(config.PARTICLE_DT, gt=0)
    output_interval: float = Field(0.1, gt=0)
    init: str = "uniform"
    seed: int = Field(0, ge=0)


class ParticleRunConfig(ParticleSettings):
    format: Literal["csv", "json"] = "csv"
    n: int = Field(1000, ge=1)


class ChaosConfig(ParticleSettings):
    format: Literal["csv", "json"] = "json"
    n_list: List[int] = Field(default_factory=lambda: [1000, 10000, 100000], min_length=1)
    replicates: int = Field(5, ge=1)
    K: int = Field(config.PDE_MODES, ge=2)
    workers: Optional[int] = Field(None, ge=1)

    @field_validator("n_list", mode="before")
    @classmethod
    def split_n_list(cls, value):
        return split_list(value)


class ErgodicityConfig(NoiseConfig):
    inits: List[str] = Field(default_factory=lambda: ["uniform", "bump"], min_length=2)
    samples: int = Field(1, ge=1)
    t_burn: float = Field(0.0, ge=0)
    no_noise: bool = False
    mass_noise: bool = True
    workers: Optional[int] = Field(None, ge=1)

    @field_validator("inits", mode="before")
    @classmethod
    def split_inits(cls, value):
        return split_list(value)


def particles_command(cfg: ParticleRunConfig, run_id: str):
    noise = mckv_spde.NoiseStream(cfg.seed)
    ensemble = particles.ParticleEnsemble(particles.sample_initial(cfg.n, cfg.init, noise.generator), seed=cfg.seed)
    V, F = mckv_pde.default_potentials(2)
    trajectory = particles.simulate(
        ensemble, V, F, cfg.sigma, cfg.T, noise, dt=cfg.dt, output_interval=cfg.output_interval,
    )
    summary = {"final": dict(zip(trajectory.CSV_HEADER, trajectory.rows[-1])), "N": cfg.n, "seed": cfg.seed}
    if cfg.format == "json":
        summary["rows"] = [dict(zip(trajectory.CSV_HEADER, row)) for row in trajectory.rows]
    else:
        summary["output"] = trajectory.write_csv(output_path(cfg, "particles", "csv"))
    logger.info(f"[{run_id}] {cfg.n} particles reached t={trajectory.final.t:.4g}")
    emit_json(summary, cfg)


def chaos_command(cfg: ChaosConfig, run_id: str):
    report = particles.chaos_compare(
        cfg.n_list, cfg.sigma, cfg.T, cfg.replicates, init=cfg.init, seed=cfg.seed, dt=cfg.dt, K=cfg.K,
        mapper=tasks.parallel_mapper(cfg.workers),
    )
    result = report.to_dict()
    if cfg.format == "csv":
        result["output"] = file_utils.write_csv(output_path(cfg, "chaos", "csv"), CHAOS_HEADER, report.rows())
    logger.info(f"[{run_id}] chaos error exponent {report.exponent:.3f}")
    emit_json(result, cfg)


def ergodicity_command(cfg: ErgodicityConfig, run_id: str):
    solver_cfg = pde_config(cfg, run_id)
    Q = covariance(cfg, no_noise=cfg.no_noise)
    if not cfg.mass_noise:
        Q = Q.without_mass()
    u0_list = [mckv_pde.initial_density(spec, cfg.K) for spec in cfg.inits]
    if cfg.samples == 1:
        report = mckv_spde.ergodicity_probe(u0_list, solver_cfg, Q, seed=cfg.seed, t_burn=cfg.t_burn)
        emit_json(report.to_dict(), cfg)
        return
    seeds = list(range(cfg.seed, cfg.seed + cfg.samples))
    experiment = mckv_spde.ergodicity_experiment(
        u0_list, solver_cfg, Q, seeds, t_burn=cfg.t_burn, mapper=tasks.parallel_mapper(cfg.workers),
    )
    if not experiment.agree:
        logger.warning(f"[{run_id}] time-averaged m2 differs between initial data beyond three standard errors")
    emit_json(experiment.to_dict(), cfg)


def _add_particle_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--sigma", type=float, help="diffusion strength")
    parser.add_argument("--T", type=float, help="final time")
    parser.add_argument("--dt", type=float, help="Euler-Maruyama step")
    parser.add_argument("--output-interval", dest="output_interval", type=float, help="time between records")
    parser.add_argument("--init", help="uniform | perturbed[:eps] | bump:x0[:kappa]")
    parser.add_argument("--seed", type=int, help="random seed")


def register(subparsers):
    """Registers the particles, chaos and ergodicity subcommands."""
    parser = subparsers.add_parser(
        "particles", help="simulate the interacting particle system", argument_default=argparse.SUPPRESS,
    )
    add_common_arguments(parser)
    _add_particle_arguments(parser)
    parser.add_argument("--n", type=int, help="number of particles")
    parser.set_defaults(handler=particles_command, model=ParticleRunConfig, parser=parser)

    parser = subparsers.add_parser(
        "chaos", help="empirical moments against the PDE for growing N", argument_default=argparse.SUPPRESS,
    )
    add_common_arguments(parser)
    _add_particle_arguments(parser)
    parser.add_argument("--n-list", dest="n_list", help="comma-separated particle counts")
    parser.add_argument("--replicates", type=int, help="independent runs per particle count")
    parser.add_argument("--K", type=int, help="Fourier truncation of the reference PDE")
    parser.add_argument("--workers", type=int, help="worker processes")
    parser.set_defaults(handler=chaos_command, model=ChaosConfig, parser=parser)

    parser = subparsers.add_parser(
        "ergodicity", help="run several initial data under one noise realization",
        argument_default=argparse.SUPPRESS,
    )
    add_common_arguments(parser)
    add_simulation_arguments(parser)
    add_noise_arguments(parser)
    parser.add_argument("--inits", help="comma-separated initial conditions (at least two)")
    parser.add_argument("--samples", type=int, help="number of independent seeds")
    parser.add_argument("--t-burn", dest="t_burn", type=float, help="burn-in before time averaging")
    parser.add_argument("--no-noise", dest="no_noise", action="store_const", const=True)
    parser.add_argument("--no-mass-noise", dest="mass_noise", action="store_const", const=False,
                        help="keep the noise off the mass mode")
    parser.add_argument("--workers", type=int, help="worker processes for several seeds")
    parser.set_defaults(handler=ergodicity_command, model=ErgodicityConfig, parser=parser)
