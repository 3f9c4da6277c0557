# src/core/run_config.py
"""
Validated per-run configuration shared by all subcommands, plus the helpers
that merge a config file with command-line flags and emit results.
"""
import argparse
import logging
import os
import sys
from typing import Any, Dict, Literal, Optional, Type

from pydantic import BaseModel, ConfigDict, Field, ValidationError

import src.config as config
from src.services.mckv_pde import PdeConfig
from src.services.mckv_spde import CovarianceSpec, covariance_from_growth, zero_covariance
from src.utils import files as file_utils
from src.utils.error_handler import ConfigurationError

logger = logging.getLogger(__name__)


class RunConfig(BaseModel):
    """Fields every subcommand accepts. Unknown keys are rejected."""
    model_config = ConfigDict(extra="forbid")

    format: Literal["csv", "json"] = "json"
    out: Optional[str] = None


class SimulationConfig(RunConfig):
    sigma: float = Field(gt=0)
    T: float = Field(10.0, gt=0)
    K: int = Field(config.PDE_MODES, ge=2)
    M: Optional[int] = Field(None, gt=0)
    dt: float = Field(config.PDE_DT, gt=0)
    output_interval: float = Field(0.1, gt=0)


class NoiseConfig(SimulationConfig):
    gamma: float = Field(config.SPDE_GAMMA, gt=0.5)
    c: float = Field(config.SPDE_SCALE, ge=0)
    seed: int = Field(0, ge=0)
    strong_feller: bool = False


def split_list(value: Any) -> Any:
    """Accepts 'a,b,c' from flags or config files as a list."""
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


def load_config_file(path: str) -> Dict[str, Any]:
    """key=value manifests, or a JSON result whose 'config' block is reused."""
    if path.endswith(".json"):
        data = file_utils.load_json(path, default=None)
        if not data:
            raise ConfigurationError(f"Config file {path} is missing or not valid JSON")
        return dict(data.get("config", data))
    return file_utils.load_key_value_file(path)


def resolve(model: Type[RunConfig], args: argparse.Namespace, parser: argparse.ArgumentParser) -> RunConfig:
    """
    Merges --config FILE (lower precedence) with explicit flags and validates.
    Raises ConfigurationError with the subcommand usage on failure.
    """
    values: Dict[str, Any] = {}
    flags = {k: v for k, v in vars(args).items() if k not in ("handler", "model", "command", "parser")}
    config_path = flags.pop("config", None)
    if config_path:
        values.update(load_config_file(config_path))
    values.update(flags)
    try:
        return model(**values)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigurationError(f"{parser.format_usage().strip()}\n{parser.prog}: error: {problems}") from e


def add_common_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="key=value file (or a previous JSON result) with default settings")
    parser.add_argument("--format", choices=["csv", "json"], help="output format")
    parser.add_argument("--out", help="output path")


def add_simulation_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--sigma", type=float, help="diffusion strength")
    parser.add_argument("--T", type=float, help="final time")
    parser.add_argument("--K", type=int, help="Fourier truncation order")
    parser.add_argument("--M", type=int, help="product grid size (at least 3K+1)")
    parser.add_argument("--dt", type=float, help="time step")
    parser.add_argument("--output-interval", dest="output_interval", type=float, help="time between records")


def add_noise_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--gamma", type=float, help="covariance decay exponent (> 1/2)")
    parser.add_argument("--c", type=float, help="covariance scale")
    parser.add_argument("--seed", type=int, help="random seed")
    parser.add_argument("--strong-feller", dest="strong_feller", action="store_const", const=True,
                        help="enforce the strong Feller growth condition (gamma < 1)")


def pde_config(cfg: SimulationConfig, run_id: Optional[str] = None, **overrides) -> PdeConfig:
    """The double-well solver configuration described by the resolved flags."""
    settings = dict(K=cfg.K, M=cfg.M, dt=cfg.dt, T=cfg.T, output_interval=cfg.output_interval, run_id=run_id)
    settings.update(overrides)
    return PdeConfig.double_well(cfg.sigma, **settings)


def covariance(cfg: NoiseConfig, no_noise: bool = False) -> CovarianceSpec:
    """c = 0 (or no_noise) switches the noise off; otherwise λ_k² = c (1 + k²)^{−γ}."""
    if no_noise or cfg.c == 0:
        return zero_covariance(cfg.K)
    return covariance_from_growth(cfg.K, cfg.gamma, cfg.c, cfg.strong_feller)


def output_path(cfg: RunConfig, command: str, extension: str) -> str:
    return cfg.out or os.path.join(config.OUTPUT_DIR, f"{command}.{extension}")


def emit_json(data: Dict[str, Any], cfg: RunConfig) -> Dict[str, Any]:
    """Prints the result (with its resolved config) to stdout and to --out when given."""
    payload = dict(data)
    payload["config"] = cfg.model_dump()
    text = file_utils.dumps_precise(payload)
    if cfg.out and cfg.format != "csv":
        if not file_utils.save_json(cfg.out, payload):
            raise ConfigurationError(f"Could not write {cfg.out}")
    sys.stdout.write(text + "\n")
    return payload
