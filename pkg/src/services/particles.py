# src/services/particles.py
"""
Service module for the N-particle system on the torus

    dX_i = [−V'(X_i) + (1/N) Σ_j F'(X_j − X_i)] dt + √(2σ) dβ_i,

simulated with Euler-Maruyama, and for the propagation-of-chaos comparison
of its empirical moments with the mean-field PDE.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

import src.config as config
from src.services import mckv_pde
from src.services.mckv_spde import NoiseStream
from src.services.torus_fourier import SQRT_2PI, SQRT_PI, TWO_PI, SpectralField, derivative, evaluate
from src.utils import files as file_utils
from src.utils.error_handler import ConfigurationError

logger = logging.getLogger(__name__)


def wrap(positions: np.ndarray) -> np.ndarray:
    """Reduces angles to [0, 2π)."""
    wrapped = np.mod(positions, TWO_PI)
    # tiny negatives round up to exactly 2π
    return np.where(wrapped >= TWO_PI, wrapped - TWO_PI, wrapped)


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    positions: np.ndarray
    t: float = 0.0
    seed: Optional[object] = None

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=float).ravel()
        if positions.size < 1:
            raise ConfigurationError("An ensemble needs at least one particle")
        object.__setattr__(self, "positions", wrap(positions))

    @property
    def N(self) -> int:
        return self.positions.size


def sample_initial(n: int, init: str, rng: np.random.Generator) -> np.ndarray:
    """Draws n positions from 'uniform', 'perturbed[:eps]' or 'bump:x0[:kappa]' (von Mises)."""
    if n < 1:
        raise ConfigurationError(f"Particle count must be positive, got {n}")
    name, _, args = init.partition(":")
    try:
        if name == "uniform":
            return rng.uniform(0.0, TWO_PI, n)
        if name == "bump":
            parts = args.split(":")
            x0 = float(parts[0]) if parts[0] else math.pi / 2
            kappa = float(parts[1]) if len(parts) > 1 else 5.0
            return wrap(rng.vonmises(x0, kappa, n))
        if name == "perturbed":
            epsilon = float(args) if args else 0.1
            samples = np.empty(0)
            while samples.size < n:
                x = rng.uniform(0.0, TWO_PI, 2 * n)
                keep = rng.uniform(0.0, 1.0 + abs(epsilon), 2 * n) < 1.0 + epsilon * np.cos(x)
                samples = np.concatenate([samples, x[keep]])
            return samples[:n]
    except ValueError as e:
        raise ConfigurationError(f"Malformed initial condition '{init}': {e}") from e
    raise ConfigurationError(f"Particles support uniform, perturbed and bump initial data, got '{init}'")


def empirical_moments(ens: ParticleEnsemble) -> Tuple[float, float]:
    return float(np.cos(ens.positions).mean()), float(np.sin(ens.positions).mean())


def histogram_density(ens: ParticleEnsemble, bins: int = None) -> Tuple[np.ndarray, np.ndarray]:
    """Bin centres and a density estimate integrating to one."""
    bins = bins or config.HISTOGRAM_BINS
    values, edges = np.histogram(ens.positions, bins=bins, range=(0.0, TWO_PI), density=True)
    return 0.5 * (edges[:-1] + edges[1:]), values


def _interaction_fast(positions: np.ndarray, F: SpectralField) -> np.ndarray:
    """(1/N) Σ_j F'(X_j − X_i) from the empirical Fourier moments of the ensemble."""
    d = derivative(F).coeffs
    K = F.K
    out = np.full(positions.shape, d[K] / SQRT_2PI)
    for n in range(1, K + 1):
        a, b = d[K - n], d[K + n]
        if not (a or b):
            continue
        cos_n, sin_n = np.cos(n * positions), np.sin(n * positions)
        C, S = cos_n.mean(), sin_n.mean()
        out += (a * (C * cos_n + S * sin_n) + b * (S * cos_n - C * sin_n)) / SQRT_PI
    return out


def _interaction_pairwise(positions: np.ndarray, F: SpectralField) -> np.ndarray:
    differences = positions[None, :] - positions[:, None]
    return evaluate(derivative(F), differences).mean(axis=1)


def drift(ens: ParticleEnsemble, V: SpectralField, F: SpectralField, pairwise: bool = False) -> np.ndarray:
    """
    −V'(X_i) + (1/N) Σ_j F'(X_j − X_i). The default path costs O(N · deg F);
    pairwise=True is the O(N²) direct sum.

    For odd F' this equals −(1/N) Σ_j F'(X_i − X_j), the other common form.
    """
    interaction = (_interaction_pairwise if pairwise else _interaction_fast)(ens.positions, F)
    return -evaluate(derivative(V), ens.positions) + interaction


def em_step(ens: ParticleEnsemble, V: SpectralField, F: SpectralField, sigma: float, dt: float,
            noise: NoiseStream) -> ParticleEnsemble:
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if sigma < 0:
        raise ConfigurationError(f"Diffusion sigma must be non-negative, got {sigma}")
    kick = math.sqrt(2.0 * sigma * dt) * noise.standard_normal(ens.N)
    return ParticleEnsemble(ens.positions + drift(ens, V, F) * dt + kick, ens.t + dt, ens.seed)


@dataclass
class ParticleTrajectory:
    rows: List[Tuple[float, float, float]] = field(default_factory=list)
    final: Optional[ParticleEnsemble] = None

    CSV_HEADER = ("t", "m1_emp", "m2_emp")

    def write_csv(self, path: str) -> str:
        return file_utils.write_csv(path, self.CSV_HEADER, self.rows)


def simulate(ens: ParticleEnsemble, V: SpectralField, F: SpectralField, sigma: float, T: float,
             noise: NoiseStream, dt: float = None, output_interval: float = 0.1) -> ParticleTrajectory:
    dt = dt or config.PARTICLE_DT
    steps = max(1, int(round(T / dt)))
    stride = max(1, int(round(output_interval / dt)))
    trajectory = ParticleTrajectory()
    trajectory.rows.append((ens.t, *empirical_moments(ens)))
    for i in range(1, steps + 1):
        ens = em_step(ens, V, F, sigma, dt, noise)
        if i % stride == 0 or i == steps:
            trajectory.rows.append((ens.t, *empirical_moments(ens)))
    trajectory.final = ens
    logger.debug(f"Particle run N={ens.N} reached t={ens.t:.4g}")
    return trajectory


# --- Propagation of chaos ---

def replicate_moments(job) -> Tuple[float, float]:
    """Module-level worker: (N, sigma, T, dt, init, noise, V, F) -> empirical (m1, m2) at T."""
    N, sigma, T, dt, init, noise, V, F = job
    ens = ParticleEnsemble(sample_initial(N, init, noise.generator), seed=noise.seed)
    final = simulate(ens, V, F, sigma, T, noise, dt=dt, output_interval=T).final
    return empirical_moments(final)


@dataclass
class ChaosReport:
    N_list: List[int]
    pde_moments: Tuple[float, float]
    moments: np.ndarray            # (len(N_list), replicates, 2)

    @property
    def errors(self) -> np.ndarray:
        """Mean over replicates of |m̄_N(T) − m_PDE(T)|."""
        gap = self.moments - np.asarray(self.pde_moments)[None, None, :]
        return np.linalg.norm(gap, axis=2).mean(axis=1)

    @property
    def exponent(self) -> float:
        """Slope of log(error) against log(N)."""
        if len(self.N_list) < 2:
            return float("nan")
        slope, _ = np.polyfit(np.log(self.N_list), np.log(self.errors), 1)
        return float(slope)

    def rows(self):
        means = self.moments.mean(axis=1)
        return [(int(n), float(m[0]), float(m[1]), float(e)) for n, m, e in zip(self.N_list, means, self.errors)]

    def to_dict(self):
        return {
            "pde_m1": self.pde_moments[0],
            "pde_m2": self.pde_moments[1],
            "rows": [dict(zip(("N", "mean_m1", "mean_m2", "error"), row)) for row in self.rows()],
            "exponent": self.exponent,
        }


def chaos_compare(N_list: Sequence[int], sigma: float, T: float, replicates: int, init: str = "uniform",
                  seed: int = 0, dt: float = None, K: int = None, mapper: Callable = map) -> ChaosReport:
    """
    Empirical moments at time T for each N (independent replicates per N)
    against the PDE moments from the same initial density.
    """
    if replicates < 1:
        raise ConfigurationError(f"Replicates must be positive, got {replicates}")
    dt = dt or config.PARTICLE_DT
    K = K or config.PDE_MODES
    cfg = mckv_pde.PdeConfig.double_well(sigma, K=K, dt=dt, T=T, output_interval=T)
    final = mckv_pde.evolve(mckv_pde.initial_density(init, K), cfg).snapshots[-1]
    pde_moments = (final.m1, final.m2)

    streams = NoiseStream.spawn(seed, len(N_list) * replicates)
    jobs = [
        (int(N), sigma, T, dt, init, streams[i * replicates + r], cfg.V, cfg.F)
        for i, N in enumerate(N_list) for r in range(replicates)
    ]
    moments = np.array(list(mapper(replicate_moments, jobs))).reshape(len(N_list), replicates, 2)
    logger.info(f"Chaos comparison at sigma={sigma}: PDE moments {pde_moments}")
    return ChaosReport([int(n) for n in N_list], pde_moments, moments)
