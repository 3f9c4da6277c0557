# src/services/mckv_pde.py
"""
Deterministic McKean-Vlasov solver on the torus:

    ∂_t ρ = σ ∂_xx ρ + ∂_x[(V' + F'∗ρ) ρ]

integrated in spectral space with exponential (integrating-factor) Euler.
The transport term is evaluated pseudo-spectrally on a grid large enough
that the quadratic product does not alias back onto the retained modes.
"""
import logging
import math
import os
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

import src.config as config
from src.services.torus_fourier import (
    SQRT_2PI, SQRT_PI, TWO_PI, GridFunction, SpectralField, complex_to_grid, complex_to_real,
    derivative_coeffs, grid_nodes, grid_to_complex, real_to_complex, resize, to_spectral,
)
from src.utils import files as file_utils
from src.utils.error_handler import BlowUpError, ConfigurationError
from src.utils.logging import get_run_logger

logger = logging.getLogger(__name__)


def default_potentials(K: int) -> Tuple[SpectralField, SpectralField]:
    """V(x) = cos 2x and F(x) = −cos x."""
    if K < 2:
        raise ConfigurationError(f"The double-well potential needs K >= 2, got {K}")
    V = np.zeros(2 * K + 1)
    F = np.zeros(2 * K + 1)
    V[K - 2] = SQRT_PI
    F[K - 1] = -SQRT_PI
    return SpectralField(V), SpectralField(F)


def product_grid(K: int) -> int:
    """Smallest admissible product grid for K modes, never below the configured default."""
    minimum = 3 * K + 1
    return max(config.PDE_GRID, minimum + minimum % 2)


@dataclass(frozen=True)
class PdeConfig:
    sigma: float
    V: SpectralField
    F: SpectralField
    K: int = config.PDE_MODES
    dt: float = config.PDE_DT
    T: float = 1.0
    M: int = config.PDE_GRID
    output_interval: float = 0.1
    stop_when_stationary: bool = False
    keep_densities: bool = False
    run_id: Optional[str] = None

    def __post_init__(self):
        for name in ("sigma", "dt", "T", "output_interval"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.K < 1:
            raise ConfigurationError(f"K must be at least 1, got {self.K}")
        if self.M < 3 * self.K + 1 or self.M % 2:
            raise ConfigurationError(f"Product grid M={self.M} must be even and at least 3K+1={3 * self.K + 1}")

    @classmethod
    def double_well(cls, sigma: float, **kwargs) -> "PdeConfig":
        K = kwargs.get("K", config.PDE_MODES)
        if kwargs.get("M") is None:
            kwargs["M"] = product_grid(K)
        V, F = default_potentials(K)
        return cls(sigma=sigma, V=V, F=F, **kwargs)

    @property
    def steps(self) -> int:
        return max(1, int(round(self.T / self.dt)))


@dataclass(frozen=True)
class PdeState:
    rho: SpectralField
    t: float = 0.0


@dataclass(frozen=True)
class PdeSnapshot:
    t: float
    m1: float
    m2: float
    mass: float
    min_value: float
    l2_residual: float
    l1_norm: float
    l2_norm: float

    CSV_HEADER = ("t", "m1", "m2", "mass", "min_value", "l2_residual", "l1_norm", "l2_norm")

    def as_row(self) -> Tuple[float, ...]:
        return (self.t, self.m1, self.m2, self.mass, self.min_value, self.l2_residual, self.l1_norm, self.l2_norm)


@dataclass
class PdeTrajectory:
    snapshots: List[PdeSnapshot] = field(default_factory=list)
    densities: List[Tuple[float, GridFunction]] = field(default_factory=list)
    final: Optional[PdeState] = None
    steps_taken: int = 0
    stationary: bool = False
    positivity_violations: int = 0

    def write_csv(self, path: str) -> str:
        return file_utils.write_csv(path, PdeSnapshot.CSV_HEADER, (s.as_row() for s in self.snapshots))

    def write_density_csv(self, path: str) -> str:
        rows = ((t, x, v) for t, g in self.densities for x, v in g.to_csv_rows())
        return file_utils.write_csv(path, ("t", "x", "rho"), rows)


def phi1(z: np.ndarray) -> np.ndarray:
    """φ₁(z) = (e^z − 1)/z with a Taylor branch near zero."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-4
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 + z / 2.0 + z * z / 6.0, np.expm1(safe) / safe)


def l2_norm_complex(z: np.ndarray) -> float:
    """L² norm of a real function from its one-sided exponential coefficients."""
    return math.sqrt(TWO_PI * (abs(z[0]) ** 2 + 2.0 * float(np.sum(np.abs(z[1:]) ** 2))))


class PdeSolver:
    """Precomputed exponential-Euler weights and the transport operator for one configuration."""

    def __init__(self, cfg: PdeConfig):
        self.cfg = cfg
        self.K = cfg.K
        self.M = cfg.M
        self.n = np.arange(cfg.K + 1)
        self.rates = cfg.sigma * self.n.astype(float) ** 2
        self.decay = np.exp(-self.rates * cfg.dt)
        self.weights = cfg.dt * phi1(-self.rates * cfg.dt)
        self.v_prime = real_to_complex(derivative_coeffs(resize(cfg.V, cfg.K).coeffs))
        self.f_prime = real_to_complex(derivative_coeffs(resize(cfg.F, cfg.K).coeffs))
        self.ik = 1j * self.n

    def interaction(self, z: np.ndarray) -> np.ndarray:
        """Exponential coefficients of F'∗ρ."""
        return TWO_PI * self.f_prime * z

    def nonlinear(self, z: np.ndarray, weight: float = 1.0) -> np.ndarray:
        """∂_x[(V' + w·F'∗ρ) ρ] in exponential coefficients; w scales only the interaction."""
        drift = self.v_prime + weight * self.interaction(z)
        product = complex_to_grid(drift, self.M) * complex_to_grid(z, self.M)
        return self.ik * grid_to_complex(product, self.K)

    def linear(self, z: np.ndarray) -> np.ndarray:
        return -self.rates * z

    def advance(self, z: np.ndarray, t: float, nonlinear: Optional[np.ndarray] = None) -> np.ndarray:
        if nonlinear is None:
            nonlinear = self.nonlinear(z)
        z_next = self.decay * z + self.weights * nonlinear
        if not np.all(np.isfinite(z_next)):
            raise BlowUpError(t + self.cfg.dt)
        return z_next

    def to_complex(self, rho: SpectralField) -> np.ndarray:
        return real_to_complex(resize(rho, self.K).coeffs)

    def to_field(self, z: np.ndarray) -> SpectralField:
        return SpectralField(complex_to_real(z))

    def grid_values(self, z: np.ndarray) -> np.ndarray:
        return complex_to_grid(z, self.M)

    def snapshot(self, z: np.ndarray, t: float) -> PdeSnapshot:
        values = self.grid_values(z)
        residual = self.linear(z) + self.nonlinear(z)
        return PdeSnapshot(
            t=t,
            m1=2.0 * math.pi * z[1].real if self.K else 0.0,
            m2=-2.0 * math.pi * z[1].imag if self.K else 0.0,
            mass=TWO_PI * z[0].real,
            min_value=float(values.min()),
            l1_norm=float(np.abs(values).mean() * TWO_PI),
            l2_norm=l2_norm_complex(z),
            l2_residual=l2_norm_complex(residual),
        )


def rhs(rho: SpectralField, cfg: PdeConfig) -> SpectralField:
    solver = PdeSolver(cfg)
    z = solver.to_complex(rho)
    return solver.to_field(solver.linear(z) + solver.nonlinear(z))


def step(state: PdeState, cfg: PdeConfig) -> PdeState:
    solver = PdeSolver(cfg)
    z = solver.advance(solver.to_complex(state.rho), state.t)
    return PdeState(solver.to_field(z), state.t + cfg.dt)


def evolve(rho0: SpectralField, cfg: PdeConfig) -> PdeTrajectory:
    """
    Integrates from rho0 to cfg.T, recording a PdeSnapshot every
    cfg.output_interval. With cfg.stop_when_stationary the run ends once
    ‖ρ_{n+1} − ρ_n‖/dt drops below the stationarity tolerance.
    """
    mass = SQRT_2PI * rho0.coefficient(0)
    if abs(mass - 1.0) > 1e-6:
        raise ConfigurationError(f"Initial density must integrate to 1, got {mass:.12g}")

    run_logger = get_run_logger(cfg.run_id) if cfg.run_id else logger
    solver = PdeSolver(cfg)
    stride = max(1, int(round(cfg.output_interval / cfg.dt)))
    trajectory = PdeTrajectory()
    z = solver.to_complex(rho0)
    t = 0.0

    def record(z_now, t_now):
        snap = solver.snapshot(z_now, t_now)
        trajectory.snapshots.append(snap)
        if snap.min_value < -config.POSITIVITY_TOL:
            if trajectory.positivity_violations == 0:
                run_logger.warning(f"Density dipped to {snap.min_value:.3e} at t={t_now:.4g}")
            trajectory.positivity_violations += 1
        if cfg.keep_densities:
            trajectory.densities.append((t_now, GridFunction(solver.grid_values(z_now))))

    record(z, t)
    for i in range(1, cfg.steps + 1):
        z_next = solver.advance(z, t)
        change = l2_norm_complex(z_next - z) / cfg.dt
        z, t = z_next, i * cfg.dt
        trajectory.steps_taken = i
        if cfg.stop_when_stationary and change < config.STATIONARITY_TOL:
            trajectory.stationary = True
            run_logger.info(f"Stationary at t={t:.4g} (rate of change {change:.3e})")
            record(z, t)
            break
        if i % stride == 0 or i == cfg.steps:
            record(z, t)

    trajectory.final = PdeState(solver.to_field(z), t)
    logger.debug(f"PDE run finished at t={t:.4g} after {trajectory.steps_taken} steps")
    return trajectory


# --- Initial data ---

def uniform_density(K: int) -> SpectralField:
    c = np.zeros(2 * K + 1)
    c[K] = 1.0 / SQRT_2PI
    return SpectralField(c)


def perturbed_uniform(K: int, epsilon: float = 0.1) -> SpectralField:
    """(1 + ε cos x)/(2π)."""
    rho = uniform_density(K)
    c = rho.coeffs.copy()
    c[K - 1] = epsilon * SQRT_PI / TWO_PI
    return SpectralField(c)


def bump_density(x0: float, kappa: float, K: int) -> SpectralField:
    """von Mises bump ∝ e^{κ cos(x − x0)} centred at x0."""
    if kappa < 0:
        raise ConfigurationError(f"Concentration must be non-negative, got {kappa}")
    x = grid_nodes(config.FOURIER_NODES)
    values = np.exp(kappa * (np.cos(x - x0) - 1.0))
    values /= values.mean() * TWO_PI
    return to_spectral(GridFunction(values), K)


def density_from_csv(path: str, K: int) -> SpectralField:
    columns = file_utils.read_csv_columns(path)
    if "rho" not in columns:
        raise ConfigurationError(f"{path} has no 'rho' column")
    values = columns["rho"]
    values = values / (values.mean() * TWO_PI)
    return to_spectral(GridFunction(values), K)


def initial_density(spec: str, K: int) -> SpectralField:
    """
    Parses 'uniform', 'perturbed[:eps]', 'bump:x0[:kappa]' or a CSV path
    with a 'rho' column sampled on an equispaced grid.
    """
    name, _, args = spec.partition(":")
    try:
        if name == "uniform":
            return uniform_density(K)
        if name == "perturbed":
            return perturbed_uniform(K, float(args) if args else 0.1)
        if name == "bump":
            parts = args.split(":")
            x0 = float(parts[0]) if parts[0] else math.pi / 2
            kappa = float(parts[1]) if len(parts) > 1 else 5.0
            return bump_density(x0, kappa, K)
    except ValueError as e:
        raise ConfigurationError(f"Malformed initial condition '{spec}': {e}") from e
    if os.path.isfile(spec):
        return density_from_csv(spec, K)
    raise ConfigurationError(f"Unknown initial condition '{spec}'")
