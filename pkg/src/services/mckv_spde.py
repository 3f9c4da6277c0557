# src/services/mckv_spde.py
"""
Stochastic McKean-Vlasov equation with additive Q-coloured noise:

    du = (σ ∂_xx u + ∂_x[(V' + F'∗u) u]) dt + Q^{1/2} dW.

Each step is the deterministic exponential-Euler step of mckv_pde plus one
exact Ornstein-Uhlenbeck increment per Fourier mode. The same increment
drives the tracked stochastic convolution W_A, so u − W_A can be checked
against the random PDE it must solve. The module also builds the explicit
control of the irreducibility argument and runs same-noise ergodicity checks.
"""
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

import src.config as config
from src.services.mckv_pde import PdeConfig, PdeSolver, l2_norm_complex
from src.services.torus_fourier import (
    SpectralField, complex_to_real, duhamel_sum, real_to_complex, resize, squared_modes,
)
from src.utils import files as file_utils
from src.utils.error_handler import ConfigurationError, UncontrollableModeError
from src.utils.logging import get_run_logger

logger = logging.getLogger(__name__)


# --- Covariance and noise ---

@dataclass(frozen=True, eq=False)
class CovarianceSpec:
    """Eigenvalues λ_k² of Q on e_k, k = −K..K, stored like SpectralField coefficients."""
    lambda_sq: np.ndarray
    gamma: float = float("nan")
    c: float = float("nan")
    strong_feller: bool = False

    def __post_init__(self):
        lambda_sq = np.asarray(self.lambda_sq, dtype=float)
        if lambda_sq.ndim != 1 or lambda_sq.size % 2 == 0:
            raise ConfigurationError(f"Covariance needs 2K+1 eigenvalues, got shape {lambda_sq.shape}")
        if np.any(lambda_sq < 0) or not np.all(np.isfinite(lambda_sq)):
            raise ConfigurationError("Covariance eigenvalues must be finite and non-negative")
        object.__setattr__(self, "lambda_sq", lambda_sq)

    @property
    def K(self) -> int:
        return (self.lambda_sq.size - 1) // 2

    @property
    def lambdas(self) -> np.ndarray:
        return np.sqrt(self.lambda_sq)

    @property
    def trace(self) -> float:
        return float(self.lambda_sq.sum())

    @property
    def is_zero(self) -> bool:
        return not np.any(self.lambda_sq)

    def resized(self, K: int) -> "CovarianceSpec":
        if K == self.K:
            return self
        out = np.zeros(2 * K + 1)
        keep = min(K, self.K)
        out[K - keep:K + keep + 1] = self.lambda_sq[self.K - keep:self.K + keep + 1]
        return CovarianceSpec(out, self.gamma, self.c, self.strong_feller)

    def without_mass(self) -> "CovarianceSpec":
        """Same spectrum with λ_0² = 0, so the noise keeps the total mass fixed."""
        lambda_sq = self.lambda_sq.copy()
        lambda_sq[self.K] = 0.0
        return CovarianceSpec(lambda_sq, self.gamma, self.c, self.strong_feller)


def covariance_from_growth(K: int, gamma: float = None, c: float = None,
                           strong_feller: bool = False) -> CovarianceSpec:
    """λ_k² = c (1 + k²)^{−γ}; trace-class as K → ∞ needs γ > 1/2."""
    gamma = config.SPDE_GAMMA if gamma is None else gamma
    c = config.SPDE_SCALE if c is None else c
    if not c > 0:
        raise ConfigurationError(f"Covariance scale c must be positive, got {c}")
    if not gamma > 0.5:
        raise ConfigurationError(f"Covariance exponent gamma must exceed 1/2 for trace class, got {gamma}")
    if strong_feller and not gamma < 1.0:
        raise ConfigurationError(f"The strong Feller growth condition needs gamma < 1, got {gamma}")
    lambda_sq = c * (1.0 + squared_modes(K)) ** (-gamma)
    spec = CovarianceSpec(lambda_sq, gamma, c, strong_feller)
    logger.debug(f"Covariance gamma={gamma}, c={c}, K={K}: trace {spec.trace:.6g}")
    return spec


def zero_covariance(K: int) -> CovarianceSpec:
    return CovarianceSpec(np.zeros(2 * K + 1), c=0.0)


class NoiseStream:
    """Seeded source of independent standard Gaussians, one per mode and step."""

    def __init__(self, seed, generator: Optional[np.random.Generator] = None):
        self.seed = seed
        self.generator = generator or np.random.Generator(np.random.PCG64(seed))

    def standard_normal(self, size) -> np.ndarray:
        return self.generator.standard_normal(size)

    def normal(self, std: np.ndarray) -> np.ndarray:
        return std * self.generator.standard_normal(np.shape(std))

    @classmethod
    def spawn(cls, seed: int, count: int) -> List["NoiseStream"]:
        """Statistically independent child streams for Monte Carlo ensembles."""
        children = np.random.SeedSequence(seed).spawn(count)
        return [cls((seed, i), np.random.Generator(np.random.PCG64(child))) for i, child in enumerate(children)]


def ou_std(lambda_sq, rates, dt: float) -> np.ndarray:
    """Exact standard deviation of one OU increment: λ²(1 − e^{−2r dt})/(2r), or λ² dt when r = 0."""
    lambda_sq = np.asarray(lambda_sq, dtype=float)
    rates = np.asarray(rates, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        variance = np.where(
            rates > 0,
            lambda_sq * -np.expm1(-2.0 * rates * dt) / (2.0 * np.where(rates > 0, rates, 1.0)),
            lambda_sq * dt,
        )
    return np.sqrt(variance)


def ou_update(wa_k, k: int, lambda_k: float, dt: float, noise: NoiseStream, diffusion: float = 1.0):
    """One exact-in-distribution step of the stochastic convolution on mode k (scalar or sample array)."""
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    rate = diffusion * k * k
    wa_k = np.asarray(wa_k, dtype=float)
    std = ou_std(lambda_k ** 2, rate, dt)
    updated = math.exp(-rate * dt) * wa_k + std * noise.standard_normal(wa_k.shape)
    return float(updated) if updated.ndim == 0 else updated


def smooth_cutoff(x, R: float):
    """ξ_R: 1 on [0, R], 0 beyond R + 1, quintic smoothstep in between (C²)."""
    if not R > 0:
        raise ConfigurationError(f"Cutoff radius must be positive, got {R}")
    s = np.clip(np.asarray(x, dtype=float) - R, 0.0, 1.0)
    value = 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)
    return float(value) if value.ndim == 0 else value


# --- Stepping ---

@dataclass(frozen=True)
class SpdeState:
    u: SpectralField
    wa: SpectralField
    t: float = 0.0


class SpdeSolver:
    """A PdeSolver plus the per-mode OU weights for one (config, covariance) pair."""

    def __init__(self, cfg: PdeConfig, Q: CovarianceSpec, cutoff_R: Optional[float] = None):
        if cutoff_R is not None and not cutoff_R > 0:
            raise ConfigurationError(f"Cutoff radius must be positive, got {cutoff_R}")
        self.cfg = cfg
        self.pde = PdeSolver(cfg)
        self.Q = Q.resized(cfg.K)
        rates = cfg.sigma * squared_modes(cfg.K)
        self.decay = np.exp(-rates * cfg.dt)
        self.std = ou_std(self.Q.lambda_sq, rates, cfg.dt)
        self.cutoff_R = cutoff_R

    def weight(self, z: np.ndarray) -> float:
        if self.cutoff_R is None:
            return 1.0
        return smooth_cutoff(l2_norm_complex(z) ** 2, self.cutoff_R)

    def draw(self, noise: NoiseStream) -> np.ndarray:
        return noise.normal(self.std)

    def advance(self, z: np.ndarray, wa: np.ndarray, t: float, eta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """u in exponential coefficients, wa in real-basis coefficients, eta the shared increment."""
        z_next = self.pde.advance(z, t, self.pde.nonlinear(z, self.weight(z))) + real_to_complex(eta)
        return z_next, self.decay * wa + eta


def spde_step(state: SpdeState, cfg: PdeConfig, Q: CovarianceSpec, noise: NoiseStream,
              cutoff_R: Optional[float] = None) -> SpdeState:
    solver = SpdeSolver(cfg, Q, cutoff_R)
    z, wa = solver.advance(solver.pde.to_complex(state.u), resize(state.wa, cfg.K).coeffs,
                           state.t, solver.draw(noise))
    return SpdeState(solver.pde.to_field(z), SpectralField(wa), state.t + cfg.dt)


def truncated_nonlinearity(u: SpectralField, R: float, cfg: Optional[PdeConfig] = None) -> SpectralField:
    """
    ∂_x[(V' + ξ_R(‖u‖²) F'∗u) u] at cfg.K modes.

    cfg only supplies V and F (σ and dt play no part); without it the
    double-well pair of default_potentials at u.K is used.
    """
    cfg = cfg or PdeConfig.double_well(1.0, K=u.K)
    solver = PdeSolver(cfg)
    z = solver.to_complex(u)
    weight = smooth_cutoff(l2_norm_complex(z) ** 2, R)
    return solver.to_field(solver.nonlinear(z, weight))


@dataclass
class SpdeTrajectory:
    rows: List[Tuple[float, float, float, float, float]] = field(default_factory=list)
    final: Optional[SpdeState] = None
    seed: object = None

    CSV_HEADER = ("t", "m1", "m2", "l2_norm", "mass_mode")

    def write_csv(self, path: str) -> str:
        return file_utils.write_csv(path, self.CSV_HEADER, self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([row[self.CSV_HEADER.index(name)] for row in self.rows])


def _observables(z: np.ndarray, t: float) -> Tuple[float, float, float, float, float]:
    return (t, 2.0 * math.pi * z[1].real, -2.0 * math.pi * z[1].imag, l2_norm_complex(z), 2.0 * math.pi * z[0].real)


def simulate(u0: SpectralField, cfg: PdeConfig, Q: CovarianceSpec, seed: int = 0,
             cutoff_R: Optional[float] = None, noise: Optional[NoiseStream] = None) -> SpdeTrajectory:
    """One SPDE path from u0, observed every cfg.output_interval."""
    solver = SpdeSolver(cfg, Q, cutoff_R)
    noise = noise or NoiseStream(seed)
    run_logger = get_run_logger(cfg.run_id) if cfg.run_id else logger
    stride = max(1, int(round(cfg.output_interval / cfg.dt)))
    z = solver.pde.to_complex(u0)
    wa = np.zeros(2 * cfg.K + 1)
    trajectory = SpdeTrajectory(seed=noise.seed)
    trajectory.rows.append(_observables(z, 0.0))
    t = 0.0
    for i in range(1, cfg.steps + 1):
        z, wa = solver.advance(z, wa, t, solver.draw(noise))
        t = i * cfg.dt
        if i % stride == 0 or i == cfg.steps:
            trajectory.rows.append(_observables(z, t))
    trajectory.final = SpdeState(solver.pde.to_field(z), SpectralField(wa), t)
    run_logger.info(f"SPDE path seed={noise.seed} reached t={t:.4g}, trace(Q)={solver.Q.trace:.4g}")
    return trajectory


def decomposition_error(u0: SpectralField, cfg: PdeConfig, Q: CovarianceSpec, seed: int = 0) -> float:
    """
    L² gap at T between the direct path u and v + W_A, where v solves the random PDE
    ∂_t v = σ ∂_xx v + ∂_x[(V' + F'∗(v + W_A))(v + W_A)] from v(0) = u0.

    W_A is rebuilt from its own stream with the same seed and v is integrated
    with ETD2RK, W_A taken at both ends of each step. The two sides share only
    the noise realization, so the gap is a discretization error of order dt.
    """
    solver = SpdeSolver(cfg, Q)
    pde = solver.pde
    second = cfg.dt * phi2(-pde.rates * cfg.dt)

    direct = simulate(u0, cfg, Q, noise=NoiseStream(seed))
    convolution = NoiseStream(seed)

    v = pde.to_complex(u0)
    wa = np.zeros(2 * cfg.K + 1)
    for i in range(cfg.steps):
        t = i * cfg.dt
        wa_next = solver.decay * wa + convolution.normal(solver.std)
        g = pde.nonlinear(v + real_to_complex(wa))
        predictor = pde.advance(v, t, g)
        v = predictor + second * (pde.nonlinear(predictor + real_to_complex(wa_next)) - g)
        wa = wa_next

    u = pde.to_complex(direct.final.u)
    return l2_norm_complex(u - (v + real_to_complex(wa)))


# --- Control ---

def phi2(z: np.ndarray) -> np.ndarray:
    """φ₂(z) = (e^z − 1 − z)/z² with a Taylor branch near zero."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-3
    safe = np.where(small, 1.0, z)
    return np.where(small, 0.5 + z / 6.0 + z * z / 24.0, (np.expm1(safe) - safe) / (safe * safe))


@dataclass(frozen=True)
class ControlSignal:
    """
    f(t) = Q^{−1/2} β(t) steering the controlled system along the straight
    path α(t) = ((T − t)/T) y0 + (t/T) y1.
    """
    y0: SpectralField
    y1: SpectralField
    T: float
    lambdas: np.ndarray
    cfg: PdeConfig

    def __post_init__(self):
        object.__setattr__(self, "_solver", PdeSolver(self.cfg))

    def alpha(self, t: float) -> np.ndarray:
        return ((self.T - t) / self.T) * self.y0.coeffs + (t / self.T) * self.y1.coeffs

    def beta(self, t: float) -> np.ndarray:
        """∂_t α − Aα − ∂_x[(V' + F'∗α) α]."""
        z = real_to_complex(self.alpha(t))
        residual = complex_to_real(self._solver.linear(z) + self._solver.nonlinear(z))
        return (self.y1.coeffs - self.y0.coeffs) / self.T - residual

    def at(self, t: float) -> SpectralField:
        beta = self.beta(t)
        active = self.lambdas > 0
        f = np.zeros_like(beta)
        f[active] = beta[active] / self.lambdas[active]
        return SpectralField(f)

    def forcing(self, t: float) -> np.ndarray:
        """Q^{1/2} f(t) in real-basis coefficients."""
        return self.lambdas * self.at(t).coeffs


def build_control(y0: SpectralField, y1: SpectralField, T: float, Q: CovarianceSpec,
                  cfg: PdeConfig, eps: float = 1e-10, checks: int = 11) -> ControlSignal:
    if not T > 0:
        raise ConfigurationError(f"Control horizon must be positive, got {T}")
    K = cfg.K
    control = ControlSignal(resize(y0, K), resize(y1, K), T, Q.resized(K).lambdas, cfg)
    dead = control.lambdas == 0
    if np.any(dead):
        for t in np.linspace(0.0, T, checks):
            beta = control.beta(t)
            if np.any(np.abs(beta[dead]) > eps):
                modes = (np.nonzero(dead & (np.abs(beta) > eps))[0] - K).tolist()
                raise UncontrollableModeError(f"Noise vanishes on modes {modes} that the control must drive")
    return control


def integrate_controlled(y0: SpectralField, control: ControlSignal, Q: CovarianceSpec,
                         cfg: PdeConfig) -> SpectralField:
    """
    ∂_t y = A y + ∂_x[(V' + F'∗y) y] + Q^{1/2} f(t) on [0, control.T] with
    second-order exponential Runge-Kutta (ETD2RK).
    """
    lambdas = Q.resized(cfg.K).lambdas
    solver = PdeSolver(cfg)
    dt = cfg.dt
    steps = max(1, int(round(control.T / dt)))
    second = dt * phi2(-solver.rates * dt)

    def forcing(t):
        return real_to_complex(lambdas * control.at(t).coeffs)

    z = solver.to_complex(y0)
    for i in range(steps):
        t = i * dt
        g = solver.nonlinear(z) + forcing(t)
        predictor = solver.advance(z, t, g)
        g_pred = solver.nonlinear(predictor) + forcing(t + dt)
        z = predictor + second * (g_pred - g)
    return solver.to_field(z)


def deterministic_convolution(control: ControlSignal, Q: CovarianceSpec, cfg: PdeConfig,
                              t: Optional[float] = None) -> SpectralField:
    """f_A(t) = ∫_0^t e^{(t−s)A} Q^{1/2} f(s) ds with f sampled at step midpoints."""
    t = control.T if t is None else t
    steps = max(1, int(round(t / cfg.dt)))
    dt = t / steps
    lambdas = Q.resized(cfg.K).lambdas
    samples = np.stack([lambdas * control.at((i + 0.5) * dt).coeffs for i in range(steps)])
    return SpectralField(duhamel_sum(samples, dt, cfg.sigma * squared_modes(cfg.K)))


# --- Ergodicity ---

@dataclass
class ErgodicityReport:
    seed: object
    times: np.ndarray
    pairs: List[Tuple[int, int]]
    distances: np.ndarray          # (snapshots, pairs)
    time_averages: np.ndarray      # (initial data, [m1, m2, ‖u‖²])

    def to_dict(self):
        return {
            "seed": str(self.seed),
            "final_distances": self.distances[-1].tolist(),
            "max_distance": float(self.distances.max()) if self.distances.size else 0.0,
            "time_averages": [dict(zip(("m1", "m2", "l2_sq"), row)) for row in self.time_averages.tolist()],
        }


def ergodicity_probe(u0_list: Sequence[SpectralField], cfg: PdeConfig, Q: CovarianceSpec,
                     seed: int = 0, t_burn: float = 0.0,
                     noise: Optional[NoiseStream] = None) -> ErgodicityReport:
    """Runs every initial datum under one shared noise realization."""
    if len(u0_list) < 2:
        raise ConfigurationError("Same-noise comparison needs at least two initial data")
    if not 0 <= t_burn < cfg.T:
        raise ConfigurationError(f"Burn-in {t_burn} must lie in [0, T={cfg.T})")
    solver = SpdeSolver(cfg, Q)
    noise = noise or NoiseStream(seed)
    stride = max(1, int(round(cfg.output_interval / cfg.dt)))
    states = [solver.pde.to_complex(u0) for u0 in u0_list]
    was = [np.zeros(2 * cfg.K + 1) for _ in u0_list]
    pairs = list(combinations(range(len(u0_list)), 2))

    times, distances = [], []
    sums = np.zeros((len(u0_list), 3))
    samples = 0

    def observe(t):
        nonlocal samples
        times.append(t)
        distances.append([l2_norm_complex(states[a] - states[b]) for a, b in pairs])
        if t >= t_burn:
            for j, z in enumerate(states):
                sums[j] += (2.0 * math.pi * z[1].real, -2.0 * math.pi * z[1].imag, l2_norm_complex(z) ** 2)
            samples += 1

    observe(0.0)
    t = 0.0
    for i in range(1, cfg.steps + 1):
        eta = solver.draw(noise)
        for j in range(len(states)):
            states[j], was[j] = solver.advance(states[j], was[j], t, eta)
        t = i * cfg.dt
        if i % stride == 0 or i == cfg.steps:
            observe(t)

    return ErgodicityReport(noise.seed, np.array(times), pairs, np.array(distances), sums / max(samples, 1))


@dataclass
class ErgodicityExperiment:
    seeds: List[int]
    m2_averages: np.ndarray        # (seeds, initial data)

    @property
    def mean(self) -> np.ndarray:
        return self.m2_averages.mean(axis=0)

    @property
    def standard_error(self) -> np.ndarray:
        return self.m2_averages.std(axis=0, ddof=1) / math.sqrt(self.m2_averages.shape[0])

    @property
    def agree(self) -> bool:
        """Pairwise |Δ mean| within three combined standard errors."""
        mean, se = self.mean, self.standard_error
        return all(abs(mean[a] - mean[b]) <= 3.0 * math.hypot(se[a], se[b])
                   for a, b in combinations(range(mean.size), 2))

    def to_dict(self):
        return {
            "seeds": list(self.seeds),
            "mean_m2": self.mean.tolist(),
            "standard_error_m2": self.standard_error.tolist(),
            "agree": self.agree,
        }


def time_averaged_m2(job) -> List[float]:
    """Module-level worker for process pools: (initial coeffs, cfg, Q, seed, t_burn) -> averaged m2 per datum."""
    coeffs, cfg, Q, seed, t_burn = job
    report = ergodicity_probe([SpectralField(c) for c in coeffs], cfg, Q, seed, t_burn)
    return report.time_averages[:, 1].tolist()


def ergodicity_experiment(u0_list: Sequence[SpectralField], cfg: PdeConfig, Q: CovarianceSpec,
                          seeds: Sequence[int], t_burn: float = 0.0,
                          mapper: Callable = map) -> ErgodicityExperiment:
    """Repeats ergodicity_probe over independent seeds; mapper may be a parallel map."""
    if len(seeds) < 2:
        raise ConfigurationError("Standard errors need at least two seeds")
    coeffs = [u.coeffs for u in u0_list]
    jobs = [(coeffs, cfg, Q, seed, t_burn) for seed in seeds]
    averages = np.array(list(mapper(time_averaged_m2, jobs)))
    return ErgodicityExperiment(list(seeds), averages)
