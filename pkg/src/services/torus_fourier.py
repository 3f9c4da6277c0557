# src/services/torus_fourier.py
"""
Service module for 2π-periodic real functions in the real sine/cosine basis

    e_k(x) = sin(kx)/√π  (k > 0),   e_0 = 1/√(2π),   e_k(x) = cos(|k|x)/√π  (k < 0).

A SpectralField of order K stores f_k for k = -K..K at array position k + K.
Convolution and transforms go through the complex exponential coefficients
z_n = (1/2π)∫ u e^{-inx} dx, n = 0..K, which diagonalize convolution and the
heat semigroup.
"""
import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

import src.config as config
from src.utils.error_handler import ConfigurationError

logger = logging.getLogger(__name__)

SQRT_PI = math.sqrt(math.pi)
SQRT_2PI = math.sqrt(2.0 * math.pi)
TWO_PI = 2.0 * math.pi

# Constant C in |∂_x G_t(x)| ≤ (C/√t) G_2t(x); also bounds ‖∂_x G_t^per‖_L1 √t.
HEAT_KERNEL_DERIVATIVE_CONSTANT = math.sqrt(2.0) * math.exp(-0.5)


@dataclass(frozen=True, eq=False)
class SpectralField:
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.ndim != 1 or coeffs.size % 2 == 0:
            raise ConfigurationError(f"Spectral coefficients need odd length 2K+1, got shape {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise ConfigurationError("Spectral coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def K(self) -> int:
        return (self.coeffs.size - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def coefficient(self, k: int) -> float:
        if abs(k) > self.K:
            return 0.0
        return float(self.coeffs[k + self.K])

    @classmethod
    def zeros(cls, K: int) -> "SpectralField":
        return cls(np.zeros(2 * K + 1))

    @classmethod
    def basis(cls, k: int, K: int) -> "SpectralField":
        c = np.zeros(2 * K + 1)
        c[k + K] = 1.0
        return cls(c)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        K = max(self.K, other.K)
        return SpectralField(resize(self, K).coeffs + resize(other, K).coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        K = max(self.K, other.K)
        return SpectralField(resize(self, K).coeffs - resize(other, K).coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.coeffs * float(scalar))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class GridFunction:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2 or values.size % 2:
            raise ConfigurationError(f"Grid needs a positive even number of nodes, got {values.size}")
        object.__setattr__(self, "values", values)

    @property
    def M(self) -> int:
        return self.values.size

    @property
    def nodes(self) -> np.ndarray:
        return grid_nodes(self.M)

    def integral(self) -> float:
        return float(self.values.sum() * TWO_PI / self.M)

    def to_csv_rows(self) -> List[Tuple[float, float]]:
        return list(zip(self.nodes.tolist(), self.values.tolist()))


def grid_nodes(M: int) -> np.ndarray:
    return TWO_PI * np.arange(M) / M


def _check_capacity(K: int, M: int):
    if K < 0:
        raise ConfigurationError(f"Truncation order must be non-negative, got K={K}")
    if M < 2 * K + 2:
        raise ConfigurationError(f"Grid with M={M} nodes cannot represent modes up to K={K} (need M >= 2K+2)")


# --- Raw coefficient conversions (internal, used by the solvers) ---

def real_to_complex(c: np.ndarray) -> np.ndarray:
    """Real-basis coefficients (length 2K+1) -> complex coefficients z_0..z_K."""
    K = (c.shape[-1] - 1) // 2
    z = np.empty(c.shape[:-1] + (K + 1,), dtype=complex)
    z[..., 0] = c[..., K] / SQRT_2PI
    if K:
        cos_part = c[..., K - 1::-1] / SQRT_PI      # a_n for n = 1..K
        sin_part = c[..., K + 1:] / SQRT_PI         # b_n for n = 1..K
        z[..., 1:] = 0.5 * (cos_part - 1j * sin_part)
    return z


def complex_to_real(z: np.ndarray) -> np.ndarray:
    """Inverse of real_to_complex."""
    K = z.shape[-1] - 1
    c = np.empty(z.shape[:-1] + (2 * K + 1,))
    c[..., K] = SQRT_2PI * z[..., 0].real
    if K:
        c[..., K - 1::-1] = 2.0 * SQRT_PI * z[..., 1:].real
        c[..., K + 1:] = -2.0 * SQRT_PI * z[..., 1:].imag
    return c


def complex_to_grid(z: np.ndarray, M: int) -> np.ndarray:
    K = z.shape[-1] - 1
    spectrum = np.zeros(z.shape[:-1] + (M // 2 + 1,), dtype=complex)
    spectrum[..., :K + 1] = M * z
    return np.fft.irfft(spectrum, n=M)


def grid_to_complex(values: np.ndarray, K: int) -> np.ndarray:
    M = values.shape[-1]
    return np.fft.rfft(values)[..., :K + 1] / M


# --- Public operations ---

def to_spectral(g: GridFunction, K: int) -> SpectralField:
    """f_k = <g, e_k> by the periodic trapezoid rule."""
    _check_capacity(K, g.M)
    return SpectralField(complex_to_real(grid_to_complex(g.values, K)))


def to_grid(f: SpectralField, M: int) -> GridFunction:
    _check_capacity(f.K, M)
    return GridFunction(complex_to_grid(real_to_complex(f.coeffs), M))


def sample(func, M: int = None) -> GridFunction:
    """Samples a vectorized callable on the equispaced grid."""
    M = M or config.FOURIER_NODES
    return GridFunction(func(grid_nodes(M)))


def resize(f: SpectralField, K: int) -> SpectralField:
    if K == f.K:
        return f
    out = np.zeros(2 * K + 1)
    keep = min(K, f.K)
    out[K - keep:K + keep + 1] = f.coeffs[f.K - keep:f.K + keep + 1]
    return SpectralField(out)


def evaluate(f: SpectralField, x) -> np.ndarray:
    """Pointwise evaluation of Σ f_k e_k(x) at arbitrary points."""
    x = np.asarray(x, dtype=float)
    K = f.K
    result = np.full(x.shape, f.coeffs[K] / SQRT_2PI)
    for n in range(1, K + 1):
        a, b = f.coeffs[K - n], f.coeffs[K + n]
        if a:
            result += a * np.cos(n * x) / SQRT_PI
        if b:
            result += b * np.sin(n * x) / SQRT_PI
    return result


def l2_norm(f: SpectralField) -> float:
    # Parseval in an orthonormal basis
    return float(np.linalg.norm(f.coeffs))


def mass(f: SpectralField) -> float:
    return SQRT_2PI * f.coefficient(0)


def moments(f: SpectralField) -> Tuple[float, float]:
    """(∫cos x f, ∫sin x f)."""
    return SQRT_PI * f.coefficient(-1), SQRT_PI * f.coefficient(1)


def derivative_coeffs(c: np.ndarray) -> np.ndarray:
    K = (c.shape[-1] - 1) // 2
    out = np.zeros_like(c)
    if K:
        n = np.arange(1, K + 1)
        out[..., K - n] = n * c[..., K + n]     # d/dx sin(nx) = n cos(nx)
        out[..., K + n] = -n * c[..., K - n]    # d/dx cos(nx) = -n sin(nx)
    return out


def derivative(f: SpectralField) -> SpectralField:
    """Exact differentiation; the k<0 sign follows calculus, not |k| e_{-k}."""
    return SpectralField(derivative_coeffs(f.coeffs))


def convolve(f: SpectralField, g: SpectralField) -> SpectralField:
    """(f*g)(x) = ∫ f(x-y) g(y) dy, diagonal in the exponential basis."""
    K = max(f.K, g.K)
    zf = real_to_complex(resize(f, K).coeffs)
    zg = real_to_complex(resize(g, K).coeffs)
    return SpectralField(complex_to_real(TWO_PI * zf * zg))


def squared_modes(K: int) -> np.ndarray:
    return np.arange(-K, K + 1, dtype=float) ** 2


def heat_semigroup(f: SpectralField, t: float) -> SpectralField:
    """e^{tA} f with A = ∂_xx: f_k -> e^{-t k^2} f_k."""
    if t < 0:
        raise ConfigurationError(f"Heat semigroup time must be non-negative, got t={t}")
    return SpectralField(f.coeffs * np.exp(-t * squared_modes(f.K)))


def _wrapped_sum(term, x: np.ndarray, tol: float) -> np.ndarray:
    total = term(x)
    for j in range(1, 10_000):
        image = term(x + TWO_PI * j) + term(x - TWO_PI * j)
        total = total + image
        if np.all(np.abs(image) <= tol * np.abs(total)):
            break
    else:
        logger.warning("Periodic image sum hit its term limit before reaching tolerance")
    return total


def _gaussian(t: float):
    norm = 1.0 / math.sqrt(4.0 * math.pi * t)
    return lambda y: norm * np.exp(-y * y / (4.0 * t))


def periodic_heat_kernel(t: float, tol: float = None, M: int = None) -> GridFunction:
    """G_t^per(x) = Σ_k G_t(x + 2kπ) with G_t(x) = e^{-x²/4t}/√(4πt)."""
    if t <= 0:
        raise ConfigurationError(f"Heat kernel time must be positive, got t={t}")
    tol = tol or config.HEAT_KERNEL_TOL
    M = M or config.FOURIER_NODES
    return GridFunction(_wrapped_sum(_gaussian(t), grid_nodes(M), tol))


def periodic_heat_kernel_derivative(t: float, tol: float = None, M: int = None) -> GridFunction:
    if t <= 0:
        raise ConfigurationError(f"Heat kernel time must be positive, got t={t}")
    tol = tol or config.HEAT_KERNEL_TOL
    M = M or config.FOURIER_NODES
    gauss = _gaussian(t)
    return GridFunction(_wrapped_sum(lambda y: -y / (2.0 * t) * gauss(y), grid_nodes(M), tol))


def duhamel_sum(samples: np.ndarray, dt: float, rates: np.ndarray) -> np.ndarray:
    """
    Per-mode ∫_0^t e^{-(t-s) r} z(s) ds for z piecewise constant on a uniform
    mesh: samples[i] holds z on [i dt, (i+1) dt), t = len(samples) dt.
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    if n == 0:
        raise ConfigurationError("Time mesh is empty")
    # time remaining from the end of step i to t
    remaining = dt * np.arange(n - 1, -1, -1)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        weights = np.where(
            rates > 0,
            np.exp(-remaining * rates) * (-np.expm1(-dt * rates)) / np.where(rates > 0, rates, 1.0),
            dt,
        )
    return np.sum(weights * samples, axis=0)


def operator_P(z: Sequence[SpectralField], t: float) -> SpectralField:
    """
    P[z](t) = ∫_0^t e^{(t-s)A} ∂_x z(s) ds with z piecewise constant on the
    uniform mesh of len(z) steps covering [0, t].
    """
    if len(z) == 0:
        raise ConfigurationError("operator_P needs a non-empty time mesh")
    if t <= 0:
        raise ConfigurationError(f"operator_P needs t > 0, got {t}")
    K = max(f.K for f in z)
    samples = np.stack([resize(f, K).coeffs for f in z])
    integrated = duhamel_sum(samples, t / len(z), squared_modes(K))
    return SpectralField(derivative_coeffs(integrated))


def operator_P_bound(z: Sequence[SpectralField], t: float) -> float:
    """∫_0^t (t-s)^{-1/2} ‖z(s)‖ ds for the same piecewise-constant z."""
    n = len(z)
    dt = t / n
    starts = dt * np.arange(n)
    ends = starts + dt
    weights = 2.0 * (np.sqrt(t - starts) - np.sqrt(np.maximum(t - ends, 0.0)))
    return float(sum(w * l2_norm(f) for w, f in zip(weights, z)))


def trapezoid_integral(values: Iterable[float]) -> float:
    values = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    return float(values.sum() * TWO_PI / values.size)
