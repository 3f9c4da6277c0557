# src/services/stationary.py
"""
Service module for the stationary states of the McKean-Vlasov equation with
V(x) = cos 2x and F(x) = −cos x.

A stationary density is the Boltzmann profile

    ρ_m(x) = Z⁻¹ exp(−(cos 2x − m1 cos x − m2 sin x)/σ)

whose own moments reproduce m = (m1, m2). This module computes the
fixed-point map g_σ, its axis restrictions, the auxiliary functions ζ_σ / ξ_σ
whose zeros are the non-trivial fixed points, their series expansions, the
small-σ Laplace asymptotics, and the solution-count classifier.

All integrals are periodic trapezoid sums with the largest exponent factored
out, so small σ does not overflow.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

import src.config as config
from src.services import bessel
from src.services.torus_fourier import GridFunction, SpectralField, to_spectral
from src.utils.error_handler import ConfigurationError, ConvergenceError, NumericalError
from src.utils.roots import bisection, bracket_sign_changes

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class MomentPair:
    m1: float
    m2: float

    @property
    def M(self) -> float:
        return math.hypot(self.m1, self.m2)

    @property
    def phi(self) -> float:
        return math.atan2(self.m2, self.m1)

    def as_array(self) -> np.ndarray:
        return np.array([self.m1, self.m2])

    def distance(self, other: "MomentPair") -> float:
        return math.hypot(self.m1 - other.m1, self.m2 - other.m2)

    def to_dict(self) -> Dict[str, float]:
        return {"m1": self.m1, "m2": self.m2}


ORIGIN = MomentPair(0.0, 0.0)


@dataclass(frozen=True)
class StationaryDensity:
    sigma: float
    moments: MomentPair
    Z: float
    samples: GridFunction


@dataclass
class FixedPointReport:
    sigma: float
    solutions: List[MomentPair] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)
    newton_failures: int = 0

    @property
    def count(self) -> int:
        return len(self.solutions)

    @property
    def m_star(self) -> float:
        """Largest |m2| among the solutions on the m1 = 0 axis."""
        return max((abs(s.m2) for s in self.solutions if abs(s.m1) <= config.FIXED_POINT_TOL), default=0.0)

    def to_dict(self) -> Dict:
        return {
            "sigma": self.sigma,
            "count": self.count,
            "solutions": [s.to_dict() for s in self.solutions],
            "residuals": list(self.residuals),
            "m_star": self.m_star,
        }


@lru_cache(maxsize=8)
def _quadrature(count: int):
    x = TWO_PI * np.arange(count) / count
    return x, np.cos(x), np.sin(x), np.cos(2.0 * x)


def _check_sigma(sigma: float):
    if not sigma > 0:
        raise ConfigurationError(f"Diffusion sigma must be positive, got {sigma}")


def _scaled_weights(exponent: np.ndarray) -> Tuple[np.ndarray, float]:
    shift = float(exponent.max())
    return np.exp(exponent - shift), shift


def _exponent(sigma: float, m1: float, m2: float, nodes: int) -> np.ndarray:
    _, cos_x, sin_x, cos_2x = _quadrature(nodes)
    return -(cos_2x - m1 * cos_x - m2 * sin_x) / sigma


# --- Partition function and densities ---

def log_partition_Z(sigma: float, m: MomentPair, nodes: int = None) -> float:
    _check_sigma(sigma)
    nodes = nodes or config.QUADRATURE_NODES
    weights, shift = _scaled_weights(_exponent(sigma, m.m1, m.m2, nodes))
    return shift + math.log(TWO_PI * float(weights.mean()))


def partition_Z(sigma: float, m: MomentPair, nodes: int = None) -> float:
    return math.exp(log_partition_Z(sigma, m, nodes))


def density(sigma: float, m: MomentPair, M_grid: int = None) -> StationaryDensity:
    _check_sigma(sigma)
    M_grid = M_grid or config.FOURIER_NODES
    log_Z = log_partition_Z(sigma, m, M_grid)
    values = np.exp(_exponent(sigma, m.m1, m.m2, M_grid) - log_Z)
    return StationaryDensity(sigma, m, math.exp(log_Z), GridFunction(values))


def density_field(sigma: float, m: MomentPair, K: int) -> SpectralField:
    """The stationary density as a spectral field of order K."""
    return to_spectral(density(sigma, m).samples, K)


# --- Fixed-point map and its axis restrictions ---

def map_g(sigma: float, m: MomentPair, nodes: int = None) -> MomentPair:
    _check_sigma(sigma)
    nodes = nodes or config.QUADRATURE_NODES
    _, cos_x, sin_x, _ = _quadrature(nodes)
    weights, _ = _scaled_weights(_exponent(sigma, m.m1, m.m2, nodes))
    total = weights.sum()
    return MomentPair(float(cos_x @ weights / total), float(sin_x @ weights / total))


def map_gbar(sigma: float, m: float) -> float:
    """g_σ restricted to the m2 axis."""
    return map_g(sigma, MomentPair(0.0, m)).m2


def map_h(sigma: float, m: float) -> float:
    """g_σ restricted to the m1 axis."""
    return map_g(sigma, MomentPair(m, 0.0)).m1


def _axis_moments(sigma: float, m: float, use_cos: bool, nodes: int = None):
    nodes = nodes or config.QUADRATURE_NODES
    _, cos_x, sin_x, cos_2x = _quadrature(nodes)
    trig = cos_x if use_cos else sin_x
    weights, shift = _scaled_weights(-(cos_2x - m * trig) / sigma)
    return trig, weights, shift


def map_h_derivative(sigma: float, m: float) -> float:
    """h_σ'(m) = (⟨cos² x⟩ − ⟨cos x⟩²)/σ under ρ_{(m, 0)}."""
    _check_sigma(sigma)
    cos_x, weights, _ = _axis_moments(sigma, m, use_cos=True)
    total = weights.sum()
    first = cos_x @ weights / total
    second = (cos_x ** 2) @ weights / total
    return float((second - first ** 2) / sigma)


def _auxiliary(sigma: float, m: float, use_cos: bool, normalized: bool) -> float:
    _check_sigma(sigma)
    trig, weights, shift = _axis_moments(sigma, m, use_cos)
    if normalized:
        return float((trig - m) @ weights / weights.sum())
    return float(TWO_PI * np.mean((trig - m) * weights) * math.exp(shift))


def zeta(sigma: float, m: float, normalized: bool = False) -> float:
    """
    ζ_σ(m) = ∫ (sin x − m) e^{−cos(2x)/σ + (m/σ) sin x} dx.

    With normalized=True the integral is divided by its partition function,
    giving ḡ_σ(m) − m, which has the same zeros and never overflows.
    """
    return _auxiliary(sigma, m, use_cos=False, normalized=normalized)


def xi(sigma: float, m: float, normalized: bool = False) -> float:
    """ξ_σ(m), the cosine-axis analogue of zeta; normalized gives h_σ(m) − m."""
    return _auxiliary(sigma, m, use_cos=True, normalized=normalized)


# --- Moment sequences ---

def _moment_seq(sigma: float, k, use_cos: bool):
    _check_sigma(sigma)
    k_arr = np.asarray(k)
    if np.any(k_arr < 0) or np.any(k_arr != np.floor(k_arr)):
        raise ConfigurationError(f"Moment index must be a non-negative integer, got {k}")
    _, cos_x, sin_x, cos_2x = _quadrature(config.QUADRATURE_NODES)
    trig = cos_x if use_cos else sin_x
    base = np.exp(-cos_2x / sigma)
    powers = trig[None, :] ** np.atleast_1d(k_arr).astype(int)[:, None]
    values = TWO_PI * (powers @ base) / base.size
    return float(values[0]) if k_arr.ndim == 0 else values


def moment_seq_s(sigma: float, k):
    """s_k(σ) = ∫ sin^k x e^{−cos(2x)/σ} dx; accepts an int or an array of ints."""
    return _moment_seq(sigma, k, use_cos=False)


def moment_seq_c(sigma: float, k):
    """c_k(σ) = ∫ cos^k x e^{−cos(2x)/σ} dx."""
    return _moment_seq(sigma, k, use_cos=True)


def upsilon(sigma: float, k: int) -> float:
    s = moment_seq_s(sigma, np.array([2 * k, 2 * k + 2]))
    return float(s[1] / ((2 * k + 1) * s[0]) - sigma)


def iota(sigma: float, k: int) -> float:
    c = moment_seq_c(sigma, np.array([2 * k, 2 * k + 2]))
    return float(c[1] / ((2 * k + 1) * c[0]) - sigma)


def zeta_series(sigma: float, m: float, tol: float = 1e-12, max_terms: int = None) -> float:
    """
    ζ_σ(m) = Σ_k (m/σ)^{2k+1}/(2k)! · s_{2k} · Υ_k(σ).

    Summation stops once the coefficients are decreasing and the envelope
    (m/σ)^{2k+1}/(2k)! · s_{2k} · (1 + σ), which bounds |term k| since
    Υ_k ∈ (−σ, 1), falls below tol × |partial sum|.
    """
    _check_sigma(sigma)
    max_terms = max_terms or config.SERIES_MAX_TERMS
    ratio = m / sigma
    s = moment_seq_s(sigma, np.arange(0, 2 * max_terms + 2, 2))
    coefficient = ratio
    total = 0.0
    for k in range(max_terms):
        even, next_even = s[k], s[k + 1]
        total += coefficient * (next_even / (2 * k + 1) - sigma * even)
        envelope = abs(coefficient) * even * (1.0 + sigma)
        decreasing = ratio * ratio < (2 * k + 1) * (2 * k + 2)
        if envelope < 1e-300 or (decreasing and envelope < tol * abs(total)):
            return total
        coefficient *= ratio * ratio / ((2 * k + 1) * (2 * k + 2))
    raise ConvergenceError(f"zeta series at sigma={sigma}, m={m} did not converge in {max_terms} terms")


def zeta_prime_at_zero(sigma: float) -> float:
    """ζ_σ'(0) = (s_2 − σ s_0)/σ; equals I_0(1/σ) f_c(σ)/2."""
    s0, s2 = moment_seq_s(sigma, np.array([0, 2]))
    return float((s2 - sigma * s0) / sigma)


def find_sigma_c_from_zeta(tol: float = 1e-10) -> float:
    """σ_c as the zero of σ ↦ ζ_σ'(0), independent of the Bessel path."""
    lo, hi = bessel.SIGMA_C_BRACKET
    return bisection(zeta_prime_at_zero, lo, hi, tol=tol).root


# --- Fixed-point search ---

def _axis_roots(func: Callable[[float], float], label: str, sigma: float) -> List[float]:
    nodes = np.linspace(0.0, 1.0, config.ROOT_SCAN_INTERVALS + 1)
    # zeta vanishes at 0 for every sigma; step just inside so its slope decides the sign
    nodes[0] = 1e-3 / config.ROOT_SCAN_INTERVALS
    values = np.array([func(m) for m in nodes])
    roots = []
    for i in bracket_sign_changes(values):
        result = bisection(func, nodes[i], nodes[i + 1], tol=config.ROOT_TOL)
        roots.append(result.root)
        logger.debug(f"{label} root at sigma={sigma}: m={result.root:.12f}")
    if len(roots) > 1:
        logger.warning(f"{label} has {len(roots)} positive roots at sigma={sigma}; expected at most one")

    outer = np.linspace(1.0, 1.5, 26)
    if bracket_sign_changes(np.array([func(m) for m in outer])).size:
        logger.warning(f"{label} changes sign on [1, 1.5] at sigma={sigma}")
    return roots


def _residual(sigma: float, m: np.ndarray) -> np.ndarray:
    return map_g(sigma, MomentPair(float(m[0]), float(m[1]))).as_array() - m


def _newton(sigma: float, start: np.ndarray, tol: float) -> Optional[np.ndarray]:
    """Damped Newton on g_σ(m) − m with a forward-difference Jacobian."""
    h = config.NEWTON_STEP
    m = start.astype(float)
    r = _residual(sigma, m)
    norm = np.linalg.norm(r)
    for _ in range(config.NEWTON_MAX_ITER):
        if norm < 1e-13:
            break
        jac = np.empty((2, 2))
        for j in range(2):
            shifted = m.copy()
            shifted[j] += h
            jac[:, j] = (_residual(sigma, shifted) - r) / h
        try:
            direction = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            logger.debug(f"Singular Jacobian from start {start} at sigma={sigma}")
            return None
        damping = 1.0
        while damping > 1e-6:
            candidate = m + damping * direction
            r_new = _residual(sigma, candidate)
            if np.linalg.norm(r_new) < norm:
                break
            damping *= 0.5
        else:
            break
        m, r, norm = candidate, r_new, np.linalg.norm(r_new)
    return m if norm <= tol else None


def _merge(report: FixedPointReport, sigma: float, candidate: MomentPair):
    if any(candidate.distance(s) < config.ROOT_MERGE_TOL for s in report.solutions):
        return False
    residual = float(np.linalg.norm(_residual(sigma, candidate.as_array())))
    report.solutions.append(candidate)
    report.residuals.append(residual)
    return True


def find_fixed_points(sigma: float, tol: float = None) -> FixedPointReport:
    """
    Every solution of g_σ(m) = m. Axis roots come from bracketing ζ_σ and ξ_σ
    on (0, 1] (mirrored by oddness); a multistart Newton over [−1, 1]² then
    checks that nothing off the axes was missed.
    """
    _check_sigma(sigma)
    tol = tol or config.FIXED_POINT_TOL
    report = FixedPointReport(sigma)
    _merge(report, sigma, ORIGIN)

    for m in _axis_roots(lambda v: zeta(sigma, v, normalized=True), "zeta", sigma):
        _merge(report, sigma, MomentPair(0.0, m))
        _merge(report, sigma, MomentPair(0.0, -m))
    for m in _axis_roots(lambda v: xi(sigma, v, normalized=True), "xi", sigma):
        _merge(report, sigma, MomentPair(m, 0.0))
        _merge(report, sigma, MomentPair(-m, 0.0))

    worst = max(report.residuals)
    if worst > tol:
        raise NumericalError(f"Axis root at sigma={sigma} fails the fixed-point check (residual {worst:.3e})")

    grid = np.linspace(-1.0, 1.0, 5)
    for a in grid:
        for b in grid:
            point = _newton(sigma, np.array([a, b]), tol)
            if point is None:
                report.newton_failures += 1
                continue
            if abs(point[0] * point[1]) > config.FIXED_POINT_TOL:
                raise NumericalError(f"Off-axis fixed point {point} at sigma={sigma}")
            # snap roundoff-level components onto the axis
            point = np.where(np.abs(point) < config.FIXED_POINT_TOL, 0.0, point)
            if _merge(report, sigma, MomentPair(float(point[0]), float(point[1]))):
                logger.warning(f"Newton found a fixed point missed by the axis scan: {point} at sigma={sigma}")
    if report.newton_failures:
        logger.info(f"Newton did not converge from {report.newton_failures}/25 starts at sigma={sigma}")

    order = sorted(range(report.count), key=lambda i: (report.solutions[i].m1, report.solutions[i].m2))
    report.solutions = [report.solutions[i] for i in order]
    report.residuals = [report.residuals[i] for i in order]
    return report


def phase_row(sigma: float) -> Dict[str, float]:
    """One row of the phase diagram. Module-level so that process pools can pickle it."""
    report = find_fixed_points(sigma)
    return {
        "sigma": sigma,
        "count": report.count,
        "m_star": report.m_star,
        "zeta_prime0": zeta_prime_at_zero(sigma),
        "f_c": bessel.f_c(sigma),
    }


def quadrant_exclusion(sigma: float, M: float, phi: float) -> float:
    """I(M, φ) = ∫ sin(x − φ) e^{−(cos 2x − M cos(x − φ))/σ} dx."""
    _check_sigma(sigma)
    if M < 0:
        raise ConfigurationError(f"Amplitude M must be non-negative, got {M}")
    x, _, _, cos_2x = _quadrature(config.QUADRATURE_NODES)
    weights, shift = _scaled_weights(-(cos_2x - M * np.cos(x - phi)) / sigma)
    return float(TWO_PI * np.mean(np.sin(x - phi) * weights) * math.exp(shift))


def xi_uniqueness_check(sigma: float) -> bool:
    """Numerical certificate that ξ_σ has the single zero m = 0 when σ ≥ 1/2."""
    if sigma < 0.5:
        raise ConfigurationError(f"The uniqueness certificate needs sigma >= 1/2, got {sigma}")
    c0, c2 = moment_seq_c(sigma, np.array([0, 2]))
    if not c2 - sigma * c0 < 0:
        return False
    if any(iota(sigma, k) >= 0 for k in range(1, 11)):
        return False
    nodes = np.linspace(0.0, 1.0, config.ROOT_SCAN_INTERVALS + 1)[1:]
    values = np.array([xi(sigma, m, normalized=True) for m in nodes])
    return bool(np.all(values < 0))


# --- Laplace asymptotics ---

@dataclass(frozen=True)
class PotentialMinimum:
    """Derivatives U(x_m), U''(x_m), U'''(x_m), U''''(x_m) at a non-degenerate minimum."""
    U0: float
    U2: float
    U3: float
    U4: float


def laplace_terms(f_jet: Tuple[float, float, float], minimum: PotentialMinimum, sigma: float) -> Tuple[float, float]:
    """
    Leading and first-order coefficients of ∫ f e^{−U/σ} near one minimum,
    relative to the prefactor √(2πσ/U2) e^{−U0/σ}: the integral is
    prefactor × (leading + first · σ + o(σ)).
    """
    if not minimum.U2 > 0:
        raise ConfigurationError(f"Laplace method needs U''(x_m) > 0, got {minimum.U2}")
    f, df, d2f = f_jet
    U2, U3, U4 = minimum.U2, minimum.U3, minimum.U4
    gamma = (f * (5.0 * U3 ** 2 / (24.0 * U2 ** 3) - U4 / (8.0 * U2 ** 2))
             - df * U3 / (2.0 * U2 ** 2) + d2f / (2.0 * U2))
    return f, gamma


def laplace_prefactor(minimum: PotentialMinimum, sigma: float) -> float:
    return math.sqrt(TWO_PI * sigma / minimum.U2) * math.exp(-minimum.U0 / sigma)


def laplace_approx(f_jet: Tuple[float, float, float], minimum: PotentialMinimum, sigma: float) -> float:
    """√(2πσ/U2) e^{−U0/σ} (f + γ_f σ)."""
    lead, first = laplace_terms(f_jet, minimum, sigma)
    return laplace_prefactor(minimum, sigma) * (lead + first * sigma)


def double_well_minima() -> List[PotentialMinimum]:
    """U = cos 2x has minima at π/2 and 3π/2."""
    return [PotentialMinimum(-1.0, 4.0, 0.0, -16.0)] * 2


def tilted_minima(m: float) -> List[Tuple[float, PotentialMinimum]]:
    """U_m = cos 2x − m cos x, minima at x = ±arccos(m/4)."""
    if not 0 <= m <= 1:
        raise ConfigurationError(f"Tilt m must lie in [0, 1], got {m}")
    x = math.acos(m / 4.0)
    root = math.sqrt(1.0 - m * m / 16.0)
    U0 = -1.0 - m * m / 8.0
    U2 = 4.0 - m * m / 4.0
    U4 = 7.0 * m * m / 4.0 - 16.0
    return [(x, PotentialMinimum(U0, U2, 3.0 * m * root, U4)),
            (-x, PotentialMinimum(U0, U2, -3.0 * m * root, U4))]


def s0_asymptotic(sigma: float) -> float:
    """Leading order of s_0: √(πσ/2) e^{1/σ} · 2."""
    return math.sqrt(math.pi * sigma / 2.0) * math.exp(1.0 / sigma) * 2.0


def h_expansions(sigma: float, m: float) -> Dict[str, Dict[str, float]]:
    """
    Small-σ expansions of ∫ f e^{−(cos 2x − m cos x)/σ} for f ∈ {1, cos, cos²}.

    For each f, 'quadrature' is the integral divided by the common prefactor
    √(2πσ/U2) e^{−U0/σ}, 'leading' and 'first' the summed Laplace
    coefficients over both minima, and 'correction' the O(m) remainder
    function (c, c̄ or ĉ) obtained by removing the explicit part of 'first'.
    """
    _check_sigma(sigma)
    minima = tilted_minima(m)
    prefactor = laplace_prefactor(minima[0][1], sigma)
    x, cos_x, _, cos_2x = _quadrature(config.QUADRATURE_NODES)
    weights, shift = _scaled_weights(-(cos_2x - m * cos_x) / sigma)
    scale = math.exp(shift) / prefactor

    jets = {
        "one": lambda p: (1.0, 0.0, 0.0),
        "cos": lambda p: (math.cos(p), -math.sin(p), -math.cos(p)),
        "cos2": lambda p: (math.cos(p) ** 2, -math.sin(2 * p), -2.0 * math.cos(2 * p)),
    }
    observables = {"one": np.ones_like(x), "cos": cos_x, "cos2": cos_x ** 2}
    explicit = {
        "one": 4.0 / (4.0 - m * m / 2.0) ** 2,
        "cos": 0.0,
        "cos2": 2.0 / (4.0 - m * m / 4.0),
    }

    out = {}
    for name, jet in jets.items():
        lead = first = 0.0
        for point, minimum in minima:
            a, b = laplace_terms(jet(point), minimum, sigma)
            lead += a
            first += b
        quad = TWO_PI * float(np.mean(observables[name] * weights)) * scale
        out[name] = {
            "quadrature": quad,
            "leading": lead,
            "first": first,
            "correction": first - explicit[name],
            "error_over_sigma": abs(quad - (lead + first * sigma)) / sigma,
        }
    return out
