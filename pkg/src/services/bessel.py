# src/services/bessel.py
"""
Torus-normalized modified Bessel integrals

    I_n(z) = ∫_0^{2π} cos(2nx) e^{z cos 2x} dx   (= 2π × the textbook I_n(z)),

their ratios r_n = I_{n+1}/I_n, and the critical-noise function

    f_c(σ) = 1/σ − 2 + r_0(1/σ)/σ

whose unique zero is the critical diffusion σ_c of the double-well
Kuramoto model.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

import src.config as config
from src.utils.error_handler import BesselOverflowError, ConfigurationError, ConvergenceError
from src.utils.roots import BisectionResult, bisection

logger = logging.getLogger(__name__)

SIGMA_C_BRACKET = (0.4, 1.0)


@dataclass(frozen=True)
class BesselEval:
    """I_n(z) = mantissa · e^{log_scale}."""
    n: int
    z: float
    mantissa: float
    log_scale: float

    @property
    def value(self) -> float:
        try:
            return self.mantissa * math.exp(self.log_scale)
        except OverflowError as e:
            raise BesselOverflowError(f"I_{self.n}({self.z}) overflows double precision") from e

    @property
    def log_value(self) -> float:
        if self.mantissa <= 0:
            raise ConfigurationError(f"log of non-positive I_{self.n}({self.z})")
        return math.log(self.mantissa) + self.log_scale


@lru_cache(maxsize=8)
def _nodes(count: int):
    x = 2.0 * np.pi * np.arange(count) / count
    return x, np.cos(2.0 * x)


def _check_order(n: int):
    if int(n) != n or n < 0:
        raise ConfigurationError(f"Bessel order must be a non-negative integer, got {n}")


def bessel_I_scaled(n: int, z: float, nodes: int = None) -> BesselEval:
    """Trapezoid quadrature with e^{|z|} factored out; never overflows."""
    _check_order(n)
    x, cos2x = _nodes(nodes or config.BESSEL_NODES)
    z = float(z)
    shift = abs(z)
    weights = np.exp(z * cos2x - shift)
    integrand = weights if n == 0 else np.cos(2 * n * x) * weights
    mantissa = 2.0 * np.pi * float(np.mean(integrand))
    return BesselEval(int(n), z, mantissa, shift)


def bessel_I(n: int, z: float) -> float:
    if abs(z) > config.BESSEL_OVERFLOW_GUARD:
        raise BesselOverflowError(
            f"|z|={abs(z):.6g} exceeds the overflow guard {config.BESSEL_OVERFLOW_GUARD}; use bessel_I_scaled"
        )
    return bessel_I_scaled(n, z).value


def bessel_I_series(n: int, z: float, max_terms: int = 500) -> float:
    """
    Power-series oracle 2π Σ_j (z/2)^{2j+n} / (j! (j+n)!), independent of the
    quadrature path. Truncated once a term drops below 1e-16 of the partial sum.
    """
    _check_order(n)
    half = 0.5 * float(z)
    term = half ** n / math.factorial(n)
    total = term
    for j in range(max_terms):
        term *= half * half / ((j + 1) * (j + 1 + n))
        total += term
        if abs(term) <= 1e-16 * abs(total):
            return 2.0 * math.pi * total
    raise ConvergenceError(f"Bessel series for I_{n}({z}) did not converge in {max_terms} terms")


def bessel_ratio(n: int, z: float) -> float:
    numerator = bessel_I_scaled(n + 1, z)
    denominator = bessel_I_scaled(n, z)
    if denominator.mantissa == 0.0:
        raise ConfigurationError(f"Ratio r_{n}({z}) undefined: I_{n}({z}) vanishes")
    # identical scale factors cancel
    return numerator.mantissa / denominator.mantissa


def bessel_ratio_derivative(z: float) -> float:
    """r_0'(z) = 1 − r_0(z)/z − r_0(z)², with the limit 1/2 at z = 0."""
    if z == 0:
        return 0.5
    r = bessel_ratio(0, z)
    return 1.0 - r / z - r * r


def _check_sigma(sigma: float):
    if not sigma > 0:
        raise ConfigurationError(f"Diffusion sigma must be positive, got {sigma}")


def f_c(sigma: float) -> float:
    _check_sigma(sigma)
    inv = 1.0 / sigma
    return inv - 2.0 + inv * bessel_ratio(0, inv)


def f_c_derivative(sigma: float) -> float:
    """d f_c/dσ = −1/σ² − r_0(1/σ)/σ² − r_0'(1/σ)/σ³ (negative for every σ > 0)."""
    _check_sigma(sigma)
    inv = 1.0 / sigma
    return -inv ** 2 - bessel_ratio(0, inv) * inv ** 2 - bessel_ratio_derivative(inv) * inv ** 3


def sigma_c_bisection(tol: float = 1e-10) -> BisectionResult:
    if not tol > 0:
        raise ConfigurationError(f"Tolerance must be positive, got {tol}")
    lo, hi = SIGMA_C_BRACKET
    result = bisection(f_c, lo, hi, tol=tol)
    logger.debug(f"sigma_c bracket [{lo}, {hi}] -> {result.root:.12f} after {result.iterations} halvings")
    return result


def find_sigma_c(tol: float = 1e-10) -> float:
    """
    The critical diffusion σ_c: the unique zero of f_c on [0.4, 1.0], bisected
    to tol and polished by one Newton step that must stay inside the final bracket.
    """
    result = sigma_c_bisection(tol)
    lo, hi = result.brackets[-1]
    polished = result.root - f_c(result.root) / f_c_derivative(result.root)
    return polished if lo <= polished <= hi else result.root
