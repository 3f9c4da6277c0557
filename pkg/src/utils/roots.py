# src/utils/roots.py
"""
Solve nonlinear functions of a single variable by bracketing.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Tuple

import numpy as np

from src.utils.error_handler import BracketError, ConfigurationError

logger = logging.getLogger(__name__)


@dataclass
class BisectionResult:
    root: float
    iterations: int
    brackets: List[Tuple[float, float]] = field(default_factory=list)

    @property
    def width(self) -> float:
        lo, hi = self.brackets[-1]
        return hi - lo


def bisection(f: Callable[[float], float], lo: float, hi: float, tol: float = 1.0e-10,
              max_iterations: int = 200) -> BisectionResult:
    """
    The iterative bisection method for zero-finding in one dimension.

    f: function with a sign change on [lo, hi]
    tol: stopping tolerance on bracket size

    Returns: BisectionResult with the midpoint of the final bracket and the
    full bracket history (each entry half the width of the previous one).
    """
    if tol <= 0:
        raise ConfigurationError(f"Bisection tolerance must be positive, got {tol}")
    if not lo < hi:
        raise ConfigurationError(f"Invalid bracket [{lo}, {hi}]")
    f_lo = f(lo)
    f_hi = f(hi)
    if f_lo == 0.0:
        return BisectionResult(lo, 0, [(lo, lo)])
    if f_hi == 0.0:
        return BisectionResult(hi, 0, [(hi, hi)])
    if np.sign(f_lo) == np.sign(f_hi):
        raise BracketError(f"No sign change on [{lo}, {hi}]: f(lo)={f_lo:.3e}, f(hi)={f_hi:.3e}")

    brackets = [(lo, hi)]
    iterations = 0
    while hi - lo > tol and iterations < max_iterations:
        midpoint = 0.5 * (lo + hi)
        f_mid = f(midpoint)
        if f_mid == 0.0:
            lo = hi = midpoint
        elif np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = midpoint, f_mid
        else:
            hi = midpoint
        brackets.append((lo, hi))
        iterations += 1
    logger.debug(f"Bisection finished after {iterations} iterations, width {hi - lo:.3e}")
    return BisectionResult(0.5 * (lo + hi), iterations, brackets)


def bracket_sign_changes(values: np.ndarray) -> np.ndarray:
    """
    Indices i whose interval [i, i+1] holds a root: either values[i] and
    values[i+1] have strictly opposite signs, or a value is exactly zero.
    A zero node opens the interval it starts (the last node closes the
    final one), so bisection on that interval returns the node itself.
    """
    signs = np.sign(np.asarray(values, dtype=float))
    if signs.size < 2:
        return np.array([], dtype=int)
    crossings = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
    zeros = np.minimum(np.nonzero(signs == 0)[0], signs.size - 2)
    return np.union1d(crossings, zeros)
