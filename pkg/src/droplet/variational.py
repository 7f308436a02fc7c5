"""The droplet-size rate function and its minimizers.

Phi(lambda) = lambda**((d-1)/d) + Delta*(1-lambda)**2 on [0, 1] balances the
surface cost of a droplet holding a fraction lambda of the magnetization
deficit against the Gaussian cost of spreading the rest over the bulk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "PhiParams",
    "PhiSolution",
    "phi",
    "delta_c",
    "lambda_c",
    "lambda_plus",
    "minimize_phi",
    "grid_minimum",
]

CRIT_TOL = 1e-12


@dataclass(frozen=True)
class PhiParams:
    delta: float
    d: int = 2

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("dimension d must be at least 2")
        if not self.delta >= 0:
            raise ValueError("delta must be nonnegative")


@dataclass(frozen=True)
class PhiSolution:
    phi_star: float
    minimizers: Tuple[float, ...]
    lambda_plus: Optional[float]
    params: PhiParams

    @property
    def lambda_delta(self) -> float:
        """The largest minimizer (0 below the transition)."""
        return max(self.minimizers)

    @property
    def critical(self) -> bool:
        return len(self.minimizers) == 2


def phi(lam: float, params: PhiParams) -> float:
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    d = params.d
    return lam ** ((d - 1) / d) + params.delta * (1.0 - lam) ** 2


def _phi_vec(lam, delta, d):
    return lam ** ((d - 1) / d) + delta * (1.0 - lam) ** 2


def delta_c(d: int = 2) -> float:
    """Critical deficit parameter (1/d) * ((d+1)/2)**((d+1)/d)."""
    if d < 2:
        raise ValueError("dimension d must be at least 2")
    return ((d + 1) / 2) ** ((d + 1) / d) / d


def lambda_c(d: int = 2) -> float:
    return 2.0 / (d + 1)


def _stationary(lam, delta, d):
    return 2 * d / (d - 1) * delta * lam ** (1 / d) * (1 - lam) - 1.0


def lambda_plus(delta: float, d: int = 2) -> Optional[float]:
    """Largest root in (0, 1) of (2d/(d-1)) Delta lambda**(1/d) (1-lambda) = 1.

    The left factor peaks at 1/(d+1) and vanishes at 1, so the bracket
    [1/(d+1), 1] holds the largest root whenever one exists.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    lo = 1.0 / (d + 1)
    top = _stationary(lo, delta, d)
    if top < 0:
        return None
    if top == 0:
        return lo
    return brentq(_stationary, lo, 1.0, args=(delta, d), xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def minimize_phi(params: PhiParams) -> PhiSolution:
    """Global minimizers of Phi on [0, 1].

    Phi(0) = Delta competes with the local minimum at lambda_plus; the two
    are declared tied when they agree within 1e-12.
    """
    delta, d = params.delta, params.d
    if delta == 0:
        return PhiSolution(0.0, (0.0,), None, params)
    lp = lambda_plus(delta, d)
    at0 = delta
    if lp is None:
        return PhiSolution(at0, (0.0,), None, params)
    atp = _phi_vec(lp, delta, d)
    if abs(atp - at0) < CRIT_TOL:
        return PhiSolution(min(at0, atp), (0.0, lp), lp, params)
    if atp < at0:
        return PhiSolution(atp, (lp,), lp, params)
    return PhiSolution(at0, (0.0,), lp, params)


def grid_minimum(params: PhiParams, n: int = 10**6 + 1):
    """(argmin, min) of Phi over a uniform grid on [0, 1], refined locally."""
    lam = np.linspace(0.0, 1.0, n)
    vals = _phi_vec(lam, params.delta, params.d)
    k = int(np.argmin(vals))
    lo, hi = lam[max(k - 1, 0)], lam[min(k + 1, n - 1)]
    fine = np.linspace(lo, hi, 2001)
    fv = _phi_vec(fine, params.delta, params.d)
    j = int(np.argmin(fv))
    return float(fine[j]), float(fv[j])
