"""Modified Bessel function of the first kind, evaluated in log scale.

Three regimes:

* ascending power series summed in log space (any argument, used whenever
  the Hankel expansion is not yet accurate);
* Hankel's large-argument expansion with the ``exp(x)/sqrt(2 pi x)`` factor
  pulled out, used when ``x >= max(HANKEL_MIN_ARG, nu**2)``;
* Gauss' continued fraction for the ratio ``I_{nu+1}(x) / I_nu(x)``,
  evaluated with the modified Lentz algorithm.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

HANKEL_MIN_ARG = 30.0
_TINY = 1e-300
_EPS = 1e-16
_SMALL_RATIO_ARG = 1e-6


def _check(nu: float, x: float) -> tuple[float, float]:
    nu = float(nu)
    x = float(x)
    if not (math.isfinite(nu) and math.isfinite(x)):
        raise DomainError(f"non-finite Bessel argument (nu={nu}, x={x})")
    if nu < 0 or x < 0:
        raise DomainError(f"negative Bessel argument (nu={nu}, x={x})")
    return nu, x


def _use_hankel(nu: float, x: float) -> bool:
    return x >= max(HANKEL_MIN_ARG, nu * nu)


def _hankel_tail(nu: float, x: float) -> float:
    """Sum of the Hankel series minus its leading 1."""
    mu = 4.0 * nu * nu
    term = 1.0
    tail = 0.0
    prev = math.inf
    for k in range(1, 500):
        term *= -(mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        mag = abs(term)
        if mag == 0.0:
            break
        if mag > prev:
            # asymptotic series started diverging; stop at the smallest term
            break
        tail += term
        prev = mag
        if mag < _EPS * abs(1.0 + tail):
            break
    return tail


def _log_series(nu: float, x: float) -> float:
    # terms t_k = (x/2)^(2k+nu) / (k! Gamma(nu+k+1)), peak near k*
    log_half = math.log(x) - math.log(2.0)  # x / 2 underflows for subnormal x
    k_peak = 0.5 * (math.sqrt(nu * nu + x * x) - nu)
    k_max = int(k_peak + 15.0 * math.sqrt(x + 1.0) + 30.0)
    k = np.arange(k_max + 1, dtype=np.float64)
    log_terms = (2.0 * k + nu) * log_half - gammaln(k + 1.0) - gammaln(nu + k + 1.0)
    peak = int(np.argmax(log_terms))
    top = log_terms[peak]
    rest = np.exp(np.delete(log_terms, peak) - top).sum()
    return float(top + math.log1p(rest))


def log_bessel_i(nu: float, x: float) -> float:
    """Return ``ln I_nu(x)`` for ``nu >= 0`` and ``x >= 0``.

    ``x == 0`` gives 0 for ``nu == 0`` and ``-inf`` otherwise.
    """
    nu, x = _check(nu, x)
    if x == 0.0:
        return 0.0 if nu == 0.0 else -math.inf
    if _use_hankel(nu, x):
        return x - 0.5 * math.log(2.0 * math.pi * x) + math.log1p(_hankel_tail(nu, x))
    return _log_series(nu, x)


def bessel_ratio(nu: float, x: float) -> float:
    """Return ``I_{nu+1}(x) / I_nu(x)`` without forming either function."""
    nu, x = _check(nu, x)
    if x == 0.0:
        return 0.0
    if x < _SMALL_RATIO_ARG * (nu + 1.0):
        # two-term series; the next correction is below double precision
        return x / (2.0 * (nu + 1.0)) * (1.0 - x * x / (4.0 * (nu + 1.0) * (nu + 2.0)))
    if _use_hankel(nu + 1.0, x):
        return (1.0 + _hankel_tail(nu + 1.0, x)) / (1.0 + _hankel_tail(nu, x))
    return _ratio_lentz(nu, x)


def _ratio_lentz(nu: float, x: float) -> float:
    # I_{nu+1}/I_nu = 1 / (b1 + 1 / (b2 + 1 / (b3 + ...))),  b_j = 2 (nu + j) / x
    f = _TINY
    c = f
    d = 0.0
    j = 1
    while True:
        b = 2.0 * (nu + j) / x
        d = b + d
        d = _TINY if d == 0.0 else d
        c = b + 1.0 / c
        c = _TINY if c == 0.0 else c
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < _EPS:
            break
        j += 1
        if j > 10_000_000:
            raise ArithmeticError("Bessel ratio continued fraction did not converge")
    return f
