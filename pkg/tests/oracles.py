"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import itertools
import math

import numpy as np


def log_norm_const_n3(kappa: float) -> float:
    """ln(kappa / (4 pi sinh kappa))."""
    return math.log(kappa) - math.log(4 * math.pi) - (kappa + math.log1p(-math.exp(-2 * kappa)) - math.log(2))


def mean_resultant_n3(kappa: float) -> float:
    return 1.0 / math.tanh(kappa) - 1.0 / kappa


def entropy_n3(kappa: float) -> float:
    """ln(4 pi sinh(kappa) / kappa) - kappa coth(kappa) + 1."""
    return -log_norm_const_n3(kappa) - kappa / math.tanh(kappa) + 1.0


def log_i_half(x: float) -> float:
    """ln I_{1/2}(x) = ln(sqrt(2 / (pi x)) sinh x)."""
    return 0.5 * math.log(2.0 / (math.pi * x)) + math.log(math.sinh(x))


def log_i_debye(nu: float, x: float) -> float:
    """Uniform (Debye) asymptotic expansion of ln I_nu(nu z), terms u_1..u_4."""
    z = x / nu
    s = math.sqrt(1.0 + z * z)
    t = 1.0 / s
    eta = s + math.log(z / (1.0 + s))
    u = [
        1.0,
        (3 * t - 5 * t**3) / 24,
        (81 * t**2 - 462 * t**4 + 385 * t**6) / 1152,
        (30375 * t**3 - 369603 * t**5 + 765765 * t**7 - 425425 * t**9) / 414720,
        (4465125 * t**4 - 94121676 * t**6 + 349922430 * t**8 - 446185740 * t**10 + 185910725 * t**12) / 39813120,
    ]
    series = sum(uk / nu**k for k, uk in enumerate(u))
    return -0.5 * math.log(2 * math.pi * nu) + nu * eta - 0.5 * math.log(s) + math.log(series)


def log_i0_series(x: float, terms: int = 60) -> float:
    """ln I_0(x) from the plain power series sum (x/2)^(2k) / (k!)^2."""
    return math.log(math.fsum((x / 2) ** (2 * k) / math.factorial(k) ** 2 for k in range(terms)))


def brute_kendall(x, y) -> tuple[float, int, int, int]:
    """tau-b by O(n^2) pair counting; returns (tau, concordant, discordant, n)."""
    conc = disc = tx = ty = 0
    n = len(x)
    for i, j in itertools.combinations(range(n), 2):
        dx = np.sign(x[i] - x[j])
        dy = np.sign(y[i] - y[j])
        if dx == 0 and dy == 0:
            continue
        if dx == 0:
            tx += 1
        elif dy == 0:
            ty += 1
        elif dx == dy:
            conc += 1
        else:
            disc += 1
    denom = math.sqrt((conc + disc + tx) * (conc + disc + ty))
    return (conc - disc) / denom, conc, disc, n


def brute_exact_p(x, y) -> float:
    """Two-sided permutation p-value of S by enumerating all orderings of y."""
    n = len(x)

    def s_of(yy):
        return sum(np.sign(x[i] - x[j]) * np.sign(yy[i] - yy[j]) for i, j in itertools.combinations(range(n), 2))

    s_obs = abs(s_of(y))
    hits = total = 0
    for perm in itertools.permutations(y):
        total += 1
        hits += abs(s_of(perm)) >= s_obs
    return hits / total


def angle_degrees(a, b) -> float:
    c = float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
    return math.degrees(math.acos(max(-1.0, min(1.0, c))))
