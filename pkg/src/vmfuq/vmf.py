"""Von Mises-Fisher distribution on the unit sphere S^{n-1}.

Density ``f(x) = C_n(kappa) exp(kappa mu.x)`` with
``C_n(kappa) = kappa^{n/2-1} / ((2 pi)^{n/2} I_{n/2-1}(kappa))``.
All logarithms are natural; entropies are in nats.

Random numbers come from :func:`numpy.random.default_rng` (PCG64) seeded
with the caller's integer seed. Sampling uses Wood's rejection scheme: for
each accepted draw it consumes one Beta((n-1)/2, (n-1)/2) variate and one
U(0, 1) variate per proposal (in vectorized batches), then ``n - 1``
standard normals for the tangent direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .bessel import bessel_ratio, log_bessel_i
from .errors import (
    DegenerateInputError,
    DimensionMismatchError,
    DomainError,
    InsufficientSamplesError,
    NonFiniteError,
    ZeroVectorError,
)

KAPPA_MAX = 1e5
RBAR_MAX = 1.0 - 1e-12
UNIT_TOL = 1e-9


def as_unit_vector(components) -> np.ndarray:
    """Renormalize ``components`` onto the unit sphere."""
    v = np.asarray(components, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("vector has non-finite components")
    norm = float(np.linalg.norm(v))
    if norm == 0.0 or not math.isfinite(norm):
        raise ZeroVectorError("cannot normalize a zero vector")
    return v / norm


@dataclass(frozen=True)
class VmfParams:
    mean_direction: np.ndarray
    concentration: float

    def __post_init__(self):
        mu = np.asarray(self.mean_direction, dtype=np.float64).reshape(-1)
        if mu.size < 2:
            raise DomainError("VMF dimension must be at least 2")
        if abs(float(np.linalg.norm(mu)) - 1.0) > UNIT_TOL:
            mu = as_unit_vector(mu)
        kappa = float(self.concentration)
        if not (0.0 <= kappa <= KAPPA_MAX):
            raise DomainError(f"concentration {kappa} outside [0, {KAPPA_MAX}]")
        mu.setflags(write=False)
        object.__setattr__(self, "mean_direction", mu)
        object.__setattr__(self, "concentration", kappa)

    @property
    def dim(self) -> int:
        return int(self.mean_direction.size)

    def to_dict(self) -> dict:
        return {
            "mean_direction": self.mean_direction.tolist(),
            "concentration": self.concentration,
            "dim": self.dim,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VmfParams":
        params = cls(np.asarray(data["mean_direction"], dtype=np.float64), data["concentration"])
        if "dim" in data and int(data["dim"]) != params.dim:
            raise DimensionMismatchError("dim does not match mean_direction length")
        return params


def _check_dim_kappa(dim: int, kappa: float) -> tuple[int, float]:
    if int(dim) != dim or dim < 2:
        raise DomainError(f"dimension must be an integer >= 2, got {dim}")
    kappa = float(kappa)
    if not math.isfinite(kappa) or not (0.0 <= kappa <= KAPPA_MAX):
        raise DomainError(f"concentration {kappa} outside [0, {KAPPA_MAX}]")
    return int(dim), kappa


def log_uniform_density(dim: int) -> float:
    """ln of the reciprocal surface area of S^{dim-1}."""
    return float(gammaln(dim / 2.0) - math.log(2.0) - (dim / 2.0) * math.log(math.pi))


def log_norm_const(dim: int, kappa: float) -> float:
    """ln C_n(kappa); continuous at kappa = 0 (uniform density)."""
    dim, kappa = _check_dim_kappa(dim, kappa)
    if kappa == 0.0:
        return log_uniform_density(dim)
    nu = dim / 2.0 - 1.0
    return nu * math.log(kappa) - (dim / 2.0) * math.log(2.0 * math.pi) - log_bessel_i(nu, kappa)


def mean_resultant(dim: int, kappa: float) -> float:
    """Bessel ratio W_n(kappa) = I_{n/2}(kappa) / I_{n/2-1}(kappa)."""
    dim, kappa = _check_dim_kappa(dim, kappa)
    return bessel_ratio(dim / 2.0 - 1.0, kappa)


def differential_entropy(dim: int, kappa: float) -> float:
    """Entropy of VMF(dim, kappa): ``-ln C_n(kappa) - kappa W_n(kappa)``."""
    return -log_norm_const(dim, kappa) - kappa * mean_resultant(dim, kappa)


def vmf_entropy(params: VmfParams) -> float:
    return differential_entropy(params.dim, params.concentration)


def entropy_floor(dim: int) -> float:
    """Smallest entropy reportable in ``dim`` dimensions (kappa at KAPPA_MAX)."""
    return differential_entropy(dim, KAPPA_MAX)


def vmf_log_pdf(x, params: VmfParams) -> np.ndarray:
    """Log density at each row of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.dim:
        raise DimensionMismatchError(f"expected dim {params.dim}, got {x.shape[-1]}")
    return log_norm_const(params.dim, params.concentration) + params.concentration * (x @ params.mean_direction)


def fit_vmf(samples: Sequence) -> VmfParams:
    """Closed-form fit: normalized resultant for the mean, Banerjee's formula for kappa.

    With ``rbar = |sum x_i| / N``, ``kappa = rbar (n - rbar^2) / (1 - rbar^2)``;
    ``rbar`` is clamped below 1 and kappa to ``[0, KAPPA_MAX]``.
    """
    try:
        x = np.asarray(samples, dtype=np.float64)
    except ValueError as exc:
        raise DimensionMismatchError("samples have inconsistent dimensions") from exc
    if x.ndim != 2:
        raise DimensionMismatchError("samples must form an (N, n) array of equal-length vectors")
    n_samples, dim = x.shape
    if n_samples < 2:
        raise InsufficientSamplesError(f"need at least 2 samples, got {n_samples}")
    if dim < 2:
        raise DomainError("VMF dimension must be at least 2")
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("samples contain non-finite values")
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0.0):
        raise ZeroVectorError("samples contain a zero vector")
    x = x / norms[:, None]
    resultant = x.sum(axis=0)
    length = float(np.linalg.norm(resultant))
    if length == 0.0:
        raise DegenerateInputError("samples sum to zero; mean direction undefined")
    rbar = min(length / n_samples, RBAR_MAX)
    kappa = rbar * (dim - rbar * rbar) / (1.0 - rbar * rbar)
    kappa = min(max(kappa, 0.0), KAPPA_MAX)
    return VmfParams(resultant / length, kappa)


def _wood_cosines(dim: int, kappa: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` values of ``w = mu.x`` by Wood's rejection method."""
    m1 = dim - 1.0
    b = m1 / (2.0 * kappa + math.sqrt(4.0 * kappa * kappa + m1 * m1))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + m1 * math.log(1.0 - x0 * x0)
    out = np.empty(count)
    filled = 0
    while filled < count:
        need = count - filled
        batch = int(need * 1.2) + 16
        z = rng.beta(m1 / 2.0, m1 / 2.0, size=batch)
        u = rng.uniform(size=batch)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        accept = kappa * w + m1 * np.log1p(-x0 * w) - c >= np.log(u)
        got = w[accept][:need]
        out[filled:filled + got.size] = got
        filled += got.size
    return out


def _tangent_directions(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((count, dim - 1))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return g / norms


def _rotate_from_e1(x: np.ndarray, mus: np.ndarray) -> np.ndarray:
    """Reflect rows of ``x`` (drawn around e1) to be centered on ``mus``.

    ``mus`` is a single direction or one direction per row. The Householder
    reflection mapping e1 to mu is applied row-wise.
    """
    mus = np.broadcast_to(mus, x.shape)
    u = -mus.copy()
    u[:, 0] += 1.0
    uu = np.einsum("ij,ij->i", u, u)
    safe = uu > 1e-30
    coef = np.zeros_like(uu)
    coef[safe] = 2.0 * np.einsum("ij,ij->i", x[safe], u[safe]) / uu[safe]
    return x - coef[:, None] * u


def sample_around(mus: np.ndarray, kappa: float, rng: np.random.Generator) -> np.ndarray:
    """One VMF(mu_i, kappa) draw per row of ``mus`` (rows are unit vectors)."""
    mus = np.atleast_2d(np.asarray(mus, dtype=np.float64))
    count, dim = mus.shape
    w = _wood_cosines(dim, kappa, count, rng)
    v = _tangent_directions(dim, count, rng)
    x = np.empty((count, dim))
    x[:, 0] = w
    x[:, 1:] = np.sqrt(np.clip(1.0 - w * w, 0.0, None))[:, None] * v
    return _rotate_from_e1(x, mus)


def sample_vmf(params: VmfParams, count: int, seed: int) -> np.ndarray:
    """``count`` samples from ``params`` as a ``(count, n)`` array; deterministic in ``seed``."""
    if int(count) != count or count < 1:
        raise DomainError(f"count must be a positive integer, got {count}")
    rng = np.random.default_rng(seed)
    mus = np.broadcast_to(params.mean_direction, (int(count), params.dim))
    return sample_around(mus, params.concentration, rng)
