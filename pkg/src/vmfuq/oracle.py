"""Ground-truth oracles built on a two-stage VMF model.

``p(z | l) = VMF(mu, kappa_z)`` in R^text_dim and
``p(v | z) = VMF(g(z), kappa_v)`` in R^video_dim, with ``g`` as in
:mod:`vmfuq.backends.synthetic`. Every estimate carries a standard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from ._util import derive_seed
from .backends.base import BackendSet
from .backends.synthetic import SyntheticBackend, SyntheticWorld
from .errors import DomainError, NonFiniteError
from .vmf import VmfParams, differential_entropy, log_norm_const, sample_around, vmf_entropy

MIN_MC_SAMPLES = 1000
DEFAULT_MIXTURE_COMPONENTS = 256
# rows x components evaluated per block of the mixture density
_BLOCK_ELEMENTS = 1 << 23


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    n_samples: int

    def __post_init__(self):
        if self.std_error < 0:
            raise DomainError("std_error must be non-negative")

    def to_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "n_samples": self.n_samples}


def _estimate(values: np.ndarray) -> McEstimate:
    if not np.all(np.isfinite(values)):
        raise NonFiniteError("log-density produced non-finite values")
    n = values.size
    if np.all(values == values[0]):
        return McEstimate(float(values[0]), 0.0, n)
    return McEstimate(float(values.mean()), float(values.std(ddof=1) / math.sqrt(n)), n)


def mc_entropy(sampler: Callable[[int], np.ndarray], log_density: Callable[[np.ndarray], np.ndarray], count: int) -> McEstimate:
    """Estimate ``-E[log p(X)]`` from ``count`` draws of ``sampler``."""
    if count < MIN_MC_SAMPLES:
        raise DomainError(f"need at least {MIN_MC_SAMPLES} samples, got {count}")
    samples = sampler(count)
    logp = np.asarray(log_density(samples), dtype=np.float64).reshape(-1)
    if logp.size != count:
        raise DomainError(f"log_density returned {logp.size} values for {count} samples")
    return _estimate(-logp)


@dataclass(frozen=True)
class ConditionalLaw:
    """Concentration of ``p(v | z)``; a tuple is used cyclically by latent index."""

    concentration: float | tuple

    def is_constant(self) -> bool:
        c = self.concentration
        return isinstance(c, (int, float)) or len(set(c)) == 1

    def constant(self) -> float:
        c = self.concentration
        return float(c) if isinstance(c, (int, float)) else float(c[0])


@dataclass(frozen=True)
class HierarchicalModelSpec:
    text_dim: int
    video_dim: int
    latent_law: VmfParams
    conditional_law: ConditionalLaw
    seed: int = 0

    def __post_init__(self):
        if self.latent_law.dim != self.text_dim:
            raise DomainError("latent_law dimension must equal text_dim")

    def world(self) -> SyntheticWorld:
        c = self.conditional_law.concentration
        return SyntheticWorld(
            text_dim=self.text_dim,
            video_dim=self.video_dim,
            kappa_latent=self.latent_law.concentration,
            kappa_video=tuple(c) if isinstance(c, (list, tuple)) else float(c),
            seed=self.seed,
            latent_mean=tuple(self.latent_law.mean_direction.tolist()),
        )

    def to_dict(self) -> dict:
        c = self.conditional_law.concentration
        return {
            "text_dim": self.text_dim,
            "video_dim": self.video_dim,
            "latent_law": self.latent_law.to_dict(),
            "conditional_law": {"concentration": list(c) if isinstance(c, (list, tuple)) else c},
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HierarchicalModelSpec":
        c = data["conditional_law"]["concentration"]
        return cls(
            text_dim=int(data["text_dim"]),
            video_dim=int(data["video_dim"]),
            latent_law=VmfParams.from_dict(data["latent_law"]),
            conditional_law=ConditionalLaw(tuple(c) if isinstance(c, list) else float(c)),
            seed=int(data.get("seed", 0)),
        )

    @classmethod
    def simple(cls, text_dim: int, video_dim: int, kappa_latent: float, kappa_video: float, seed: int = 0):
        """Latent law centered on e1."""
        return cls(text_dim, video_dim, VmfParams(np.eye(text_dim)[0], kappa_latent), ConditionalLaw(kappa_video), seed)


@dataclass(frozen=True)
class AuditResult:
    """Monte-Carlo witnesses for the entropy decomposition.

    ``lhs`` estimates the marginal entropy h(V | l) with a K-component
    mixture density; ``joint`` estimates h(V, Z | l) from the same draws.
    """

    lhs: McEstimate
    rhs_aleatoric: float
    rhs_epistemic: McEstimate
    joint: McEstimate
    mixture_components: int

    @property
    def rhs(self) -> float:
        return self.rhs_aleatoric + self.rhs_epistemic.value

    @property
    def gap(self) -> float:
        return self.lhs.value - self.rhs

    @property
    def combined_std_error(self) -> float:
        return math.hypot(self.lhs.std_error, self.rhs_epistemic.std_error)

    @property
    def joint_gap(self) -> float:
        return self.joint.value - self.rhs

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs.to_dict(),
            "rhs_aleatoric": self.rhs_aleatoric,
            "rhs_epistemic": self.rhs_epistemic.to_dict(),
            "joint": self.joint.to_dict(),
            "mixture_components": self.mixture_components,
            "gap": self.gap,
            "combined_std_error": self.combined_std_error,
            "joint_gap": self.joint_gap,
        }


def _mixture_log_density(v: np.ndarray, centers: np.ndarray, kappa: float) -> np.ndarray:
    dim = v.shape[1]
    log_c = log_norm_const(dim, kappa)
    out = np.empty(v.shape[0])
    rows = max(1, _BLOCK_ELEMENTS // centers.shape[0])
    for start in range(0, v.shape[0], rows):
        block = v[start:start + rows]
        out[start:start + rows] = logsumexp(log_c + kappa * (block @ centers.T), axis=1)
    return out - math.log(centers.shape[0])


def decomposition_audit(
    spec: HierarchicalModelSpec, M: int, mixture_components: int = DEFAULT_MIXTURE_COMPONENTS
) -> AuditResult:
    """Estimate h(V | l), h(Z | l), h(V | Z) and h(V, Z | l) by Monte Carlo."""
    if not spec.conditional_law.is_constant():
        raise DomainError("the audit requires a constant conditional concentration")
    if mixture_components < 1:
        raise DomainError("mixture_components must be >= 1")
    world = spec.world()
    kz = spec.latent_law.concentration
    kv = spec.conditional_law.constant()
    mu = spec.latent_law.mean_direction
    rng = np.random.default_rng(derive_seed(spec.seed, "audit", M, mixture_components))

    def to_video(z: np.ndarray) -> np.ndarray:
        return np.vstack([world.video_direction(row) for row in z]) if world.video_dim != world.text_dim else z

    z = sample_around(np.broadcast_to(mu, (M, spec.text_dim)), kz, rng)
    dirs = to_video(z)
    v = sample_around(dirs, kv, rng)
    centers = to_video(sample_around(np.broadcast_to(mu, (mixture_components, spec.text_dim)), kz, rng))

    lhs = mc_entropy(lambda count: v, lambda x: _mixture_log_density(x, centers, kv), M)
    log_pz = log_norm_const(spec.text_dim, kz) + kz * (z @ mu)
    log_pv_given_z = log_norm_const(spec.video_dim, kv) + kv * np.einsum("ij,ij->i", v, dirs)
    joint = _estimate(-(log_pz + log_pv_given_z))
    per_latent = np.full(M, differential_entropy(spec.video_dim, kv))
    return AuditResult(
        lhs=lhs,
        rhs_aleatoric=vmf_entropy(spec.latent_law),
        rhs_epistemic=_estimate(per_latent),
        joint=joint,
        mixture_components=mixture_components,
    )


def make_synthetic_backends(spec: HierarchicalModelSpec, max_parallel: int = 4) -> BackendSet:
    """All four backend roles drawing from ``spec``'s laws for every prompt."""
    backend = SyntheticBackend(spec.world(), max_parallel=max_parallel)
    return BackendSet(backend, backend, backend, backend)
