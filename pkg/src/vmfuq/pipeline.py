"""Aleatoric, epistemic, and total uncertainty of a text-conditioned generator.

Aleatoric: expand the prompt into N latent prompts, embed them, map the
embeddings onto a sphere (PCA when the ambient dimension exceeds the
target), fit a VMF, and take its entropy.

Epistemic: for every latent, generate m videos, embed them, fit a VMF in
video space, take its entropy, and average over latents.

Total: both estimators on one shared latent sample; ``total = aleatoric + epistemic``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._util import canonical_json, canonical_text, derive_seed, sha256_hex
from .backends.base import ROLES, BackendConfig, BackendSet, LatentPrompt
from .embedding import ProjectionModel, fit_projection, project
from .errors import BackendError, ConfigError, PipelineError, ZeroVectorError
from .vmf import VmfParams, fit_vmf, vmf_entropy

logger = logging.getLogger(__name__)

# rows whose normalized embeddings differ by less than this are "identical"
IDENTICAL_TOL = 1e-12


@dataclass(frozen=True)
class PipelineConfig:
    n_latents: int = 10
    m_videos: int = 10
    text_target_dim: int = 16
    video_target_dim: int = 16
    seed: int = 0
    center_pca: bool = True
    backends: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_latents < 2:
            raise ConfigError("n_latents must be >= 2")
        if self.m_videos < 2:
            raise ConfigError("m_videos must be >= 2")
        if self.text_target_dim < 2 or self.video_target_dim < 2:
            raise ConfigError("target dimensions must be >= 2")

    def to_dict(self) -> dict:
        return {
            "n_latents": self.n_latents,
            "m_videos": self.m_videos,
            "text_target_dim": self.text_target_dim,
            "video_target_dim": self.video_target_dim,
            "seed": self.seed,
            "center_pca": self.center_pca,
            "backends": {role: cfg.to_dict() for role, cfg in sorted(self.backends.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown pipeline config field(s): {sorted(unknown)}")
        backends = data.pop("backends", {}) or {}
        bad = set(backends) - set(ROLES)
        if bad:
            raise ConfigError(f"unknown backend role(s): {sorted(bad)}")
        parsed = {r: c if isinstance(c, BackendConfig) else BackendConfig.from_dict(c) for r, c in backends.items()}
        return cls(backends=parsed, **data)


def config_hash(config: PipelineConfig, backends: Optional[BackendSet] = None) -> str:
    payload = {"config": config.to_dict()}
    if backends is not None:
        payload["backends"] = backends.identities()
    return sha256_hex(canonical_json(payload))


@dataclass(frozen=True)
class LatentEntropy:
    latent_id: str
    entropy: float
    kappa: float
    dim: int

    def to_dict(self) -> dict:
        return {"latent_id": self.latent_id, "entropy": self.entropy, "kappa": self.kappa, "dim": self.dim}


@dataclass(frozen=True)
class LatentFit:
    kappa: float
    dim: int


@dataclass
class SphereEmbedding:
    points: np.ndarray
    projection: Optional[ProjectionModel]

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])


@dataclass
class AleatoricDiagnostics:
    params: VmfParams
    latents: list[LatentPrompt]
    projection: Optional[ProjectionModel]


@dataclass
class EpistemicDiagnostics:
    per_latent: list[LatentEntropy]
    dropped: list[dict]
    video_embeddings: dict[str, np.ndarray]


@dataclass
class UncertaintyReport:
    task_id: str
    prompt: str
    aleatoric: float
    epistemic: float
    total: float
    per_latent: list[LatentEntropy]
    latent_fit: LatentFit
    provenance: dict
    dropped: list[dict] = field(default_factory=list)
    status: str = "ok"
    accuracy: dict = field(default_factory=dict)
    video_embeddings: dict = field(default_factory=dict, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "prompt": self.prompt,
            "aleatoric": self.aleatoric,
            "epistemic": self.epistemic,
            "total": self.total,
            "per_latent": [p.to_dict() for p in self.per_latent],
            "latent_fit": {"kappa": self.latent_fit.kappa, "dim": self.latent_fit.dim},
            "provenance": self.provenance,
            "dropped": self.dropped,
            "status": self.status,
            "accuracy": self.accuracy,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UncertaintyReport":
        return cls(
            task_id=data["task_id"],
            prompt=data.get("prompt", ""),
            aleatoric=float(data["aleatoric"]),
            epistemic=float(data["epistemic"]),
            total=float(data["total"]),
            per_latent=[LatentEntropy(**p) for p in data.get("per_latent", [])],
            latent_fit=LatentFit(**data["latent_fit"]),
            provenance=data.get("provenance", {}),
            dropped=data.get("dropped", []),
            status=data.get("status", "ok"),
            accuracy=data.get("accuracy", {}),
        )


def to_sphere(raw, target_dim: int, center: bool = True) -> SphereEmbedding:
    """Place raw embeddings on a sphere of dimension at most ``target_dim``.

    Embeddings already no wider than ``target_dim`` are only normalized. A
    set of identical embeddings maps to copies of e1 in the dimension PCA
    would have produced, so the fit clamps to the maximum concentration.
    """
    x = np.asarray(raw, dtype=np.float64)
    x = x / np.linalg.norm(x, axis=1, keepdims=True)
    n_samples, ambient = x.shape
    if ambient <= target_dim:
        return SphereEmbedding(x, None)
    if np.max(np.abs(x - x[0])) < IDENTICAL_TOL:
        dim = max(2, min(target_dim, ambient, n_samples - 1))
        return SphereEmbedding(np.tile(np.eye(dim)[0], (n_samples, 1)), None)
    model = fit_projection(x, target_dim, center=center)
    try:
        points = np.vstack([project(model, row) for row in x])
    except ZeroVectorError as exc:
        raise PipelineError("an embedding coincides with the PCA mean; VMF fit is degenerate") from exc
    return SphereEmbedding(points, model)


def _expansion_seed(config: PipelineConfig, prompt: str) -> int:
    return derive_seed(config.seed, "expand", canonical_text(prompt))


def _video_seed(config: PipelineConfig, prompt: str, index: int) -> int:
    return derive_seed(config.seed, "video", canonical_text(prompt), index)


def sample_latents(prompt: str, config: PipelineConfig, backends: BackendSet) -> tuple[list[LatentPrompt], SphereEmbedding]:
    latents = backends.expander.expand_prompt(prompt, config.n_latents, _expansion_seed(config, prompt))
    if len(latents) != config.n_latents:
        raise PipelineError(f"expander returned {len(latents)} latents, expected {config.n_latents}")
    raw = np.vstack([np.asarray(v, dtype=np.float64) for v in backends.text_embedder.embed_text([z.text for z in latents])])
    sphere = to_sphere(raw, config.text_target_dim, config.center_pca)
    latents = [z.with_embeddings(raw[i], sphere.points[i]) for i, z in enumerate(latents)]
    return latents, sphere


def _aleatoric(latents: list[LatentPrompt], sphere: SphereEmbedding) -> tuple[float, AleatoricDiagnostics]:
    params = fit_vmf(sphere.points)
    return vmf_entropy(params), AleatoricDiagnostics(params, latents, sphere.projection)


def aleatoric_uncertainty(prompt: str, config: PipelineConfig, backends: BackendSet) -> tuple[float, AleatoricDiagnostics]:
    latents, sphere = sample_latents(prompt, config, backends)
    return _aleatoric(latents, sphere)


def _latent_entropy(latent: LatentPrompt, seed: int, config: PipelineConfig, backends: BackendSet):
    handles = backends.video_generator.generate_videos(latent, config.m_videos, seed)
    raw = np.vstack([np.asarray(backends.video_embedder.embed_video(h), dtype=np.float64) for h in handles])
    sphere = to_sphere(raw, config.video_target_dim, config.center_pca)
    params = fit_vmf(sphere.points)
    return LatentEntropy(latent.latent_id, vmf_entropy(params), params.concentration, params.dim), raw


def _epistemic(prompt: str, latents: list[LatentPrompt], config: PipelineConfig, backends: BackendSet):
    def work(item):
        i, z = item
        try:
            return _latent_entropy(z, _video_seed(config, prompt, i), config, backends)
        except BackendError as exc:
            logger.warning("latent %s dropped: %s", z.latent_id, exc)
            return exc

    workers = max(1, int(getattr(backends.video_generator, "max_parallel", 1)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(work, enumerate(latents)))
    per_latent, dropped, videos = [], [], {}
    for z, res in zip(latents, results):
        if isinstance(res, Exception):
            dropped.append({"latent_id": z.latent_id, "error": f"{type(res).__name__}: {res}"})
        else:
            entry, raw = res
            per_latent.append(entry)
            videos[z.latent_id] = raw
    needed = max(2, math.ceil(len(latents) / 2))
    if len(per_latent) < needed:
        raise PipelineError(f"only {len(per_latent)} of {len(latents)} latents produced videos; need {needed}")
    value = float(np.mean([p.entropy for p in per_latent]))
    return value, EpistemicDiagnostics(per_latent, dropped, videos)


def epistemic_uncertainty(prompt: str, config: PipelineConfig, backends: BackendSet) -> tuple[float, EpistemicDiagnostics]:
    latents, _ = sample_latents(prompt, config, backends)
    return _epistemic(prompt, latents, config, backends)


def total_uncertainty(
    prompt: str, config: PipelineConfig, backends: BackendSet, task_id: Optional[str] = None
) -> UncertaintyReport:
    latents, sphere = sample_latents(prompt, config, backends)
    aleatoric, adiag = _aleatoric(latents, sphere)
    epistemic, ediag = _epistemic(prompt, latents, config, backends)
    return UncertaintyReport(
        task_id=task_id if task_id is not None else sha256_hex(canonical_text(prompt))[:12],
        prompt=prompt,
        aleatoric=aleatoric,
        epistemic=epistemic,
        total=aleatoric + epistemic,
        per_latent=ediag.per_latent,
        latent_fit=LatentFit(adiag.params.concentration, adiag.params.dim),
        provenance={"config_hash": config_hash(config, backends), "backends": backends.identities()},
        dropped=ediag.dropped,
        status="partial" if ediag.dropped else "ok",
        video_embeddings=ediag.video_embeddings,
    )
