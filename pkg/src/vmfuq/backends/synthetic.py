"""Synthetic backends: a closed two-stage VMF world with known entropies.

For a parent prompt ``l`` the world fixes a latent law ``VMF(mu_l, kappa_latent)``
in R^text_dim. Expansion ``i`` (under seed ``s``) is the text
``"<l>, <fill> [variant i/s]"``; embedding that text returns one draw from the
latent law, seeded by ``(world seed, l, s, i)``. Videos for a latent ``z`` are
draws from ``VMF(g(z), kappa_video)`` in R^video_dim, where ``g`` is the
identity when the dimensions agree and ``normalize(A z)`` for a fixed
Gaussian matrix ``A`` otherwise. ``kappa_video`` may be a list, used
cyclically by variant index. Texts that are not expansions embed to a
uniformly random direction seeded by their content.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .._util import canonical_json, canonical_text, derive_seed, sha256_hex
from ..errors import DomainError, MissingVideoError
from ..vmf import VmfParams, as_unit_vector, differential_entropy, sample_around
from .base import (
    LatentPrompt,
    PromptExpander,
    TextEmbedder,
    VideoEmbedder,
    VideoGenerator,
    VideoHandle,
    latent_id,
)

FILLS = (
    "seen up close",
    "in soft morning light",
    "filmed from a low angle",
    "on a rainy afternoon",
    "in a slow tracking shot",
    "under bright studio lights",
    "at dusk",
    "with a handheld camera",
    "in a wide establishing shot",
    "in slow motion",
)
_VARIANT = re.compile(r"^(?P<parent>.+), (?P<fill>[^,\[\]]+) \[variant (?P<index>\d+)/(?P<seed>-?\d+)\]$", re.S)


@dataclass(frozen=True)
class SyntheticLaw:
    latent: VmfParams
    kappa_video: tuple[float, ...]

    def video_kappa(self, index: int) -> float:
        return self.kappa_video[index % len(self.kappa_video)]


def _kappas(value) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),)
    out = tuple(float(v) for v in value)
    if not out:
        raise DomainError("kappa_video list must be nonempty")
    return out


@dataclass(frozen=True)
class SyntheticWorld:
    text_dim: int = 16
    video_dim: int = 16
    kappa_latent: float = 50.0
    kappa_video: float | tuple = 50.0
    seed: int = 0
    prompts: dict = field(default_factory=dict)
    latent_mean: Optional[tuple] = None

    def __post_init__(self):
        if self.text_dim < 2 or self.video_dim < 2:
            raise DomainError("synthetic dimensions must be >= 2")
        if self.latent_mean is not None and len(self.latent_mean) != self.text_dim:
            raise DomainError("latent_mean length must equal text_dim")

    # -- configuration -----------------------------------------------------
    def to_dict(self) -> dict:
        kv = self.kappa_video
        return {
            "text_dim": self.text_dim,
            "video_dim": self.video_dim,
            "kappa_latent": self.kappa_latent,
            "kappa_video": list(kv) if isinstance(kv, (list, tuple)) else kv,
            "seed": self.seed,
            "prompts": self.prompts,
            "latent_mean": None if self.latent_mean is None else list(self.latent_mean),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticWorld":
        data = dict(data)
        if isinstance(data.get("kappa_video"), list):
            data["kappa_video"] = tuple(data["kappa_video"])
        if data.get("latent_mean") is not None:
            data["latent_mean"] = tuple(float(x) for x in data["latent_mean"])
        prompts = {canonical_text(k): v for k, v in (data.get("prompts") or {}).items()}
        data["prompts"] = prompts
        return cls(**data)

    @cached_property
    def digest(self) -> str:
        return sha256_hex(canonical_json(self.to_dict()))[:16]

    @cached_property
    def _video_map(self) -> Optional[np.ndarray]:
        if self.video_dim == self.text_dim:
            return None
        rng = np.random.default_rng(derive_seed(self.seed, "video-map"))
        return rng.standard_normal((self.video_dim, self.text_dim))

    # -- laws ----------------------------------------------------------------
    def law_for(self, prompt: str) -> SyntheticLaw:
        key = canonical_text(prompt)
        override = self.prompts.get(key, {})
        if self.latent_mean is not None:
            mu = as_unit_vector(self.latent_mean)
        else:
            rng = np.random.default_rng(derive_seed(self.seed, "mean", key))
            mu = as_unit_vector(rng.standard_normal(self.text_dim))
        kz = float(override.get("kappa_latent", self.kappa_latent))
        kv = _kappas(override.get("kappa_video", self.kappa_video))
        return SyntheticLaw(VmfParams(mu, kz), kv)

    def video_direction(self, z: np.ndarray) -> np.ndarray:
        if self._video_map is None:
            return as_unit_vector(z)
        return as_unit_vector(self._video_map @ z)

    def ground_truth(self, prompt: str) -> np.ndarray:
        """The video-space direction the prompt's latent law is centered on."""
        return self.video_direction(self.law_for(prompt).latent.mean_direction)

    def true_aleatoric(self, prompt: str) -> float:
        law = self.law_for(prompt)
        return differential_entropy(self.text_dim, law.latent.concentration)

    def true_epistemic(self, prompt: str) -> float:
        """Mean conditional entropy over one cycle of the video concentrations."""
        law = self.law_for(prompt)
        return float(np.mean([differential_entropy(self.video_dim, k) for k in law.kappa_video]))

    # -- sampling --------------------------------------------------------------
    def latent_text(self, prompt: str, index: int, seed: int) -> str:
        fill = FILLS[(int(sha256_hex(canonical_text(prompt))[:8], 16) + index) % len(FILLS)]
        return f"{prompt}, {fill} [variant {index}/{seed}]"

    def parse_latent(self, text: str) -> Optional[tuple[str, int, int]]:
        m = _VARIANT.match(text)
        if m is None:
            return None
        return m.group("parent"), int(m.group("index")), int(m.group("seed"))

    def latent_vector(self, prompt: str, index: int, seed: int) -> np.ndarray:
        law = self.law_for(prompt)
        rng = np.random.default_rng(derive_seed(self.seed, "latent", canonical_text(prompt), seed, index))
        return sample_around(law.latent.mean_direction, law.latent.concentration, rng)[0]

    def text_vector(self, text: str) -> np.ndarray:
        parsed = self.parse_latent(text)
        if parsed is not None:
            return self.latent_vector(*parsed)
        rng = np.random.default_rng(derive_seed(self.seed, "text", canonical_text(text)))
        return as_unit_vector(rng.standard_normal(self.text_dim))

    def video_vectors(self, latent_text: str, count: int, seed: int) -> np.ndarray:
        parsed = self.parse_latent(latent_text)
        if parsed is not None:
            parent, index, _ = parsed
            kappa = self.law_for(parent).video_kappa(index)
        else:
            kappa = _kappas(self.kappa_video)[0]
        direction = self.video_direction(self.text_vector(latent_text))
        rng = np.random.default_rng(derive_seed(self.seed, "video", canonical_text(latent_text), seed))
        mus = np.broadcast_to(direction, (count, self.video_dim))
        return sample_around(mus, kappa, rng)


class SyntheticBackend(PromptExpander, TextEmbedder, VideoGenerator, VideoEmbedder):
    """All four roles backed by one :class:`SyntheticWorld`."""

    def __init__(self, world: SyntheticWorld, max_parallel: int = 4):
        self.world = world
        self.max_parallel = max_parallel

    @property
    def identity(self) -> str:
        return f"synthetic:{self.world.digest}"

    def expand_prompt(self, prompt: str, count: int, seed: int = 0) -> list[LatentPrompt]:
        if not prompt.strip():
            raise DomainError("prompt must be nonempty")
        if count < 1:
            raise DomainError("count must be >= 1")
        return [
            LatentPrompt(latent_id(i), self.world.latent_text(prompt, i, seed), prompt) for i in range(count)
        ]

    def embed_text(self, prompts: Sequence[str]) -> list[np.ndarray]:
        if not prompts:
            raise ValueError("embed_text needs at least one prompt")
        return [self.world.text_vector(p) for p in prompts]

    def generate_videos(self, latent: LatentPrompt, count: int, seed: int) -> list[VideoHandle]:
        vectors = self.world.video_vectors(latent.text, count, seed)
        stem = sha256_hex(canonical_json([canonical_text(latent.text), int(seed)]))[:16]
        return [
            VideoHandle(f"syn-{stem}-{j:03d}", f"synthetic://{stem}/{j}", latent.latent_id, vectors[j])
            for j in range(count)
        ]

    def embed_video(self, handle: VideoHandle) -> np.ndarray:
        if handle.embedding is None:
            raise MissingVideoError(f"synthetic video {handle.id} carries no embedding")
        return np.array(handle.embedding, dtype=np.float64)
