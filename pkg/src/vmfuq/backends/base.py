"""Backend roles, value types, and configuration."""

from __future__ import annotations

import abc
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ..errors import ConfigError, DomainError

KINDS = ("http", "file", "synthetic")
ROLES = ("expander", "text_embedder", "video_generator", "video_embedder")


@dataclass(frozen=True)
class LatentPrompt:
    """A fully specified prompt sampled for a parent prompt."""

    latent_id: str
    text: str
    parent_prompt: str
    embedding: Optional[np.ndarray] = None
    raw_embedding: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise DomainError("latent prompt text must be nonempty")

    def with_embeddings(self, raw, projected) -> "LatentPrompt":
        return replace(self, raw_embedding=raw, embedding=projected)

    def to_dict(self) -> dict:
        return {"latent_id": self.latent_id, "text": self.text, "parent_prompt": self.parent_prompt}


@dataclass(frozen=True)
class VideoHandle:
    id: str
    storage_ref: str
    latent_id: str
    embedding: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        out = {"id": self.id, "storage_ref": self.storage_ref, "latent_id": self.latent_id}
        if self.embedding is not None:
            out["embedding"] = np.asarray(self.embedding).tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "VideoHandle":
        emb = data.get("embedding")
        return cls(
            id=data["id"],
            storage_ref=data.get("storage_ref", ""),
            latent_id=data.get("latent_id", ""),
            embedding=None if emb is None else np.asarray(emb, dtype=np.float64),
        )


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_seconds: float = 1.0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ConfigError("retry.max_attempts must be >= 1")
        if self.backoff_seconds < 0:
            raise ConfigError("retry.backoff_seconds must be >= 0")


@dataclass(frozen=True)
class BackendConfig:
    """How to reach one backend role.

    ``credentials_env`` names the environment variable holding the API key;
    the key itself never appears in configuration. ``max_requests`` is the
    hard request budget for one run (``None`` = unlimited).
    """

    kind: str
    endpoint: Optional[str] = None
    model_name: Optional[str] = None
    credentials_env: Optional[str] = None
    timeout: float = 60.0
    max_parallel: int = 4
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    max_requests: Optional[int] = None
    batch_size: int = 16
    path: Optional[str] = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown backend kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "http" and not self.endpoint:
            raise ConfigError("http backends require an endpoint")
        if self.kind == "file" and not self.path:
            raise ConfigError("file backends require a path")
        if self.max_parallel < 1:
            raise ConfigError("max_parallel must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "endpoint": self.endpoint,
            "model_name": self.model_name,
            "credentials_env": self.credentials_env,
            "timeout": self.timeout,
            "max_parallel": self.max_parallel,
            "retry": {"max_attempts": self.retry.max_attempts, "backoff_seconds": self.retry.backoff_seconds},
            "max_requests": self.max_requests,
            "batch_size": self.batch_size,
            "path": self.path,
            "options": self.options,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BackendConfig":
        data = dict(data)
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown backend config field(s): {sorted(unknown)}")
        if "retry" in data:
            retry = data["retry"]
            if isinstance(retry, (list, tuple)):
                retry = {"max_attempts": retry[0], "backoff_seconds": retry[1]}
            data["retry"] = RetryPolicy(**retry)
        return cls(**data)


class Backend(abc.ABC):
    max_parallel: int = 1

    @property
    @abc.abstractmethod
    def identity(self) -> str:
        """Stable description of the backend used for provenance and cache keys."""


class PromptExpander(Backend):
    @abc.abstractmethod
    def expand_prompt(self, prompt: str, count: int, seed: int = 0) -> list[LatentPrompt]:
        ...


class TextEmbedder(Backend):
    @abc.abstractmethod
    def embed_text(self, prompts: Sequence[str]) -> list[np.ndarray]:
        ...


class VideoGenerator(Backend):
    @abc.abstractmethod
    def generate_videos(self, latent: LatentPrompt, count: int, seed: int) -> list[VideoHandle]:
        ...


class VideoEmbedder(Backend):
    @abc.abstractmethod
    def embed_video(self, handle: VideoHandle) -> np.ndarray:
        ...


@dataclass
class BackendSet:
    expander: PromptExpander
    text_embedder: TextEmbedder
    video_generator: VideoGenerator
    video_embedder: VideoEmbedder

    def identities(self) -> dict[str, str]:
        return {role: getattr(self, role).identity for role in ROLES}

    def with_videos(self, generator: VideoGenerator, embedder: VideoEmbedder) -> "BackendSet":
        return BackendSet(self.expander, self.text_embedder, generator, embedder)


def latent_id(index: int) -> str:
    return f"z{index:03d}"


def make_latents(prompt: str, texts: Sequence[str]) -> list[LatentPrompt]:
    return [LatentPrompt(latent_id(i), t, prompt) for i, t in enumerate(texts)]
