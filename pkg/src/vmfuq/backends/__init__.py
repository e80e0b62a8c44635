"""Pluggable external-model backends (HTTP, precomputed file, synthetic)."""

from __future__ import annotations

from typing import Mapping

from .._util import canonical_json
from ..errors import ConfigError
from .base import (
    KINDS,
    ROLES,
    BackendConfig,
    BackendSet,
    LatentPrompt,
    PromptExpander,
    RetryPolicy,
    TextEmbedder,
    VideoEmbedder,
    VideoGenerator,
    VideoHandle,
)
from .cache import ContentCache, cached_backends
from .file import FileBackend, FileStore
from .http import (
    HttpPromptExpander,
    HttpTextEmbedder,
    HttpVideoEmbedder,
    HttpVideoGenerator,
    JsonClient,
    RequestBudget,
    parse_numbered_list,
)
from .synthetic import SyntheticBackend, SyntheticWorld

_HTTP = {
    "expander": HttpPromptExpander,
    "text_embedder": HttpTextEmbedder,
    "video_generator": HttpVideoGenerator,
    "video_embedder": HttpVideoEmbedder,
}


def build_backend_set(configs: Mapping[str, BackendConfig]) -> BackendSet:
    """Instantiate one backend per role.

    Synthetic roles with identical ``options`` share one world; file roles
    with the same ``path`` share one store.
    """
    missing = [r for r in ROLES if r not in configs]
    if missing:
        raise ConfigError(f"backend roles not configured: {missing}")
    shared: dict[str, object] = {}
    built = {}
    for role in ROLES:
        cfg = configs[role]
        if cfg.kind == "http":
            built[role] = _HTTP[role](cfg)
        elif cfg.kind == "synthetic":
            key = "synthetic:" + canonical_json(cfg.options)
            if key not in shared:
                shared[key] = SyntheticBackend(SyntheticWorld.from_dict(cfg.options), cfg.max_parallel)
            built[role] = shared[key]
        else:
            key = "file:" + str(cfg.path)
            if key not in shared:
                shared[key] = FileBackend(cfg.path, max_parallel=cfg.max_parallel)
            built[role] = shared[key]
    return BackendSet(**built)


__all__ = [
    "KINDS",
    "ROLES",
    "BackendConfig",
    "BackendSet",
    "ContentCache",
    "FileBackend",
    "FileStore",
    "HttpPromptExpander",
    "HttpTextEmbedder",
    "HttpVideoEmbedder",
    "HttpVideoGenerator",
    "JsonClient",
    "LatentPrompt",
    "PromptExpander",
    "RequestBudget",
    "RetryPolicy",
    "SyntheticBackend",
    "SyntheticWorld",
    "TextEmbedder",
    "VideoEmbedder",
    "VideoGenerator",
    "VideoHandle",
    "build_backend_set",
    "cached_backends",
    "parse_numbered_list",
]
