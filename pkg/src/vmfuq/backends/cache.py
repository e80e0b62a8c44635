"""Content-addressed on-disk cache in front of a :class:`BackendSet`.

Entries live at ``<root>/<kind>/<key>.json``; ``key`` is the SHA-256 of the
backend identity plus the canonical inputs (and count/seed where they
matter). Reads and writes of one key are serialized through
``<key>.lock`` so concurrent workers never observe a half-written entry.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np
from filelock import FileLock

from .._util import atomic_write_text, canonical_json, canonical_text, sha256_hex
from .base import (
    BackendSet,
    LatentPrompt,
    PromptExpander,
    TextEmbedder,
    VideoEmbedder,
    VideoGenerator,
    VideoHandle,
    make_latents,
)


class ContentCache:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.hits = 0
        self.misses = 0

    def key(self, *parts) -> str:
        return sha256_hex(canonical_json(list(parts)))

    def _path(self, kind: str, key: str) -> Path:
        return self.root / kind / f"{key}.json"

    def get_or_compute(self, kind: str, key: str, compute):
        path = self._path(kind, key)
        path.parent.mkdir(parents=True, exist_ok=True)
        with FileLock(str(path.with_suffix(".lock"))):
            if path.exists():
                self.hits += 1
                return json.loads(path.read_text(encoding="utf-8"))
            self.misses += 1
            value = compute()
            atomic_write_text(path, json.dumps(value, allow_nan=False))
            return value


class _CachedExpander(PromptExpander):
    def __init__(self, inner: PromptExpander, cache: ContentCache):
        self.inner, self.cache = inner, cache
        self.max_parallel = inner.max_parallel

    @property
    def identity(self) -> str:
        return self.inner.identity

    def expand_prompt(self, prompt: str, count: int, seed: int = 0) -> list[LatentPrompt]:
        key = self.cache.key(self.identity, "expand", canonical_text(prompt), int(count), int(seed))
        texts = self.cache.get_or_compute(
            "expansion", key, lambda: [z.text for z in self.inner.expand_prompt(prompt, count, seed)]
        )
        return make_latents(prompt, texts)


class _CachedTextEmbedder(TextEmbedder):
    def __init__(self, inner: TextEmbedder, cache: ContentCache):
        self.inner, self.cache = inner, cache
        self.max_parallel = inner.max_parallel

    @property
    def identity(self) -> str:
        return self.inner.identity

    def embed_text(self, prompts: Sequence[str]) -> list[np.ndarray]:
        keys = [self.cache.key(self.identity, "embed_text", canonical_text(p)) for p in prompts]
        missing = [i for i, k in enumerate(keys) if not self.cache._path("text_embedding", k).exists()]
        fetched = {}
        if missing:
            vectors = self.inner.embed_text([prompts[i] for i in missing])
            fetched = {i: np.asarray(v, dtype=np.float64).tolist() for i, v in zip(missing, vectors)}
        out = []
        for i, k in enumerate(keys):
            value = self.cache.get_or_compute("text_embedding", k, lambda i=i: fetched.get(i) or self._one(prompts[i]))
            out.append(np.asarray(value, dtype=np.float64))
        return out

    def _one(self, prompt: str) -> list:
        return np.asarray(self.inner.embed_text([prompt])[0], dtype=np.float64).tolist()


class _CachedVideoGenerator(VideoGenerator):
    def __init__(self, inner: VideoGenerator, cache: ContentCache):
        self.inner, self.cache = inner, cache
        self.max_parallel = inner.max_parallel

    @property
    def identity(self) -> str:
        return self.inner.identity

    def generate_videos(self, latent: LatentPrompt, count: int, seed: int) -> list[VideoHandle]:
        key = self.cache.key(self.identity, "generate", canonical_text(latent.text), int(count), int(seed))
        rows = self.cache.get_or_compute(
            "video", key, lambda: [h.to_dict() for h in self.inner.generate_videos(latent, count, seed)]
        )
        handles = [VideoHandle.from_dict(r) for r in rows]
        return [VideoHandle(h.id, h.storage_ref, latent.latent_id, h.embedding) for h in handles]


class _CachedVideoEmbedder(VideoEmbedder):
    def __init__(self, inner: VideoEmbedder, cache: ContentCache):
        self.inner, self.cache = inner, cache
        self.max_parallel = inner.max_parallel

    @property
    def identity(self) -> str:
        return self.inner.identity

    def embed_video(self, handle: VideoHandle) -> np.ndarray:
        key = self.cache.key(self.identity, "embed_video", handle.id)
        value = self.cache.get_or_compute(
            "video_embedding", key, lambda: np.asarray(self.inner.embed_video(handle), dtype=np.float64).tolist()
        )
        return np.asarray(value, dtype=np.float64)


def cached_backends(backends: BackendSet, cache: ContentCache) -> BackendSet:
    return BackendSet(
        _CachedExpander(backends.expander, cache),
        _CachedTextEmbedder(backends.text_embedder, cache),
        _CachedVideoGenerator(backends.video_generator, cache),
        _CachedVideoEmbedder(backends.video_embedder, cache),
    )
