"""Backends answering from a precomputed JSONL manifest.

Each line is ``{"kind": ..., "key": ..., "value": ...}``:

* ``expansion``: key = SHA-256 of the canonical parent prompt, value = list of prompt strings
* ``text_embedding``: key = SHA-256 of the canonical text, value = list of floats
* ``video``: key = video id, value = ``{"latent_key": <SHA-256 of latent text>, "storage_ref": str}``
  (``"latent": <text>`` may replace ``latent_key``)
* ``video_embedding``: key = video id, value = list of floats

Canonical text is NFC-normalized, trimmed, with whitespace runs collapsed.
Rows of a kind keep file order. A ``fallback`` backend, when given, is asked
only for keys missing from the manifest.
"""

from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .._util import sha256_hex, text_key
from ..errors import ConfigError, MalformedResponseError, MissingVideoError
from .base import (
    LatentPrompt,
    PromptExpander,
    TextEmbedder,
    VideoEmbedder,
    VideoGenerator,
    VideoHandle,
    make_latents,
)
from .http import DimensionInconsistencyError

ROW_KINDS = ("expansion", "text_embedding", "video", "video_embedding")


class FileStore:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.rows: dict[str, dict[str, object]] = {k: {} for k in ROW_KINDS}
        self.videos_by_latent: dict[str, list[VideoHandle]] = defaultdict(list)
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    kind, key, value = row["kind"], row["key"], row["value"]
                except (ValueError, KeyError, TypeError) as exc:
                    raise ConfigError(f"{self.path}:{lineno}: malformed manifest row") from exc
                if kind not in ROW_KINDS:
                    raise ConfigError(f"{self.path}:{lineno}: unknown kind {kind!r}")
                self.rows[kind][key] = value
                if kind == "video":
                    latent_key = value.get("latent_key") or text_key(value["latent"])
                    self.videos_by_latent[latent_key].append(
                        VideoHandle(key, value.get("storage_ref", ""), "")
                    )

    @property
    def digest(self) -> str:
        return sha256_hex(self.path.read_bytes())[:16]


class FileBackend(PromptExpander, TextEmbedder, VideoGenerator, VideoEmbedder):
    """All four roles served from one manifest."""

    def __init__(self, store: FileStore | str | Path, fallback=None, max_parallel: int = 4):
        self.store = store if isinstance(store, FileStore) else FileStore(store)
        self.fallback = fallback
        self.max_parallel = max_parallel

    @property
    def identity(self) -> str:
        return f"file:{self.store.digest}"

    def expand_prompt(self, prompt: str, count: int, seed: int = 0) -> list[LatentPrompt]:
        stored = self.store.rows["expansion"].get(text_key(prompt))
        if stored is None:
            if self.fallback is not None:
                return self.fallback.expand_prompt(prompt, count, seed)
            raise MalformedResponseError(f"no stored expansion for prompt {prompt!r}")
        if len(stored) < count:
            raise MalformedResponseError(
                f"stored expansion has {len(stored)} prompts, {count} requested (short by {count - len(stored)})"
            )
        return make_latents(prompt, stored[:count])

    def embed_text(self, prompts: Sequence[str]) -> list[np.ndarray]:
        table = self.store.rows["text_embedding"]
        out: list[Optional[np.ndarray]] = []
        missing = []
        for i, p in enumerate(prompts):
            value = table.get(text_key(p))
            out.append(None if value is None else np.asarray(value, dtype=np.float64))
            if value is None:
                missing.append(i)
        if missing:
            if self.fallback is None:
                raise MalformedResponseError(f"{len(missing)} text(s) have no stored embedding")
            fetched = self.fallback.embed_text([prompts[i] for i in missing])
            for i, v in zip(missing, fetched):
                out[i] = np.asarray(v, dtype=np.float64)
        if len({v.size for v in out}) > 1:
            raise DimensionInconsistencyError("stored text embeddings differ in dimension")
        return out  # type: ignore[return-value]

    def generate_videos(self, latent: LatentPrompt, count: int, seed: int) -> list[VideoHandle]:
        stored = self.store.videos_by_latent.get(text_key(latent.text), [])
        if len(stored) < count:
            if self.fallback is not None:
                return self.fallback.generate_videos(latent, count, seed)
            raise MissingVideoError(f"manifest lists {len(stored)} videos for latent {latent.latent_id}, need {count}")
        return [VideoHandle(h.id, h.storage_ref, latent.latent_id) for h in stored[:count]]

    def embed_video(self, handle: VideoHandle) -> np.ndarray:
        value = self.store.rows["video_embedding"].get(handle.id)
        if value is None:
            if self.fallback is not None:
                return self.fallback.embed_video(handle)
            raise MissingVideoError(f"no precomputed embedding for video {handle.id}")
        return np.asarray(value, dtype=np.float64)


def manifest_row(kind: str, key: str, value) -> str:
    """One JSONL line in the manifest format."""
    if kind not in ROW_KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    return json.dumps({"kind": kind, "key": key, "value": value}, sort_keys=True)
