"""HTTP backends.

Prompt expansion and text embedding speak the OpenAI-compatible
``/chat/completions`` and ``/embeddings`` shapes. Video generation and video
embedding use this package's own JSON:

    POST <endpoint>  {"prompt": str, "count": int, "seed": int}
                  -> {"videos": [{"id": str, "url": str}, ...]}
    POST <endpoint>  {"video_id": str}
                  -> {"embedding": [float, ...]}
"""

from __future__ import annotations

import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence

import httpx
import numpy as np

from ..errors import (
    AuthError,
    BackendError,
    BackendTimeoutError,
    BackendUnreachableError,
    BudgetExceededError,
    GenerationRefusedError,
    MalformedResponseError,
    MissingVideoError,
)
from .base import (
    BackendConfig,
    LatentPrompt,
    PromptExpander,
    TextEmbedder,
    VideoEmbedder,
    VideoGenerator,
    VideoHandle,
    make_latents,
)

logger = logging.getLogger(__name__)

EXPANSION_TEMPLATE_VERSION = "v1"
EXPANSION_SYSTEM = "You rewrite short video-generation prompts into fully specified ones."
EXPANSION_TEMPLATE = (
    "Write {count} distinct, fully specified video-generation prompts. Each one must be "
    "consistent with (entail) the prompt below: add concrete details about the subject, "
    "action, setting, camera and lighting, but never contradict it. Answer with a "
    "numbered list, one prompt per line, and nothing else.\n\nPrompt: {prompt}"
)

_LIST_ITEM = re.compile(r"^\s*(?:\d+\s*[.):]|[-*•])\s+(.*\S)\s*$")


class DimensionInconsistencyError(MalformedResponseError):
    pass


def parse_numbered_list(text: str) -> list[str]:
    """Extract list items (``1. foo``, ``2) bar``, ``- baz``), whitespace-trimmed."""
    items = []
    for line in text.splitlines():
        m = _LIST_ITEM.match(line)
        if m:
            item = m.group(1).strip().strip('"').strip()
            if item:
                items.append(item)
    return items


class RequestBudget:
    """Thread-safe counter of requests sent; raises once ``limit`` is spent."""

    def __init__(self, limit: Optional[int]):
        self.limit = limit
        self.used = 0
        self._lock = threading.Lock()

    def spend(self) -> None:
        with self._lock:
            if self.limit is not None and self.used >= self.limit:
                raise BudgetExceededError(f"request budget of {self.limit} exhausted")
            self.used += 1


class JsonClient:
    """POSTs JSON with bounded parallelism, retries with exponential backoff, and a budget.

    Retried: timeouts, connection failures, HTTP 429 and 5xx. Not retried:
    401/403 (auth), 404 (missing), other 4xx.
    """

    def __init__(
        self,
        config: BackendConfig,
        transport: Optional[httpx.BaseTransport] = None,
        sleep: Callable[[float], None] = time.sleep,
        budget: Optional[RequestBudget] = None,
    ):
        self.config = config
        self._client = httpx.Client(transport=transport, timeout=config.timeout)
        self._slots = threading.BoundedSemaphore(config.max_parallel)
        self._sleep = sleep
        self.budget = budget or RequestBudget(config.max_requests)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        env = self.config.credentials_env
        if env:
            key = os.environ.get(env)
            if not key:
                raise AuthError(f"credential variable {env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def post(self, url: str, payload: dict, refused_statuses: Sequence[int] = ()) -> dict:
        policy = self.config.retry
        headers = self._headers()
        last: Exception | None = None
        for attempt in range(1, policy.max_attempts + 1):
            if attempt > 1:
                self._sleep(policy.backoff_seconds * 2 ** (attempt - 2))
            self.budget.spend()
            try:
                with self._slots:
                    response = self._client.post(url, json=payload, headers=headers)
            except httpx.TimeoutException as exc:
                last = BackendTimeoutError(f"timeout contacting {url}: {exc}")
                continue
            except httpx.TransportError as exc:
                last = BackendUnreachableError(f"cannot reach {url}: {exc}")
                continue
            status = response.status_code
            if status in (401, 403):
                raise AuthError(f"{url} rejected credentials (HTTP {status})")
            if status == 404:
                raise MissingVideoError(f"{url} returned 404: {response.text[:200]}")
            if status in refused_statuses:
                raise GenerationRefusedError(f"{url} refused the request (HTTP {status}): {response.text[:200]}")
            if status == 429 or status >= 500:
                last = BackendUnreachableError(f"{url} returned HTTP {status}")
                logger.warning("HTTP %s from %s (attempt %d/%d)", status, url, attempt, policy.max_attempts)
                continue
            if status >= 400:
                raise BackendError(f"{url} returned HTTP {status}: {response.text[:200]}")
            try:
                return response.json()
            except ValueError as exc:
                raise MalformedResponseError(f"{url} returned non-JSON body") from exc
        assert last is not None
        raise last

    def close(self) -> None:
        self._client.close()


def _url(endpoint: str, path: str) -> str:
    return endpoint.rstrip("/") + path


class HttpPromptExpander(PromptExpander):
    def __init__(self, config: BackendConfig, client: Optional[JsonClient] = None):
        self.config = config
        self.client = client or JsonClient(config)
        self.max_parallel = config.max_parallel
        self.template = config.options.get("template", EXPANSION_TEMPLATE)
        self.template_version = config.options.get("template_version", EXPANSION_TEMPLATE_VERSION)
        self.temperature = float(config.options.get("temperature", 1.0))

    @property
    def identity(self) -> str:
        return f"http:{self.config.endpoint}:{self.config.model_name}:expand-{self.template_version}"

    def expand_prompt(self, prompt: str, count: int, seed: int = 0) -> list[LatentPrompt]:
        payload = {
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": EXPANSION_SYSTEM},
                {"role": "user", "content": self.template.format(count=count, prompt=prompt)},
            ],
            "temperature": self.temperature,
            "seed": int(seed),
        }
        body = self.client.post(_url(self.config.endpoint, "/chat/completions"), payload)
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError("chat completion response lacks choices[0].message.content") from exc
        items = parse_numbered_list(content or "")
        if len(items) < count:
            raise MalformedResponseError(f"expansion returned {len(items)} usable prompts, {count} requested")
        return make_latents(prompt, items[:count])


class HttpTextEmbedder(TextEmbedder):
    def __init__(self, config: BackendConfig, client: Optional[JsonClient] = None):
        self.config = config
        self.client = client or JsonClient(config)
        self.max_parallel = config.max_parallel

    @property
    def identity(self) -> str:
        return f"http:{self.config.endpoint}:{self.config.model_name}:embed-text"

    def _batch(self, texts: list[str]) -> list[np.ndarray]:
        body = self.client.post(
            _url(self.config.endpoint, "/embeddings"), {"model": self.config.model_name, "input": texts}
        )
        try:
            data = sorted(body["data"], key=lambda d: d.get("index", 0))
            vectors = [np.asarray(d["embedding"], dtype=np.float64) for d in data]
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedResponseError("embedding response lacks data[].embedding") from exc
        if len(vectors) != len(texts):
            raise MalformedResponseError(f"sent {len(texts)} inputs, got {len(vectors)} embeddings")
        return vectors

    def embed_text(self, prompts: Sequence[str]) -> list[np.ndarray]:
        prompts = list(prompts)
        if not prompts:
            raise ValueError("embed_text needs at least one prompt")
        size = self.config.batch_size
        batches = [prompts[i:i + size] for i in range(0, len(prompts), size)]
        with ThreadPoolExecutor(max_workers=self.max_parallel) as pool:
            results = list(pool.map(self._batch, batches))
        vectors = [v for batch in results for v in batch]
        if len({v.size for v in vectors}) != 1:
            raise DimensionInconsistencyError("embedding dimensions differ within one backend")
        return vectors


class HttpVideoGenerator(VideoGenerator):
    def __init__(self, config: BackendConfig, client: Optional[JsonClient] = None):
        self.config = config
        self.client = client or JsonClient(config)
        self.max_parallel = config.max_parallel

    @property
    def identity(self) -> str:
        return f"http:{self.config.endpoint}:{self.config.model_name}:generate"

    def generate_videos(self, latent: LatentPrompt, count: int, seed: int) -> list[VideoHandle]:
        body = self.client.post(
            self.config.endpoint,
            {"prompt": latent.text, "count": int(count), "seed": int(seed)},
            refused_statuses=(400, 422, 451),
        )
        try:
            videos = [VideoHandle(v["id"], v.get("url", ""), latent.latent_id) for v in body["videos"]]
        except (KeyError, TypeError) as exc:
            raise MalformedResponseError("video response lacks videos[].id") from exc
        if len(videos) != count:
            raise MalformedResponseError(f"requested {count} videos, got {len(videos)}")
        return videos


class HttpVideoEmbedder(VideoEmbedder):
    def __init__(self, config: BackendConfig, client: Optional[JsonClient] = None):
        self.config = config
        self.client = client or JsonClient(config)
        self.max_parallel = config.max_parallel
        self._dim: Optional[int] = None
        self._lock = threading.Lock()

    @property
    def identity(self) -> str:
        return f"http:{self.config.endpoint}:{self.config.model_name}:embed-video"

    def embed_video(self, handle: VideoHandle) -> np.ndarray:
        body = self.client.post(self.config.endpoint, {"video_id": handle.id})
        try:
            vec = np.asarray(body["embedding"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedResponseError("video embedding response lacks embedding") from exc
        with self._lock:
            if self._dim is None:
                self._dim = vec.size
            elif vec.size != self._dim:
                raise DimensionInconsistencyError(f"embedding dim {vec.size} differs from {self._dim}")
        return vec
