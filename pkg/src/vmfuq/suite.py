"""Synthetic task suites with known per-task uncertainty.

Each task gets its own latent and video concentrations, drawn log-uniformly.
The manifest carries two accuracy sources:

* ``ground_truth.embedding``: the video-space center of the task's latent law,
  so ``run`` can compute a CLIP-style score from the generated videos;
* ``precomputed_accuracy.oracle``: ``exp(-true total entropy) + N(0, noise^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._util import derive_seed
from .backends.base import ROLES, BackendConfig
from .backends.synthetic import SyntheticWorld
from .errors import ConfigError
from .pipeline import PipelineConfig
from .runner import TaskManifestRow
from .vmf import KAPPA_MAX

FLOORS = (None, "aleatoric", "epistemic")
ORACLE_METRIC = "oracle"


@dataclass(frozen=True)
class SuiteSpec:
    n_tasks: int = 40
    seed: int = 0
    kappa_range: tuple = (2.0, 500.0)
    floor: Optional[str] = None  # component held at its minimum (kappa = KAPPA_MAX)
    noise: float = 0.02
    text_dim: int = 16
    video_dim: int = 16
    n_latents: int = 10
    m_videos: int = 10

    def __post_init__(self):
        if self.floor not in FLOORS:
            raise ConfigError(f"floor must be one of {FLOORS}")
        if self.n_tasks < 2:
            raise ConfigError("a suite needs at least 2 tasks")
        lo, hi = self.kappa_range
        if not 0 < lo <= hi:
            raise ConfigError("kappa_range must satisfy 0 < low <= high")


def synthetic_backend_configs(world: SyntheticWorld, max_parallel: int = 4) -> dict:
    cfg = BackendConfig(kind="synthetic", max_parallel=max_parallel, options=world.to_dict())
    return {role: cfg for role in ROLES}


def make_suite(spec: SuiteSpec) -> tuple[list[TaskManifestRow], PipelineConfig, SyntheticWorld]:
    rng = np.random.default_rng(derive_seed(spec.seed, "suite", spec.n_tasks, spec.floor or "none"))
    lo, hi = (math.log(k) for k in spec.kappa_range)
    prompts = {}
    task_prompts = []
    for i in range(spec.n_tasks):
        prompt = f"synthetic task {i:04d}"
        kz, kv = (float(math.exp(v)) for v in rng.uniform(lo, hi, size=2))
        if spec.floor == "aleatoric":
            kz = KAPPA_MAX
        elif spec.floor == "epistemic":
            kv = KAPPA_MAX
        prompts[prompt] = {"kappa_latent": kz, "kappa_video": kv}
        task_prompts.append(prompt)
    world = SyntheticWorld(text_dim=spec.text_dim, video_dim=spec.video_dim, seed=spec.seed, prompts=prompts)
    rows = []
    for i, prompt in enumerate(task_prompts):
        true_total = world.true_aleatoric(prompt) + world.true_epistemic(prompt)
        oracle = math.exp(-true_total) + float(rng.normal(0.0, spec.noise))
        rows.append(
            TaskManifestRow(
                task_id=f"t{i:04d}",
                prompt=prompt,
                category="synthetic",
                ground_truth={"embedding": world.ground_truth(prompt).tolist()},
                precomputed_accuracy={ORACLE_METRIC: oracle},
                line=i + 1,
            )
        )
    config = PipelineConfig(
        n_latents=spec.n_latents,
        m_videos=spec.m_videos,
        text_target_dim=spec.text_dim,
        video_target_dim=spec.video_dim,
        seed=spec.seed,
        backends=synthetic_backend_configs(world),
    )
    return rows, config, world
