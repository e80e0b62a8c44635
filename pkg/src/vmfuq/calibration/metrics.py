"""Accuracy metrics: CLIP-style cosine score, SSIM, PSNR, and their video averages."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..embedding import cosine_similarity
from ..errors import DimensionMismatchError, DomainError, InsufficientSamplesError

SSIM_WINDOW = 8
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
PSNR_MAX = 100.0


@dataclass(frozen=True)
class FrameImage:
    """Pixels in [0, 1], shape ``(height, width, channels)`` with 1 or 3 channels."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float64)
        if p.ndim == 2:
            p = p[:, :, None]
        if p.ndim != 3 or p.shape[2] not in (1, 3) or p.shape[0] < 1 or p.shape[1] < 1:
            raise DomainError(f"frame must be (H, W, 1|3), got shape {p.shape}")
        if not np.all(np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0:
            raise DomainError("pixel values must lie in [0, 1]")
        p.setflags(write=False)
        object.__setattr__(self, "pixels", p)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


def _pixels(frame) -> np.ndarray:
    return frame.pixels if isinstance(frame, FrameImage) else FrameImage(frame).pixels


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"frame shapes differ: {a.shape} vs {b.shape}")


def ssim(a, b) -> float:
    """Mean SSIM over all 8x8 windows (stride 1) and channels.

    Windows are uniform; statistics are population moments. Frames smaller
    than 8 pixels on a side use one window spanning that side.
    """
    pa, pb = _pixels(a), _pixels(b)
    _same_shape(pa, pb)
    wh = min(SSIM_WINDOW, pa.shape[0])
    ww = min(SSIM_WINDOW, pa.shape[1])

    def window_mean(x):
        return sliding_window_view(x, (wh, ww), axis=(0, 1)).mean(axis=(-2, -1))

    mu_a, mu_b = window_mean(pa), window_mean(pb)
    var_a = window_mean(pa * pa) - mu_a * mu_a
    var_b = window_mean(pb * pb) - mu_b * mu_b
    cov = window_mean(pa * pb) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))


def psnr(a, b) -> float:
    """``10 log10(1 / MSE)`` in dB, capped at ``PSNR_MAX``."""
    pa, pb = _pixels(a), _pixels(b)
    _same_shape(pa, pb)
    mse = float(np.mean((pa - pb) ** 2))
    if mse == 0.0:
        return PSNR_MAX
    return min(PSNR_MAX, 10.0 * math.log10(1.0 / mse))


def clip_score(gt_embedding, generated: Sequence) -> float:
    """Mean cosine similarity between the ground truth and each generated embedding."""
    if len(generated) == 0:
        raise InsufficientSamplesError("clip_score needs at least one generated embedding")
    return float(np.mean([cosine_similarity(gt_embedding, g) for g in generated]))


def subsample_indices(long_len: int, short_len: int) -> list[int]:
    return [(k * long_len) // short_len for k in range(short_len)]


METRICS = {"ssim": ssim, "psnr": psnr}


def video_metric(gt_frames: Sequence, gen_frames: Sequence, metric: str) -> float:
    """Align the two sequences by uniform subsampling of the longer, then average per-frame scores."""
    if metric not in METRICS:
        raise DomainError(f"unknown frame metric {metric!r}; expected one of {sorted(METRICS)}")
    if not gt_frames or not gen_frames:
        raise InsufficientSamplesError("both frame sequences must be nonempty")
    gt, gen = list(gt_frames), list(gen_frames)
    if len(gt) > len(gen):
        gt = [gt[i] for i in subsample_indices(len(gt), len(gen))]
    elif len(gen) > len(gt):
        gen = [gen[i] for i in subsample_indices(len(gen), len(gt))]
    fn = METRICS[metric]
    return float(np.mean([fn(a, b) for a, b in zip(gt, gen)]))
