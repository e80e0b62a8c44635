"""Readers for precomputed accuracies and per-video frame directories."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from ..errors import DomainError, ManifestError
from .metrics import FrameImage

# error metrics ingested with their sign flipped so larger is better
NEGATED_METRICS = frozenset({"lpips"})


def read_accuracy_csv(path: str | Path) -> dict[str, dict[str, float]]:
    """Parse ``task_id,metric_name,value`` rows into ``{metric: {task_id: value}}``."""
    out: dict[str, dict[str, float]] = defaultdict(dict)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"task_id", "metric_name", "value"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ManifestError(f"{path}: header must contain task_id,metric_name,value")
        for lineno, row in enumerate(reader, start=2):
            try:
                value = float(row["value"])
            except (TypeError, ValueError) as exc:
                raise ManifestError(f"{path}:{lineno}: value is not a number") from exc
            metric = row["metric_name"].strip().lower()
            out[metric][row["task_id"].strip()] = ingest_value(metric, value)
    return dict(out)


def ingest_value(metric: str, value: float) -> float:
    return -value if metric.lower() in NEGATED_METRICS else value


def read_frames(directory: str | Path) -> list[FrameImage]:
    """Load ``frame_%06d.png`` files in index order as [0, 1] frames (RGB or grayscale)."""
    files = sorted(Path(directory).glob("frame_[0-9][0-9][0-9][0-9][0-9][0-9].png"))
    if not files:
        raise DomainError(f"no frame_%06d.png files in {directory}")
    frames = []
    for f in files:
        with Image.open(f) as img:
            mode = "L" if img.mode in ("L", "I", "I;16", "1") else "RGB"
            arr = np.asarray(img.convert(mode), dtype=np.float64) / 255.0
        frames.append(FrameImage(arr))
    return frames


def resize_frames(frames: Sequence[FrameImage], height: int, width: int) -> list[FrameImage]:
    """Bilinear resize of every frame to ``(height, width)``."""
    out = []
    for fr in frames:
        if (fr.height, fr.width) == (height, width):
            out.append(fr)
            continue
        channels = []
        for c in range(fr.channels):
            img = Image.fromarray(fr.pixels[:, :, c].astype(np.float32), mode="F")
            channels.append(np.asarray(img.resize((width, height), Image.BILINEAR), dtype=np.float64))
        out.append(FrameImage(np.clip(np.stack(channels, axis=2), 0.0, 1.0)))
    return out


def common_size(*videos: Sequence[FrameImage]) -> tuple[int, int]:
    """Smallest height and width over all frames of all videos."""
    heights = [f.height for v in videos for f in v]
    widths = [f.width for v in videos for f in v]
    return min(heights), min(widths)
