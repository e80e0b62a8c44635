"""Calibration of uncertainty against task accuracy."""

from __future__ import annotations

import math
from typing import Mapping, Optional, Sequence

from ..errors import DomainError, MissingAccuracyError
from .kendall import CalibrationResult, exact_p_value, kendall_counts, kendall_tau, normal_p_value
from .metrics import PSNR_MAX, FrameImage, clip_score, psnr, ssim, subsample_indices, video_metric

COMPONENTS = ("total", "aleatoric", "epistemic")
# the component used to pick "near-zero" tasks when calibrating the other one
_FILTER_BY = {"aleatoric": "epistemic", "epistemic": "aleatoric"}


def default_filter_k(n_tasks: int) -> int:
    return max(2, math.ceil(n_tasks / 4))


def select_lowest(reports: Sequence, by: str, k: int) -> list:
    """Reports whose ``by`` value is at most the k-th smallest; ties at the cutoff are kept."""
    if k < 1:
        raise DomainError("filter k must be >= 1")
    if k >= len(reports):
        return list(reports)
    cutoff = sorted(getattr(r, by) for r in reports)[k - 1]
    return [r for r in reports if getattr(r, by) <= cutoff]


def filter_reports(reports: Sequence, component: str, filter_k: Optional[int]) -> list:
    """Reports kept for calibrating ``component`` (all of them when ``filter_k`` is None)."""
    if filter_k is None:
        return list(reports)
    if component not in _FILTER_BY:
        raise DomainError("filtering applies to the aleatoric or epistemic component only")
    return select_lowest(reports, _FILTER_BY[component], filter_k)


def calibration_report(
    reports: Sequence,
    accuracies: Mapping[str, float],
    component: str = "total",
    filter_k: Optional[int] = None,
    metric_name: str = "clip",
) -> CalibrationResult:
    """Kendall tau between one uncertainty component and accuracy.

    With ``filter_k``, aleatoric calibration keeps the k tasks with the lowest
    epistemic uncertainty and vice versa.
    """
    if component not in COMPONENTS:
        raise DomainError(f"component must be one of {COMPONENTS}")
    missing = [r.task_id for r in reports if r.task_id not in accuracies]
    if missing:
        raise MissingAccuracyError(missing)
    selected = filter_reports(reports, component, filter_k)
    pairs = [(getattr(r, component), float(accuracies[r.task_id])) for r in selected]
    return kendall_tau(pairs, metric_name=metric_name)


__all__ = [
    "COMPONENTS",
    "PSNR_MAX",
    "CalibrationResult",
    "FrameImage",
    "calibration_report",
    "clip_score",
    "default_filter_k",
    "exact_p_value",
    "filter_reports",
    "kendall_counts",
    "kendall_tau",
    "normal_p_value",
    "psnr",
    "select_lowest",
    "ssim",
    "subsample_indices",
    "video_metric",
]
