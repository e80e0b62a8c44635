"""Entropy-based aleatoric and epistemic uncertainty for text-to-video generation.

Embeddings of sampled prompts and generated videos are placed on unit
spheres, modeled with von Mises-Fisher distributions, and scored by
differential entropy.
"""

from .calibration import CalibrationResult, calibration_report, kendall_tau
from .embedding import EmbeddingVector, ProjectionModel, cosine_similarity, fit_projection, project
from .errors import UQError
from .oracle import HierarchicalModelSpec, McEstimate, decomposition_audit, make_synthetic_backends, mc_entropy
from .pipeline import (
    PipelineConfig,
    UncertaintyReport,
    aleatoric_uncertainty,
    epistemic_uncertainty,
    total_uncertainty,
)
from .vmf import KAPPA_MAX, VmfParams, differential_entropy, fit_vmf, sample_vmf, vmf_entropy, vmf_log_pdf

__version__ = "0.1.0"

__all__ = [
    "KAPPA_MAX",
    "CalibrationResult",
    "EmbeddingVector",
    "HierarchicalModelSpec",
    "McEstimate",
    "PipelineConfig",
    "ProjectionModel",
    "UQError",
    "UncertaintyReport",
    "VmfParams",
    "aleatoric_uncertainty",
    "calibration_report",
    "cosine_similarity",
    "decomposition_audit",
    "differential_entropy",
    "epistemic_uncertainty",
    "fit_projection",
    "fit_vmf",
    "kendall_tau",
    "make_synthetic_backends",
    "mc_entropy",
    "project",
    "sample_vmf",
    "total_uncertainty",
    "vmf_entropy",
    "vmf_log_pdf",
]
