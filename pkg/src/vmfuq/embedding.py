"""Embedding-space utilities: sphere normalization, PCA projection, cosine similarity."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    DomainError,
    InsufficientSamplesError,
    NonFiniteError,
    ZeroVectorError,
)
from .vmf import as_unit_vector

DEFAULT_TARGET_DIM = 16
# projected vectors with smaller norm are treated as the zero vector
PROJECTION_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class EmbeddingVector:
    components: np.ndarray
    source: str = "text"

    def __post_init__(self):
        v = np.asarray(self.components, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise NonFiniteError("embedding has non-finite components")
        if self.source not in ("text", "video"):
            raise DomainError(f"unknown embedding source {self.source!r}")
        v.setflags(write=False)
        object.__setattr__(self, "components", v)

    def __array__(self, dtype=None, copy=None):
        return self.components if dtype is None else self.components.astype(dtype)

    def __len__(self) -> int:
        return self.components.size


def _vec(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("vector has non-finite components")
    return arr


def normalize(v) -> np.ndarray:
    return as_unit_vector(_vec(v))


@dataclass(frozen=True)
class ProjectionModel:
    """Mean-centered PCA basis; ``basis`` has shape ``(target_dim, ambient_dim)``."""

    mean: np.ndarray
    basis: np.ndarray
    explained_variance: np.ndarray
    ambient_dim: int
    target_dim: int

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "basis": self.basis.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "ambient_dim": self.ambient_dim,
            "target_dim": self.target_dim,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProjectionModel":
        basis = np.asarray(data["basis"], dtype=np.float64).reshape(int(data["target_dim"]), int(data["ambient_dim"]))
        return cls(
            mean=np.asarray(data["mean"], dtype=np.float64),
            basis=basis,
            explained_variance=np.asarray(data["explained_variance"], dtype=np.float64),
            ambient_dim=int(data["ambient_dim"]),
            target_dim=int(data["target_dim"]),
        )


def _stack(samples: Sequence) -> np.ndarray:
    rows = [_vec(s) for s in samples]
    if len({r.size for r in rows}) > 1:
        raise DimensionMismatchError("samples have different ambient dimensions")
    return np.vstack(rows) if rows else np.empty((0, 0))


def fit_projection(samples: Sequence, target_dim: int = DEFAULT_TARGET_DIM, center: bool = True) -> ProjectionModel:
    """Fit a PCA basis of size ``min(target_dim, d, N - 1)``.

    With ``center=False`` the basis comes from the uncentered second-moment
    matrix and the stored mean is zero, so :func:`project` keeps each
    vector's offset from the origin.
    """
    if target_dim < 2:
        raise DomainError(f"target_dim must be >= 2, got {target_dim}")
    x = _stack(samples)
    n_samples = x.shape[0]
    if n_samples < 2:
        raise InsufficientSamplesError(f"PCA needs at least 2 samples, got {n_samples}")
    ambient = x.shape[1]
    effective = min(int(target_dim), ambient, n_samples - 1)
    mean = x.mean(axis=0) if center else np.zeros(ambient)
    _, s, vt = np.linalg.svd(x - mean, full_matrices=False)
    variance = s**2 / (n_samples - 1)
    basis = vt[:effective]
    # fix sign so the largest-magnitude loading of each component is positive
    idx = np.argmax(np.abs(basis), axis=1)
    signs = np.sign(basis[np.arange(effective), idx])
    signs[signs == 0] = 1.0
    basis = basis * signs[:, None]
    return ProjectionModel(
        mean=mean,
        basis=np.ascontiguousarray(basis),
        explained_variance=variance[:effective].copy(),
        ambient_dim=ambient,
        target_dim=effective,
    )


def project_raw(model: ProjectionModel, v) -> np.ndarray:
    """Coordinates of ``v - mean`` in the basis, before renormalization."""
    arr = _vec(v)
    if arr.size != model.ambient_dim:
        raise DimensionMismatchError(f"expected {model.ambient_dim} components, got {arr.size}")
    return model.basis @ (arr - model.mean)


def project(model: ProjectionModel, v) -> np.ndarray:
    """Project onto the basis and renormalize to the unit sphere in R^target_dim."""
    coords = project_raw(model, v)
    if float(np.linalg.norm(coords)) <= PROJECTION_ZERO_TOL:
        raise ZeroVectorError("projected vector is numerically zero")
    return as_unit_vector(coords)


def cosine_similarity(a, b) -> float:
    a = _vec(a)
    b = _vec(b)
    if a.size != b.size:
        raise DimensionMismatchError(f"dimension mismatch: {a.size} vs {b.size}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine similarity of a zero vector")
    value = float(a @ b) / (na * nb)
    if not math.isfinite(value):
        raise NonFiniteError("cosine similarity overflowed")
    return min(1.0, max(-1.0, value))
