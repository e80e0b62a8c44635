import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vmfuq.embedding import (
    EmbeddingVector,
    ProjectionModel,
    cosine_similarity,
    fit_projection,
    normalize,
    project,
    project_raw,
)
from vmfuq.errors import DimensionMismatchError, InsufficientSamplesError, NonFiniteError, ZeroVectorError

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def symmetric_gaussian(n=2000, seed=0):
    rng = np.random.default_rng(seed)
    half = rng.standard_normal((n // 2, 2)) * np.array([2.0, 1.0])
    return np.vstack([half, -half])


class TestNormalize:
    def test_axis(self):
        np.testing.assert_allclose(normalize([3, 0, 0]), [1, 0, 0])

    def test_diagonal(self):
        np.testing.assert_allclose(normalize([1, 1]), [0.70711, 0.70711], atol=1e-5)

    def test_zero(self):
        with pytest.raises(ZeroVectorError):
            normalize([0, 0, 0])

    def test_embedding_vector_input(self):
        np.testing.assert_allclose(normalize(EmbeddingVector([0.0, 2.0], "video")), [0.0, 1.0])

    def test_non_finite_embedding(self):
        with pytest.raises(NonFiniteError):
            EmbeddingVector([1.0, math.nan])


class TestFitProjection:
    def test_rank_deficient_plane(self):
        rng = np.random.default_rng(1)
        plane = np.linalg.qr(rng.standard_normal((5, 2)))[0]
        x = rng.standard_normal((100, 2)) @ plane.T
        model = fit_projection(x, target_dim=4)
        assert int(np.sum(model.explained_variance > 1e-10)) == 2

    def test_axis_variances_against_covariance_oracle(self):
        x = symmetric_gaussian()
        model = fit_projection(x, target_dim=2)
        evals, evecs = np.linalg.eigh(np.cov(x.T))
        np.testing.assert_allclose(model.explained_variance, evals[::-1], rtol=1e-10)
        assert abs(model.basis[0] @ evecs[:, -1]) == pytest.approx(1.0, abs=1e-10)
        assert abs(model.basis[0][0]) == pytest.approx(1.0, abs=1e-2)
        np.testing.assert_allclose(model.explained_variance, [4.0, 1.0], rtol=0.1)

    def test_sample_count_cap(self):
        x = np.random.default_rng(2).standard_normal((3, 768))
        assert fit_projection(x, target_dim=16).target_dim == 2

    def test_insufficient_samples(self):
        with pytest.raises(InsufficientSamplesError):
            fit_projection([[1.0, 2.0, 3.0]], target_dim=2)

    def test_ragged(self):
        with pytest.raises(DimensionMismatchError):
            fit_projection([[1.0, 2.0], [1.0, 2.0, 3.0], [0.0, 1.0]], target_dim=2)

    def test_uncentered_has_zero_mean(self):
        x = np.random.default_rng(3).standard_normal((20, 6)) + 5.0
        model = fit_projection(x, target_dim=3, center=False)
        np.testing.assert_array_equal(model.mean, np.zeros(6))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(3, 30), st.integers(2, 12), st.integers(2, 8), st.integers(0, 2**31))
    def test_basis_orthonormal_and_sorted(self, n, d, k, seed):
        x = np.random.default_rng(seed).standard_normal((n, d))
        model = fit_projection(x, target_dim=k)
        assert model.target_dim == min(k, d, n - 1)
        np.testing.assert_allclose(model.basis @ model.basis.T, np.eye(model.target_dim), atol=1e-8)
        assert np.all(np.diff(model.explained_variance) <= 1e-12)

    def test_json_field_names(self):
        model = fit_projection(np.random.default_rng(4).standard_normal((10, 5)), target_dim=3)
        data = model.to_dict()
        assert set(data) == {"mean", "basis", "explained_variance", "ambient_dim", "target_dim"}
        back = ProjectionModel.from_dict(data)
        np.testing.assert_array_equal(back.basis, model.basis)


class TestProject:
    @pytest.fixture
    def model(self):
        return fit_projection(np.random.default_rng(5).standard_normal((30, 8)), target_dim=4)

    def test_basis_alignment(self, model):
        np.testing.assert_allclose(project(model, model.mean + model.basis[0]), np.eye(4)[0], atol=1e-12)

    def test_mean_is_zero_vector(self, model):
        with pytest.raises(ZeroVectorError):
            project(model, model.mean)

    def test_unit_norm(self, model):
        v = np.random.default_rng(6).standard_normal(8)
        assert np.linalg.norm(project(model, v)) == pytest.approx(1.0, abs=1e-9)

    def test_wrong_dimension(self, model):
        with pytest.raises(DimensionMismatchError):
            project(model, np.ones(7))

    def test_isometry_on_training_span(self):
        rng = np.random.default_rng(7)
        span = np.linalg.qr(rng.standard_normal((10, 3)))[0]
        x = rng.standard_normal((40, 3)) @ span.T
        x -= x.mean(axis=0)
        model = fit_projection(x, target_dim=3)
        coords = np.vstack([project_raw(model, row) for row in x])

        def angles(a):
            u = a / np.linalg.norm(a, axis=1, keepdims=True)
            return u @ u.T

        np.testing.assert_allclose(angles(coords), angles(x), atol=1e-6)

    def test_idempotent_in_subspace(self, model):
        v = model.mean + model.basis.T @ np.array([0.3, -1.2, 0.5, 2.0])
        once = project(model, v)
        again = project(model, model.mean + model.basis.T @ once)
        np.testing.assert_allclose(again, once, atol=1e-9)


class TestCosineSimilarity:
    def test_identity(self):
        a = np.array([0.3, -0.4, 2.0])
        assert cosine_similarity(a, a) == pytest.approx(1.0, abs=1e-15)

    def test_orthogonal(self):
        assert cosine_similarity([1, 0], [0, 1]) == 0.0

    def test_hand_value(self):
        expected = 32 / (math.sqrt(14) * math.sqrt(77))
        assert cosine_similarity([1, 2, 3], [4, 5, 6]) == pytest.approx(expected, rel=1e-14)
        assert cosine_similarity([1, 2, 3], [4, 5, 6]) == pytest.approx(0.97463, abs=1e-5)

    def test_zero(self):
        with pytest.raises(ZeroVectorError):
            cosine_similarity([0, 0], [1, 0])

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, 4, elements=finite), arrays(np.float64, 4, elements=finite))
    def test_bounded_symmetric(self, a, b):
        if np.linalg.norm(a) == 0 or np.linalg.norm(b) == 0:
            return
        c = cosine_similarity(a, b)
        assert -1.0 <= c <= 1.0
        assert c == cosine_similarity(b, a)
