import numpy as np
import pytest

from vmfuq.backends import SyntheticBackend, SyntheticWorld
from vmfuq.backends.base import BackendSet, LatentPrompt, make_latents
from vmfuq.errors import ConfigError, GenerationRefusedError, PipelineError
from vmfuq.oracle import HierarchicalModelSpec, decomposition_audit, make_synthetic_backends
from vmfuq.pipeline import (
    PipelineConfig,
    UncertaintyReport,
    aleatoric_uncertainty,
    config_hash,
    epistemic_uncertainty,
    to_sphere,
    total_uncertainty,
)
from vmfuq.vmf import KAPPA_MAX, differential_entropy, entropy_floor


def synthetic(**kw):
    b = SyntheticBackend(SyntheticWorld(**kw))
    return BackendSet(b, b, b, b)


def small(**kw):
    base = dict(n_latents=10, m_videos=10, text_target_dim=8, video_target_dim=8)
    base.update(kw)
    return PipelineConfig(**base)


class ConstantExpander(SyntheticBackend):
    """Every expansion is the same text, so every latent embedding coincides."""

    def expand_prompt(self, prompt, count, seed=0):
        return make_latents(prompt, [f"{prompt} exactly"] * count)


class FlakyGenerator(SyntheticBackend):
    def __init__(self, world, failing):
        super().__init__(world)
        self.failing = set(failing)

    def generate_videos(self, latent, count, seed):
        if latent.latent_id in self.failing:
            raise GenerationRefusedError(f"refused {latent.latent_id}")
        return super().generate_videos(latent, count, seed)


class TestPipelineConfig:
    def test_defaults(self):
        cfg = PipelineConfig()
        assert (cfg.n_latents, cfg.m_videos, cfg.text_target_dim, cfg.video_target_dim) == (10, 10, 16, 16)

    @pytest.mark.parametrize("field", ["n_latents", "m_videos"])
    def test_minimums(self, field):
        with pytest.raises(ConfigError):
            PipelineConfig(**{field: 1})

    def test_round_trip_and_hash(self):
        cfg = PipelineConfig.from_dict({"n_latents": 12, "backends": {"expander": {"kind": "synthetic"}}})
        assert PipelineConfig.from_dict(cfg.to_dict()) == cfg
        assert config_hash(cfg) == config_hash(PipelineConfig.from_dict(cfg.to_dict()))
        assert config_hash(cfg) != config_hash(PipelineConfig(n_latents=20))

    def test_unknown_field(self):
        with pytest.raises(ConfigError):
            PipelineConfig.from_dict({"latents": 3})


class TestToSphere:
    def test_bypass_when_already_small(self):
        x = np.random.default_rng(0).standard_normal((5, 4))
        sphere = to_sphere(x, 8)
        assert sphere.projection is None
        np.testing.assert_allclose(np.linalg.norm(sphere.points, axis=1), 1.0)

    def test_projects_wide_embeddings(self):
        x = np.random.default_rng(1).standard_normal((10, 64))
        sphere = to_sphere(x, 16)
        assert sphere.projection is not None
        assert sphere.dim == 9

    def test_identical_rows(self):
        x = np.tile(np.arange(1.0, 33.0), (6, 1))
        sphere = to_sphere(x, 16)
        np.testing.assert_array_equal(sphere.points, np.tile(np.eye(5)[0], (6, 1)))


class TestAleatoric:
    def test_recovers_latent_concentration(self):
        cfg = PipelineConfig(n_latents=200)
        value, diag = aleatoric_uncertainty("a cat", cfg, synthetic(kappa_latent=50.0, seed=4))
        assert diag.params.concentration == pytest.approx(50.0, rel=0.10)
        assert value == differential_entropy(16, diag.params.concentration)
        assert len(diag.latents) == 200

    def test_identical_expansions_clamp(self):
        w = SyntheticWorld(text_dim=16, video_dim=16)
        b = SyntheticBackend(w)
        e = ConstantExpander(w)
        value, diag = aleatoric_uncertainty("a cat", PipelineConfig(), BackendSet(e, b, b, b))
        assert diag.params.concentration == KAPPA_MAX
        assert value == entropy_floor(16)

    def test_monotone_response(self):
        wins = 0
        for seed in range(100):
            cfg = PipelineConfig(seed=seed)
            vague = aleatoric_uncertainty("p", cfg, synthetic(kappa_latent=20.0, seed=seed))[0]
            specific = aleatoric_uncertainty("p", cfg, synthetic(kappa_latent=80.0, seed=seed))[0]
            wins += vague > specific
        assert wins >= 95

    def test_independent_of_video_backend(self):
        cfg = small()
        base = synthetic(text_dim=8, video_dim=8, kappa_video=5.0, seed=1)
        other = SyntheticBackend(SyntheticWorld(text_dim=8, video_dim=12, kappa_video=300.0, seed=9))
        a = total_uncertainty("p", cfg, base)
        b = total_uncertainty("p", cfg, base.with_videos(other, other))
        assert a.aleatoric == b.aleatoric
        assert a.epistemic != b.epistemic


class TestEpistemic:
    def test_homogeneous_generator(self):
        cfg = PipelineConfig(m_videos=500)
        value, diag = epistemic_uncertainty("p", cfg, synthetic(kappa_video=50.0, seed=1))
        truth = differential_entropy(16, 50.0)
        assert value == pytest.approx(truth, rel=0.05)
        e = np.array([p.entropy for p in diag.per_latent])
        assert (e.max() - e.min()) / abs(e.mean()) <= 0.10

    def test_concentrated_generator_hits_floor(self):
        value, _ = epistemic_uncertainty("p", PipelineConfig(), synthetic(kappa_video=1e5, seed=2))
        assert value == pytest.approx(entropy_floor(16), abs=0.5)

    def test_mixed_generator_is_group_mean(self):
        cfg = small(m_videos=500)
        value, diag = epistemic_uncertainty("p", cfg, synthetic(text_dim=8, video_dim=8, kappa_video=(5.0, 500.0), seed=1))
        expected = 0.5 * (differential_entropy(8, 5.0) + differential_entropy(8, 500.0))
        assert value == pytest.approx(expected, abs=0.15)
        assert value == pytest.approx(np.mean([p.entropy for p in diag.per_latent]), rel=1e-15)

    def test_variance_halves_with_twice_the_latents(self):
        def variance(n):
            vals = [
                epistemic_uncertainty("p", small(n_latents=n, seed=s), synthetic(text_dim=8, video_dim=8, kappa_video=50.0))[0]
                for s in range(200)
            ]
            return np.var(vals)

        ratio = variance(10) / variance(20)
        assert 1.0 <= ratio <= 4.0

    def test_partial_failure_drops_latents(self):
        w = SyntheticWorld(text_dim=8, video_dim=8)
        b = SyntheticBackend(w)
        flaky = FlakyGenerator(w, {"z001", "z004"})
        rep = total_uncertainty("p", small(), BackendSet(b, b, flaky, b))
        assert rep.status == "partial"
        assert [d["latent_id"] for d in rep.dropped] == ["z001", "z004"]
        assert len(rep.per_latent) == 8

    def test_too_many_failures(self):
        w = SyntheticWorld(text_dim=8, video_dim=8)
        b = SyntheticBackend(w)
        flaky = FlakyGenerator(w, {f"z{i:03d}" for i in range(6)})
        with pytest.raises(PipelineError):
            total_uncertainty("p", small(), BackendSet(b, b, flaky, b))


class TestTotal:
    def test_additive_exactly(self):
        rep = total_uncertainty("p", small(), synthetic(text_dim=8, video_dim=8, seed=3))
        assert rep.total - (rep.aleatoric + rep.epistemic) == 0.0
        assert len(rep.per_latent) == 10

    def test_deterministic(self):
        a = total_uncertainty("p", small(), synthetic(text_dim=8, video_dim=8, seed=3))
        b = total_uncertainty("p", small(), synthetic(text_dim=8, video_dim=8, seed=3))
        assert a.to_dict() == b.to_dict()

    def test_degenerate_composition(self):
        rep = total_uncertainty("p", small(), synthetic(text_dim=8, video_dim=8, kappa_latent=1e5, kappa_video=1e5))
        assert rep.aleatoric == pytest.approx(entropy_floor(8), abs=0.5)
        assert rep.epistemic == pytest.approx(entropy_floor(8), abs=0.5)
        assert rep.total == rep.aleatoric + rep.epistemic

    def test_report_round_trip(self):
        rep = total_uncertainty("p", small(), synthetic(text_dim=8, video_dim=8))
        assert UncertaintyReport.from_dict(rep.to_dict()).to_dict() == rep.to_dict()

    @pytest.mark.xfail(strict=True, reason="the marginal entropy is not the sum of the two components; see decisions ledger")
    def test_total_matches_marginal_entropy(self):
        spec = HierarchicalModelSpec.simple(8, 8, 20.0, 50.0, seed=0)
        audit = decomposition_audit(spec, 20_000)
        totals = [total_uncertainty("p", small(seed=s), make_synthetic_backends(spec)).total for s in range(20)]
        band = 3 * audit.lhs.std_error + 3 * np.std(totals) / np.sqrt(len(totals))
        assert abs(np.mean(totals) - audit.lhs.value) <= band
