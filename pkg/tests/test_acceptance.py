"""Acceptance gate: one test per criterion, each recording a pass/fail line.

Run alone with ``pytest -m acceptance``; the summary lines appear at the end
of the pytest output.
"""

import itertools
import json
import time

import numpy as np
import pytest

from vmfuq.backends import SyntheticBackend, SyntheticWorld
from vmfuq.backends.base import BackendSet
from vmfuq.calibration import PSNR_MAX, calibration_report, clip_score, psnr, ssim, video_metric
from vmfuq.calibration.kendall import KendallCounts, exact_p_value, kendall_counts, kendall_tau, normal_p_value
from vmfuq.calibration.metrics import subsample_indices
from vmfuq.cli import EXIT_OK, main
from vmfuq.oracle import HierarchicalModelSpec, decomposition_audit, mc_entropy
from vmfuq.pipeline import PipelineConfig, aleatoric_uncertainty
from vmfuq.runner import load_reports, report, run
from vmfuq.suite import SuiteSpec, make_suite
from vmfuq.vmf import VmfParams, fit_vmf, sample_vmf, vmf_entropy, vmf_log_pdf

from .oracles import angle_degrees, brute_kendall, entropy_n3

pytestmark = pytest.mark.acceptance


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def test_criterion_1_entropy(criterion):
    failures = []
    with Timer() as t:
        for i, (n, kappa) in enumerate(itertools.product((3, 8, 16), (0.5, 5.0, 50.0))):
            params = VmfParams(np.eye(n)[0], kappa)
            est = mc_entropy(lambda m: sample_vmf(params, m, 100 + i), lambda x: vmf_log_pdf(x, params), 200_000)
            exact = vmf_entropy(params)
            if abs(est.value - exact) > max(0.01 * abs(exact), 3 * est.std_error):
                failures.append(f"n={n} k={kappa}: mc {est.value:.5f} vs {exact:.5f}")
            if n == 3 and abs(exact - entropy_n3(kappa)) > 1e-8:
                failures.append(f"n=3 k={kappa}: closed form off by {exact - entropy_n3(kappa):.2e}")
    passed = not failures and t.seconds <= 60
    criterion(1, "VMF entropy vs Monte Carlo and closed form", passed,
              f"{t.seconds:.1f}s" + ("; " + "; ".join(failures) if failures else ""))
    assert passed, failures


def test_criterion_2_fit_recovery(criterion):
    rng = np.random.default_rng(2024)
    worst_k = worst_mu = 0.0
    misses = []
    with Timer() as t:
        for case in range(20):
            n = int(rng.integers(3, 33))
            kappa = float(rng.uniform(0.5, 500.0))
            mu = rng.standard_normal(n)
            mu /= np.linalg.norm(mu)
            fit = fit_vmf(sample_vmf(VmfParams(mu, kappa), 50_000, 1000 + case))
            rel = abs(fit.concentration - kappa) / kappa
            ang = angle_degrees(fit.mean_direction, mu)
            worst_k, worst_mu = max(worst_k, rel), max(worst_mu, ang)
            if rel > 0.05 or ang > 1.0:
                misses.append(f"n={n} k={kappa:.2f}: rel={rel:.3f} angle={ang:.2f}deg")
    passed = not misses and t.seconds <= 120
    detail = f"worst kappa err {worst_k:.3%}, worst angle {worst_mu:.3f}deg, {t.seconds:.1f}s"
    criterion(2, "fit recovery", passed, detail + ("; " + "; ".join(misses) if misses else ""))
    assert passed, misses


def test_criterion_3_decomposition(criterion):
    with Timer() as t:
        audit = decomposition_audit(HierarchicalModelSpec.simple(8, 8, 20.0, 50.0), 500_000)
    bound = 3 * audit.combined_std_error
    passed = abs(audit.gap) <= bound and t.seconds <= 300
    detail = (
        f"lhs {audit.lhs.value:.4f} +/- {audit.lhs.std_error:.4f}, sum {audit.rhs:.4f}, "
        f"|gap| {abs(audit.gap):.3f} vs bound {bound:.4f}; joint {audit.joint.value:.4f} "
        f"+/- {audit.joint.std_error:.4f}; {t.seconds:.1f}s"
    )
    criterion(3, "entropy decomposition audit", passed, detail)
    assert passed, detail


def test_criterion_4_kendall(criterion):
    rng = np.random.default_rng(44)
    mismatches = []
    with Timer() as t:
        done = 0
        while done < 1000:
            n = int(rng.integers(2, 51))
            if done % 2:
                x, y = rng.integers(0, max(2, n // 3), (2, n)).astype(float)
            else:
                x, y = rng.standard_normal((2, n))
            if np.all(x == x[0]) or np.all(y == y[0]):
                continue
            done += 1
            tau, conc, disc, _ = brute_kendall(x, y)
            counts = kendall_counts(x, y)
            if kendall_tau(zip(x, y)).tau != tau or counts.s != conc - disc:
                mismatches.append(f"n={n}")
        worst = 0.0
        for n in range(3, 9):
            n0 = n * (n - 1) // 2
            for s in range(-n0, n0 + 1, 2):
                if abs(s / n0) > 0.5:
                    continue
                normal = normal_p_value(KendallCounts(n=n, s=s, n0=n0, ties_x=[], ties_y=[]))
                worst = max(worst, abs(exact_p_value(n, s) - normal))
    passed = not mismatches and worst <= 0.05 and t.seconds <= 30
    criterion(4, "Kendall tau vs brute force, exact vs normal p-values", passed,
              f"{len(mismatches)} tau mismatches in 1000; worst p gap {worst:.4f}; {t.seconds:.1f}s")
    assert passed


def test_criterion_5_end_to_end(criterion, tmp_path, capsys):
    with Timer() as t:
        suite = tmp_path / "suite"
        assert main(["simulate", "suite", "--tasks", "40", "--seed", "0", "--out", str(suite)]) == EXIT_OK
        config = json.loads((suite / "config.json").read_text())
        assert (config["n_latents"], config["m_videos"]) == (10, 10)
        assert {b["kind"] for b in config["backends"].values()} == {"synthetic"}
        run_dir = tmp_path / "run"
        code = main(["run", "--manifest", str(suite / "manifest.jsonl"), "--config", str(suite / "config.json"),
                     "--out", str(run_dir)])
        assert code == EXIT_OK
        assert main(["report", "--out", str(run_dir), "--metric", "oracle"]) == EXIT_OK
    result = json.loads((run_dir / "summary.json").read_text())["result"]
    passed = result["tau"] < -0.5 and result["p_value"] < 0.01 and result["n_tasks"] == 40 and t.seconds <= 180
    criterion(5, "end-to-end synthetic calibration", passed,
              f"tau {result['tau']:.3f}, p {result['p_value']:.2e}, n {result['n_tasks']}, {t.seconds:.1f}s")
    assert passed


def test_criterion_6_disentanglement(criterion, tmp_path):
    outcomes = {}
    with Timer() as t:
        for component, floor in (("aleatoric", "epistemic"), ("epistemic", "aleatoric")):
            rows, config, _ = make_suite(SuiteSpec(n_tasks=60, seed=6, floor=floor))
            run(rows, config, tmp_path / component, jobs=4)
            reports = load_reports(tmp_path / component)
            accuracies = {r.task_id: r.accuracy["clip"] for r in reports}
            outcomes[component] = calibration_report(reports, accuracies, component=component)
    passed = all(r.tau < 0 and r.p_value < 0.05 and r.n_tasks == 60 for r in outcomes.values()) and t.seconds <= 180
    detail = ", ".join(f"{c}: tau {r.tau:.3f} p {r.p_value:.2e}" for c, r in outcomes.items())
    criterion(6, "component disentanglement", passed, f"{detail}, {t.seconds:.1f}s")
    assert passed


def test_criterion_7_ordering(criterion):
    def backends(kappa, seed):
        b = SyntheticBackend(SyntheticWorld(kappa_latent=kappa, seed=seed))
        return BackendSet(b, b, b, b)

    wins = 0
    for seed in range(100):
        cfg = PipelineConfig(n_latents=10, seed=seed)
        vague = aleatoric_uncertainty("a prompt", cfg, backends(2.0, seed))[0]
        specific = aleatoric_uncertainty("a prompt", cfg, backends(200.0, seed))[0]
        wins += vague > specific
    passed = wins >= 95
    criterion(7, "vague vs specific ordering", passed, f"{wins}/100 ordered")
    assert passed


def _metric_examples() -> list[str]:
    failed = []

    def check(name, ok):
        if not ok:
            failed.append(name)

    rng = np.random.default_rng(8)
    a = rng.uniform(0, 1, (32, 32))
    zeros, ones = np.zeros((16, 16)), np.ones((16, 16))
    check("clip identical", clip_score([1.0, 2.0], [[1.0, 2.0], [2.0, 4.0]]) == pytest.approx(1.0, abs=1e-12))
    check("clip orthogonal", clip_score([1.0, 0.0], [[0.0, 1.0], [0.0, -2.0]]) == pytest.approx(0.0, abs=1e-12))
    check("clip average", clip_score([1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]) == pytest.approx(0.5, abs=1e-12))
    check("ssim identical", ssim(a, a) == 1.0)
    c1 = 0.01 ** 2
    check("ssim constants", ssim(zeros, ones) == pytest.approx(c1 / (1 + c1), rel=1e-12))
    noisy = np.clip(a + rng.normal(0, 0.02, a.shape), 0, 1)
    check("ssim ordering", ssim(a, rng.uniform(0, 1, a.shape)) < ssim(a, noisy) < 1.0)
    check("psnr cap", psnr(a, a) == PSNR_MAX == 100.0)
    check("psnr 0.1", psnr(zeros, zeros + 0.1) == pytest.approx(20.0, abs=1e-9))
    check("psnr 0.5", psnr(zeros, zeros + 0.5) == pytest.approx(6.0206, abs=1e-4))
    check("video identical", video_metric([a] * 10, [a] * 10, "ssim") == 1.0)
    check("video subsample", subsample_indices(10, 5) == [0, 2, 4, 6, 8])
    check("video mean", video_metric([zeros, zeros], [zeros + 0.1, zeros + 0.01], "psnr") == pytest.approx(30.0, abs=1e-9))
    return failed


def test_criterion_8_metrics_cache_idempotence(criterion, tmp_path):
    failed = _metric_examples()
    rows, config, _ = make_suite(SuiteSpec(n_tasks=10, seed=8, text_dim=8, video_dim=8))
    run(rows, config, tmp_path)
    cold = [r.to_dict() for r in load_reports(tmp_path)]
    for path in (tmp_path / "reports").glob("*.json"):
        path.unlink()
    run(rows, config, tmp_path)
    if [r.to_dict() for r in load_reports(tmp_path)] != cold:
        failed.append("cache soundness")
    outputs = ("calibration.csv", "scatter.svg", "summary.json")
    report(tmp_path, metric="clip")
    first = [(tmp_path / f).read_bytes() for f in outputs]
    report(tmp_path, metric="clip")
    if [(tmp_path / f).read_bytes() for f in outputs] != first:
        failed.append("report idempotence")
    criterion(8, "metric examples, cache soundness, report idempotence", not failed,
              "all hold" if not failed else "failed: " + ", ".join(failed))
    assert not failed
