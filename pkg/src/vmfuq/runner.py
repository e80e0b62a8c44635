"""Run orchestration: manifests, resumable cached runs, and calibration reports.

A run directory holds::

    run-manifest.json      run id, config hash, seeds, backends, per-task status
    config.json            the effective pipeline config
    tasks.jsonl            the ingested task rows
    reports/<task>.json    one UncertaintyReport per task
    cache/                 content-addressed backend responses

``report`` adds ``calibration.csv``, ``scatter.svg`` and ``summary.json``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._util import atomic_write_text, canonical_json, dump_json, sha256_hex
from .backends import ContentCache, build_backend_set, cached_backends
from .backends.base import BackendSet, VideoHandle
from .calibration import calibration_report, clip_score, filter_reports
from .calibration.kendall import CalibrationResult
from .errors import (
    BackendError,
    ConfigError,
    DuplicateTaskError,
    ManifestError,
    MissingAccuracyError,
    PipelineError,
    UQError,
)
from .pipeline import PipelineConfig, UncertaintyReport, config_hash, total_uncertainty

logger = logging.getLogger(__name__)

STATUSES = ("ok", "partial", "failed")
_SAFE_NAME = re.compile(r"^[A-Za-z0-9._-]{1,100}$")


@dataclass(frozen=True)
class TaskManifestRow:
    task_id: str
    prompt: str
    category: Optional[str] = None
    ground_truth: Optional[dict] = None
    precomputed_accuracy: dict = field(default_factory=dict)
    line: int = 0

    def to_dict(self) -> dict:
        out = {"task_id": self.task_id, "prompt": self.prompt}
        if self.category is not None:
            out["category"] = self.category
        if self.ground_truth is not None:
            out["ground_truth"] = self.ground_truth
        if self.precomputed_accuracy:
            out["precomputed_accuracy"] = self.precomputed_accuracy
        return out


def _parse_row(data, where: str, lineno: int) -> TaskManifestRow:
    if not isinstance(data, dict):
        raise ManifestError(f"{where}: line {lineno}: row must be a JSON object")
    for key in ("task_id", "prompt"):
        value = data.get(key)
        if not isinstance(value, str) or not value.strip():
            raise ManifestError(f"{where}: line {lineno}: missing or empty {key!r}")
    gt = data.get("ground_truth")
    if gt is not None and not (isinstance(gt, dict) and ("embedding" in gt or "video_id" in gt)):
        raise ManifestError(f"{where}: line {lineno}: ground_truth needs an 'embedding' or 'video_id'")
    acc = data.get("precomputed_accuracy") or {}
    try:
        acc = {str(k).lower(): float(v) for k, v in acc.items()}
    except (AttributeError, TypeError, ValueError) as exc:
        raise ManifestError(f"{where}: line {lineno}: precomputed_accuracy must map metric to number") from exc
    return TaskManifestRow(data["task_id"], data["prompt"], data.get("category"), gt, acc, lineno)


def ingest_manifest(path: str | Path) -> list[TaskManifestRow]:
    """Parse a JSONL task manifest; blank lines are skipped."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    rows: list[TaskManifestRow] = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except ValueError as exc:
                raise ManifestError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
            row = _parse_row(data, str(path), lineno)
            if row.task_id in seen:
                raise DuplicateTaskError(
                    f"{path}: duplicate task_id {row.task_id!r} on lines {seen[row.task_id]} and {lineno}"
                )
            seen[row.task_id] = lineno
            rows.append(row)
    return rows


def write_manifest(rows: Sequence[TaskManifestRow], path: str | Path) -> None:
    atomic_write_text(path, "".join(canonical_json(r.to_dict()) + "\n" for r in rows))


@dataclass
class RunManifest:
    run_id: str
    config_hash: str
    seeds: dict
    backends: dict
    started: str
    finished: str
    tasks: dict  # task_id -> status
    errors: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(s == "ok" for s in self.tasks.values())

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "config_hash": self.config_hash,
            "seeds": self.seeds,
            "backends": self.backends,
            "started": self.started,
            "finished": self.finished,
            "tasks": self.tasks,
            "errors": self.errors,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunManifest":
        return cls(**data)


def load_config(path: str | Path) -> PipelineConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config not found: {path}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return PipelineConfig.from_dict(data)


def report_path(run_dir: Path, task_id: str) -> Path:
    name = task_id if _SAFE_NAME.match(task_id) else "task-" + sha256_hex(task_id)[:16]
    return run_dir / "reports" / f"{name}.json"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _clip_accuracy(row: TaskManifestRow, report: UncertaintyReport, backends: BackendSet) -> Optional[float]:
    gt = row.ground_truth
    if gt is None or not report.video_embeddings:
        return None
    if "embedding" in gt:
        reference = np.asarray(gt["embedding"], dtype=np.float64)
    else:
        reference = backends.video_embedder.embed_video(VideoHandle(str(gt["video_id"]), "", ""))
    generated = [v for latent in sorted(report.video_embeddings) for v in report.video_embeddings[latent]]
    return clip_score(reference, generated)


def _existing_ok(path: Path, chash: str) -> bool:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError):
        return False
    return data.get("status") == "ok" and data.get("provenance", {}).get("config_hash") == chash


def run(
    rows: Sequence[TaskManifestRow],
    config: PipelineConfig,
    out_dir: str | Path,
    backends: Optional[BackendSet] = None,
    jobs: int = 1,
) -> RunManifest:
    """Execute every task, writing one report per task; finished tasks are skipped.

    ``backends`` defaults to the set described by ``config.backends``. All
    backend traffic goes through the run directory's content cache.
    """
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    out = Path(out_dir)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    if backends is None:
        if not config.backends:
            raise ConfigError("config declares no backends")
        backends = build_backend_set(config.backends)
    live = cached_backends(backends, ContentCache(out / "cache"))
    chash = config_hash(config, backends)
    started = _now()
    atomic_write_text(out / "config.json", dump_json(config.to_dict()))
    write_manifest(rows, out / "tasks.jsonl")

    def work(row: TaskManifestRow) -> tuple[str, Optional[str]]:
        path = report_path(out, row.task_id)
        if _existing_ok(path, chash):
            logger.info("task %s: up to date", row.task_id)
            return "ok", None
        try:
            report = total_uncertainty(row.prompt, config, live, task_id=row.task_id)
        except (BackendError, PipelineError, UQError) as exc:
            logger.error("task %s failed: %s", row.task_id, exc)
            return "failed", f"{type(exc).__name__}: {exc}"
        accuracy = dict(row.precomputed_accuracy)
        try:
            clip = _clip_accuracy(row, report, live)
        except (BackendError, UQError) as exc:
            logger.warning("task %s: clip accuracy unavailable: %s", row.task_id, exc)
            clip = None
        if clip is not None:
            accuracy["clip"] = clip
        report.accuracy = accuracy
        atomic_write_text(path, dump_json(report.to_dict()))
        return report.status, None

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(work, rows))
    statuses = {row.task_id: status for row, (status, _) in zip(rows, results)}
    errors = {row.task_id: err for row, (_, err) in zip(rows, results) if err}
    manifest = RunManifest(
        run_id=sha256_hex(chash + canonical_json([r.to_dict() for r in rows]))[:16],
        config_hash=chash,
        seeds={"root": config.seed},
        backends=backends.identities(),
        started=started,
        finished=_now(),
        tasks=statuses,
        errors=errors,
    )
    atomic_write_text(out / "run-manifest.json", dump_json(manifest.to_dict()))
    return manifest


def load_reports(run_dir: str | Path) -> list[UncertaintyReport]:
    """Reports of the run's tasks in manifest order; failed tasks are absent."""
    run_dir = Path(run_dir)
    rows = ingest_manifest(run_dir / "tasks.jsonl")
    reports = []
    for row in rows:
        path = report_path(run_dir, row.task_id)
        if path.exists():
            reports.append(UncertaintyReport.from_dict(json.loads(path.read_text(encoding="utf-8"))))
    return reports


def collect_accuracies(reports: Sequence[UncertaintyReport], metric: str) -> dict[str, float]:
    metric = metric.lower()
    return {r.task_id: float(r.accuracy[metric]) for r in reports if metric in r.accuracy}


def _ranks(values: Sequence[float]) -> list[int]:
    order = sorted(range(len(values)), key=lambda i: (values[i], i))
    ranks = [0] * len(values)
    for rank, i in enumerate(order, start=1):
        ranks[i] = rank
    return ranks


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def scatter_svg(points: Sequence[tuple[str, float, float]], result: CalibrationResult, component: str, metric: str) -> str:
    """Uncertainty-vs-accuracy scatter with per-point rank labels; no timestamps."""
    width, height, pad = 640, 480, 60
    xs = [p[1] for p in points]
    ys = [p[2] for p in points]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    xspan = (x1 - x0) or 1.0
    yspan = (y1 - y0) or 1.0

    def sx(x):
        return pad + (x - x0) / xspan * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / yspan * (height - 2 * pad)

    xr, yr = _ranks(xs), _ranks(ys)
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 15}" text-anchor="middle">{component} uncertainty [{_fmt(x0)}, {_fmt(x1)}]</text>',
        f'<text x="15" y="{height / 2:.1f}" transform="rotate(-90 15 {height / 2:.1f})" text-anchor="middle">{metric} [{_fmt(y0)}, {_fmt(y1)}]</text>',
        f'<text x="{pad}" y="30">tau = {result.tau:.4f}, p = {result.p_value:.3g}, n = {result.n_tasks}</text>',
    ]
    for (task_id, x, y), rx, ry in zip(points, xr, yr):
        cx, cy = sx(x), sy(y)
        lines.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3"><title>{_xml(task_id)}</title></circle>')
        lines.append(f'<text x="{cx + 4:.2f}" y="{cy - 4:.2f}" font-size="8">{rx}/{ry}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _xml(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


@dataclass(frozen=True)
class ReportFiles:
    result: CalibrationResult
    csv_path: Path
    svg_path: Path
    summary_path: Path


def report(
    run_dir: str | Path,
    metric: str = "clip",
    component: str = "total",
    filter_k: Optional[int] = None,
) -> ReportFiles:
    """Write calibration.csv, scatter.svg and summary.json into ``run_dir``.

    Every output is computed before anything is written, so a missing
    accuracy leaves no files behind.
    """
    run_dir = Path(run_dir)
    metric = metric.lower()
    reports = load_reports(run_dir)
    if not reports:
        raise PipelineError(f"no task reports under {run_dir}")
    accuracies = collect_accuracies(reports, metric)
    if not accuracies:
        raise MissingAccuracyError([r.task_id for r in reports])
    result = calibration_report(reports, accuracies, component=component, filter_k=filter_k, metric_name=metric)
    reports = filter_reports(reports, component, filter_k)
    points = [(r.task_id, float(getattr(r, component)), accuracies[r.task_id]) for r in reports]

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["component", "metric", "tau", "p_value", "n"])
    writer.writerow([component, metric, repr(result.tau), repr(result.p_value), result.n_tasks])
    xr, yr = _ranks([p[1] for p in points]), _ranks([p[2] for p in points])
    summary = {
        "component": component,
        "metric": metric,
        "filter_k": filter_k,
        "result": result.to_dict(),
        "tasks": [
            {"task_id": t, "uncertainty": x, "accuracy": y, "uncertainty_rank": a, "accuracy_rank": b}
            for (t, x, y), a, b in zip(points, xr, yr)
        ],
    }
    svg = scatter_svg(points, result, component, metric)

    files = ReportFiles(result, run_dir / "calibration.csv", run_dir / "scatter.svg", run_dir / "summary.json")
    atomic_write_text(files.csv_path, buf.getvalue())
    atomic_write_text(files.svg_path, svg)
    atomic_write_text(files.summary_path, dump_json(summary))
    return files
