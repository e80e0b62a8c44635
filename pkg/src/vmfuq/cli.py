"""Command-line entry point.

Exit status: 0 when every task is ok, 2 when any task is partial or failed,
1 for usage, config, or input errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from ._util import atomic_write_text, dump_json
from .backends import build_backend_set
from .backends.synthetic import SyntheticWorld
from .calibration import COMPONENTS, calibration_report
from .calibration.ingest import read_accuracy_csv
from .errors import BackendError, DomainError, PipelineError, UQError
from .oracle import HierarchicalModelSpec, decomposition_audit
from .pipeline import PipelineConfig, aleatoric_uncertainty, epistemic_uncertainty, sample_latents, total_uncertainty
from .runner import collect_accuracies, ingest_manifest, load_config, load_reports, report, run, write_manifest
from .suite import FLOORS, SuiteSpec, make_suite, synthetic_backend_configs

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2
BACKEND_SETS = ("config", "synthetic")

logger = logging.getLogger("vmfuq")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(obj, out: Optional[str]) -> None:
    text = dump_json(obj)
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def resolve_config(args) -> PipelineConfig:
    config = load_config(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.backend_set == "synthetic":
        world = SyntheticWorld(text_dim=config.text_target_dim, video_dim=config.video_target_dim, seed=config.seed)
        config = replace(config, backends=synthetic_backend_configs(world))
    return config


def _backends(config: PipelineConfig):
    if not config.backends:
        raise DomainError("no backends configured; pass --config or --backend-set synthetic")
    return build_backend_set(config.backends)


def cmd_expand(args) -> int:
    config = resolve_config(args)
    latents, _ = sample_latents(args.prompt, config, _backends(config))
    _emit([z.to_dict() for z in latents], args.out)
    return EXIT_OK


def cmd_aleatoric(args) -> int:
    config = resolve_config(args)
    value, diag = aleatoric_uncertainty(args.prompt, config, _backends(config))
    _emit({"aleatoric": value, "kappa": diag.params.concentration, "dim": diag.params.dim}, args.out)
    return EXIT_OK


def cmd_epistemic(args) -> int:
    config = resolve_config(args)
    value, diag = epistemic_uncertainty(args.prompt, config, _backends(config))
    _emit({"epistemic": value, "per_latent": [p.to_dict() for p in diag.per_latent], "dropped": diag.dropped}, args.out)
    return EXIT_PARTIAL if diag.dropped else EXIT_OK


def cmd_total(args) -> int:
    config = resolve_config(args)
    rep = total_uncertainty(args.prompt, config, _backends(config))
    _emit(rep.to_dict(), args.out)
    return EXIT_OK if rep.status == "ok" else EXIT_PARTIAL


def cmd_run(args) -> int:
    if not args.manifest or not args.out:
        raise DomainError("run needs --manifest and --out")
    config = resolve_config(args)
    rows = ingest_manifest(args.manifest)
    manifest = run(rows, config, args.out, backends=_backends(config), jobs=args.jobs)
    counts = {s: sum(1 for v in manifest.tasks.values() if v == s) for s in ("ok", "partial", "failed")}
    print(json.dumps({"run_id": manifest.run_id, "out": str(args.out), **counts}, sort_keys=True))
    return EXIT_OK if manifest.ok else EXIT_PARTIAL


def cmd_calibrate(args) -> int:
    if not args.out:
        raise DomainError("calibrate needs --out pointing at a run directory")
    reports = load_reports(args.out)
    if args.accuracy:
        accuracies = read_accuracy_csv(args.accuracy).get(args.metric.lower(), {})
    else:
        accuracies = collect_accuracies(reports, args.metric)
    result = calibration_report(reports, accuracies, args.component, args.filter_k, args.metric.lower())
    _emit({"component": args.component, **result.to_dict()}, None)
    return EXIT_OK


def cmd_report(args) -> int:
    if not args.out:
        raise DomainError("report needs --out pointing at a run directory")
    files = report(args.out, metric=args.metric, component=args.component, filter_k=args.filter_k)
    r = files.result
    print(f"{args.component},{r.metric_name},{r.tau!r},{r.p_value!r},{r.n_tasks}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.action == "audit":
        if args.config:
            spec = HierarchicalModelSpec.from_dict(json.loads(Path(args.config).read_text(encoding="utf-8")))
        else:
            spec = HierarchicalModelSpec.simple(8, 8, 20.0, 50.0, seed=args.seed or 0)
        result = decomposition_audit(spec, args.samples, args.mixture_components)
        _emit(result.to_dict(), args.out and str(Path(args.out) / "audit.json"))
        return EXIT_OK
    if not args.out:
        raise DomainError("simulate suite needs --out")
    floor = None if args.floor == "none" else args.floor
    rows, config, _ = make_suite(SuiteSpec(n_tasks=args.tasks, seed=args.seed or 0, floor=floor))
    out = Path(args.out)
    write_manifest(rows, out / "manifest.jsonl")
    atomic_write_text(out / "config.json", dump_json(config.to_dict()))
    print(json.dumps({"manifest": str(out / "manifest.jsonl"), "config": str(out / "config.json")}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="pipeline config JSON")
    common.add_argument("--out", metavar="DIR", help="output file or run directory")
    common.add_argument("--seed", type=int, default=None, help="root seed (overrides the config)")
    common.add_argument("--backend-set", choices=BACKEND_SETS, default="config",
                        help="'config' uses the config's backends; 'synthetic' uses the built-in world")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="vmfuq", description="Entropy-based uncertainty for text-to-video generation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, fn, text in (
        ("expand", cmd_expand, "sample latent prompts"),
        ("aleatoric", cmd_aleatoric, "aleatoric uncertainty of one prompt"),
        ("epistemic", cmd_epistemic, "epistemic uncertainty of one prompt"),
        ("total", cmd_total, "full uncertainty report for one prompt"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("prompt")
        p.set_defaults(func=fn)

    p = sub.add_parser("run", parents=[common], help="run every task in a manifest")
    p.add_argument("--manifest", metavar="PATH")
    p.add_argument("--jobs", type=int, default=1, help="tasks processed in parallel")
    p.set_defaults(func=cmd_run)

    for name, fn in (("calibrate", cmd_calibrate), ("report", cmd_report)):
        p = sub.add_parser(name, parents=[common], help=f"{name} a finished run")
        p.add_argument("--component", choices=COMPONENTS, default="total")
        p.add_argument("--metric", metavar="NAME", default="clip")
        p.add_argument("--filter-k", type=int, default=None, metavar="INT")
        if name == "calibrate":
            p.add_argument("--accuracy", metavar="PATH", help="CSV of task_id,metric_name,value")
        p.set_defaults(func=fn)

    p = sub.add_parser("simulate", parents=[common], help="synthetic-oracle audits and suites")
    p.add_argument("action", choices=("audit", "suite"))
    p.add_argument("--samples", type=int, default=500_000, help="audit Monte-Carlo sample count")
    p.add_argument("--mixture-components", type=int, default=256)
    p.add_argument("--tasks", type=int, default=40)
    p.add_argument("--floor", choices=[f or "none" for f in FLOORS], default="none")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (BackendError, PipelineError) as exc:
        print(f"vmfuq: {exc}", file=sys.stderr)
        return EXIT_PARTIAL
    except (UQError, ValueError, OSError) as exc:
        print(f"vmfuq: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
