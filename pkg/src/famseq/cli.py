"""Command-line experiment runner: validate / run / gen / report."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import pipeline, report as report_mod
from .io import save_dataset
from .metrics import MetricsReport, aggregate_runs
from .synthgen import generate


def _load_config(path, args) -> pipeline.ExperimentConfig:
    d = json.loads(Path(path).read_text())
    if args.preset:
        d["preset"] = args.preset
    if args.seed is not None:
        d["seed"] = args.seed
    if args.out:
        d["out_dir"] = args.out
    return pipeline.config_from_json(d)


def cmd_validate(args) -> int:
    try:
        cfg = _load_config(args.config, args)
    except (json.JSONDecodeError, pipeline.ConfigError, OSError) as e:
        print(f"config-error: {e}")
        return 1
    diags = pipeline.validate(cfg)
    for d in diags:
        print(f"invalid: {d}")
    if not diags:
        print("ok")
    return 0 if not diags else 1


def cmd_run(args) -> int:
    try:
        cfg = _load_config(args.config, args)
    except (json.JSONDecodeError, pipeline.ConfigError, OSError) as e:
        print(f"error-class=config {e}", file=sys.stderr)
        return 2
    try:
        out = pipeline.run(cfg)
    except pipeline.ConfigError as e:
        print(f"error-class=config {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"error-class={type(e).__name__} {e}", file=sys.stderr)
        return 1
    print(f"wrote reports to {out}")
    return 0


def cmd_gen(args) -> int:
    spec = pipeline.genspec_from_json(json.loads(Path(args.genspec).read_text()))
    if args.seed is not None:
        spec = pipeline.genspec_from_json(
            {**json.loads(Path(args.genspec).read_text()), "seed": args.seed})
    ds = generate(spec)
    save_dataset(ds, args.out)
    print(f"wrote {ds.n_cells} cells to {args.out}")
    return 0


def cmd_report(args) -> int:
    """Re-render report files from a saved metrics.json."""
    payload = json.loads(Path(args.metrics).read_text())
    class_names = payload["class_names"]
    reports = []
    for r in payload["runs"]:
        pc = r["per_class"]
        reports.append(MetricsReport(
            accuracy=r["accuracy"], macro_f1=r["macro_f1"],
            balanced_accuracy=r["balanced_accuracy"],
            precision=np.asarray(pc["precision"]), recall=np.asarray(pc["recall"]),
            f1=np.asarray(pc["f1"]), support=np.asarray(pc["support"]),
            confusion=np.asarray(r["confusion"]),
        ))
    agg = aggregate_runs(reports)
    extra = {k: payload[k] for k in ("preset", "protocol") if k in payload}
    report_mod.render_reports(agg, class_names, args.out, extra=extra)
    print(f"re-rendered reports to {args.out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="famseq",
                                     description="Family-sequence experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    pv = sub.add_parser("validate", help="check a config without running it")
    pv.add_argument("config")
    pv.set_defaults(fn=cmd_validate)

    pr = sub.add_parser("run", help="run an experiment preset end to end")
    pr.add_argument("config")
    pr.set_defaults(fn=cmd_run)

    pg = sub.add_parser("gen", help="generate a synthetic dataset")
    pg.add_argument("genspec")
    pg.add_argument("--out", required=True)
    pg.set_defaults(fn=cmd_gen)

    pp = sub.add_parser("report", help="re-render figures from saved metrics.json")
    pp.add_argument("metrics")
    pp.add_argument("--out", required=True)
    pp.set_defaults(fn=cmd_report)

    for p in (pv, pr):
        p.add_argument("--preset", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
    pg.add_argument("--seed", type=int, default=None)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
