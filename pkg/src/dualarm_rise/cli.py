"""Command line entry point: run, compare, metrics, check-gains."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import CONTROLLERS, SCENARIOS, ConfigError, SimConfig, load_config, scenario_preset
from .controllers import ControllerError, check_gain_conditions
from .harness import HarnessError, compute_metrics, export, read_csv, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3

log = logging.getLogger("dualarm_rise")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or YAML scenario file")
    common.add_argument("--scenario", choices=SCENARIOS, help="preset scenario (ignored with --config)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="output directory (default: config output_dir)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--duration", type=float, help="override the simulated duration in seconds")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="dualarm-rise", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="simulate one or both controllers and export traces")
    run.add_argument("--controller", choices=(*CONTROLLERS, "both"), default=None)
    sub.add_parser("compare", parents=[common], help="run both controllers and print the error table")
    met = sub.add_parser("metrics", help="error table from two exported CSV traces")
    met.add_argument("dnn_trace")
    met.add_argument("baseline_trace")
    met.add_argument("--warmup", type=float, default=10.0)
    met.add_argument("--format", choices=("csv", "json"), default="csv",
                     help="csv prints the table, json prints the report as JSON")
    sub.add_parser("check-gains", parents=[common], help="evaluate the sufficient gain conditions")
    return ap


def _config(args) -> SimConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = scenario_preset(args.scenario or "figure-eight")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out:
        overrides["output_dir"] = args.out
    if args.duration is not None:
        overrides["duration"] = args.duration
    return cfg.replace(**overrides) if overrides else cfg


def _run(args, cfg: SimConfig) -> int:
    choice = args.controller or cfg.controller
    names = CONTROLLERS if choice == "both" else (choice,)
    code = EXIT_OK
    for name in names:
        trace = run_scenario(cfg, name)
        for path in export(trace, cfg.output_dir, args.format, warmup=cfg.metrics_warmup):
            print(path)
        if trace.status != "ok":
            print(f"{name}: {trace.status} at t={len(trace) * cfg.dt:.3f} s", file=sys.stderr)
            code = EXIT_DIVERGED
    return code


def _compare(args, cfg: SimConfig) -> int:
    traces = {name: run_scenario(cfg, name) for name in CONTROLLERS}
    for trace in traces.values():
        export(trace, cfg.output_dir, args.format, warmup=cfg.metrics_warmup)
    bad = [n for n, tr in traces.items() if tr.status != "ok"]
    if bad:
        print(f"diverged: {', '.join(bad)}", file=sys.stderr)
        return EXIT_DIVERGED
    report = compute_metrics(traces["dnn-rise"], traces["baseline"], cfg.metrics_warmup)
    text = report.table()
    print(text)
    out = Path(cfg.output_dir)
    (out / f"{cfg.scenario}_metrics.json").write_text(json.dumps(report.to_dict(), indent=2))
    (out / f"{cfg.scenario}_metrics.txt").write_text(text + "\n")
    return EXIT_OK


def _metrics(args) -> int:
    report = compute_metrics(read_csv(args.dnn_trace), read_csv(args.baseline_trace), args.warmup)
    print(json.dumps(report.to_dict(), indent=2) if args.format == "json" else report.table())
    return EXIT_OK


def _check_gains(cfg: SimConfig) -> int:
    report = check_gain_conditions(cfg.gains, cfg.certificate)
    for line in report.lines():
        print(line)
    print(f"lambda = {report.lam:g}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "metrics":
            return _metrics(args)
        cfg = _config(args)
        if args.command == "run":
            return _run(args, cfg)
        if args.command == "compare":
            return _compare(args, cfg)
        return _check_gains(cfg)
    except (ConfigError, ControllerError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HarnessError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
