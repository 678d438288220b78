"""Command-line front end: design, evaluate, and report subcommands.

Exit codes: 0 success, 1 I/O failure, 2 invalid or infeasible input.
The SAF_LOG environment variable sets the log level (default WARNING).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .beamforming import Target
from .io import (
    SchemaError,
    load_design_config,
    load_layout,
    read_trace_summary,
    save_layout,
    spec_hash,
    write_manifest,
    write_metrics_json,
    write_pattern_csv,
    write_trace_jsonl,
)
from .metrics import evaluate_layout
from .optimizer import InfeasibleSpecError, optimize, outer_loop

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID = 2


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def _parse_target(text: str) -> Target:
    parts = text.split(",")
    if len(parts) not in (2, 3, 4):
        raise argparse.ArgumentTypeError(
            f"target must be 'u,v', 'u,v,amp' or 'u,v,re,im', got {text!r}"
        )
    u, v = float(parts[0]), float(parts[1])
    if len(parts) == 2:
        amp = 1.0 + 0.0j
    elif len(parts) == 3:
        amp = complex(float(parts[2]), 0.0)
    else:
        amp = complex(float(parts[2]), float(parts[3]))
    try:
        return Target(u, v, amp)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="saf", description="Design and evaluate uniform sparse MIMO antenna arrays."
    )
    parser.add_argument("--version", action="version", version=f"saf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    design = sub.add_parser("design", help="run the layout optimizer from a design config")
    design.add_argument("--config", required=True, type=Path, help="design config JSON")
    design.add_argument("--out", required=True, type=Path, help="output directory")
    design.add_argument("--seed", type=int, default=None, help="override the config seed")
    design.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    design.add_argument(
        "--grid-oversample", type=int, default=None, help="override q_phi and q_theta"
    )

    evaluate = sub.add_parser("evaluate", help="beamform a layout file and score it")
    evaluate.add_argument("--layout", required=True, type=Path, help="layout JSON")
    evaluate.add_argument("--out", required=True, type=Path, help="output directory")
    evaluate.add_argument("--grid-oversample", type=int, default=8)
    evaluate.add_argument(
        "--target",
        action="append",
        type=_parse_target,
        default=None,
        metavar="U,V[,RE[,IM]]",
        help="far-field target (repeatable); default: unit broadside",
    )
    evaluate.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    report = sub.add_parser("report", help="summarize an optimizer trace file")
    report.add_argument("--trace", required=True, type=Path, help="trace JSONL file")
    return parser


def cmd_design(args) -> int:
    try:
        spec, outer = load_design_config(args.config)
        raw_config = json.loads(args.config.read_text())
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
        raw_config["seed"] = args.seed
    if args.grid_oversample is not None:
        overrides["q_phi"] = args.grid_oversample
        overrides["q_theta"] = args.grid_oversample
        raw_config["q_phi"] = args.grid_oversample
        raw_config["q_theta"] = args.grid_oversample
    if overrides:
        spec = dataclasses.replace(spec, **overrides)

    started = _timestamp()
    try:
        if outer:
            spec, layout, trace = outer_loop(spec, outer, threads=args.threads)
        else:
            layout, trace = optimize(spec)
    except InfeasibleSpecError as exc:
        print(f"error: infeasible design spec: {exc}", file=sys.stderr)
        return EXIT_INVALID

    su = math.sin(math.radians(spec.target_ufov_az))
    sv = math.sin(math.radians(spec.target_ufov_el))
    pattern, report = evaluate_layout(
        layout, q_phi=spec.q_phi, q_theta=spec.q_theta, fov=(-su, su, -sv, sv)
    )

    try:
        args.out.mkdir(parents=True, exist_ok=True)
        names = ["layout.json", "trace.jsonl", "metrics.json", "pattern.csv", "manifest.json"]
        save_layout(layout, args.out / "layout.json", zones=spec.zones)
        write_trace_jsonl(trace, args.out / "trace.jsonl", seed=spec.seed, k_max=spec.k_max)
        write_metrics_json(report, args.out / "metrics.json")
        write_pattern_csv(pattern, args.out / "pattern.csv")
        write_manifest(
            args.out / "manifest.json",
            tool_version=__version__,
            config_digest=spec_hash(raw_config),
            seed=spec.seed,
            started_at=started,
            finished_at=_timestamp(),
            outputs=names,
        )
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"best PSLR {trace.final_pslr_db:.3f} dB after {len(trace.records)} iterations "
          f"({trace.termination}); outputs in {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    try:
        layout, _zones = load_layout(args.layout)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    q = args.grid_oversample
    try:
        pattern, report = evaluate_layout(layout, q_phi=q, q_theta=q, targets=args.target)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        write_pattern_csv(pattern, args.out / "pattern.csv")
        write_metrics_json(report, args.out / "metrics.json")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    pslr_text = "inf" if report.pslr_db == math.inf else f"{report.pslr_db:.3f}"
    print(f"PSLR {pslr_text} dB; outputs in {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        summary = read_trace_summary(args.trace)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"iterations: {summary.iterations}")
    print(f"termination: {summary.termination}")
    print(f"initial PSLR: {summary.initial_pslr_db:.3f} dB")
    print(f"final PSLR: {summary.final_pslr_db:.3f} dB")
    print(f"improvements: {summary.improvements}")
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("SAF_LOG", "WARNING"))
    args = build_parser().parse_args(argv)
    if args.command == "design":
        return cmd_design(args)
    if args.command == "evaluate":
        return cmd_evaluate(args)
    return cmd_report(args)


if __name__ == "__main__":
    sys.exit(main())
