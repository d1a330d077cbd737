"""Command-line interface: run experiments, compare runs, list scenarios,
and serve the segmentation backend over TCP.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import metrics
from .channel import SCENARIO_PRESETS
from .errors import NavpError
from .harness import (
    RunConfig,
    apply_config_file,
    compare_summaries,
    resolve_scenario,
    run_experiment,
    write_comparison_frames_csv,
)
from .metrics import RunSummary
from .segmentation import PaletteBackend
from .frames import DEFAULT_PALETTE

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="navp",
        description="Network-adaptive remote segmentation testbed",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario/mode experiment in virtual time")
    run_p.add_argument("--scenario", required=True, help="preset name or scenario JSON path")
    run_p.add_argument("--mode", choices=("static", "adaptive"), default="adaptive")
    run_p.add_argument("--frames", type=int, default=200)
    run_p.add_argument("--seed", type=int, default=1)
    run_p.add_argument("--out", required=True, help="per-frame CSV output path")
    run_p.add_argument("--codec", choices=("raw", "jpeg", "quant"), default="jpeg")
    run_p.add_argument("--config", help="JSON config file overriding defaults")

    cmp_p = sub.add_parser("compare", help="compare two run summaries (a = baseline)")
    cmp_p.add_argument("--a", required=True, help="baseline summary JSON path")
    cmp_p.add_argument("--b", required=True, help="candidate summary JSON path")
    cmp_p.add_argument("--out", help="output prefix for comparison artifacts")

    sub.add_parser("scenarios", help="list the built-in network scenario presets")

    srv_p = sub.add_parser("serve", help="serve the palette backend over TCP")
    srv_p.add_argument("--host", default="127.0.0.1")
    srv_p.add_argument("--port", type=int, default=47474)

    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    config = RunConfig(scenario=args.scenario, mode=args.mode, frames=args.frames,
                       seed=args.seed, codec=args.codec)
    if args.config:
        config = apply_config_file(config, args.config)
        config = replace(config, scenario=args.scenario, mode=args.mode,
                         frames=args.frames, seed=args.seed, codec=args.codec)
    try:
        resolve_scenario(config.scenario)
    except KeyError as exc:
        print(f"navp run: {exc.args[0]}", file=sys.stderr)
        return USAGE_ERROR
    out_csv = Path(args.out)
    out_summary = out_csv.with_suffix(out_csv.suffix + ".summary.json")
    result = run_experiment(config, out_csv=out_csv, out_summary=out_summary)
    if not result.complete:
        print("navp run: session ended before all frames completed", file=sys.stderr)
        return RUNTIME_ERROR
    s = result.summary
    print(f"scenario={s.scenario} mode={s.mode} frames={s.frames}")
    print(
        f"rtt_ms mean={s.rtt_mean_us / 1000:.2f} median={s.rtt_median_us / 1000:.2f} "
        f"p95={s.rtt_p95_us / 1000:.2f}"
    )
    print(f"inference_ms mean={s.inference_mean_us / 1000:.2f}")
    print(f"ssim mean={s.ssim_mean:.4f}  bf mean={s.bf_mean:.4f}")
    print(f"wrote {out_csv} and {out_summary}")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    summary_a = RunSummary.from_json(Path(args.a).read_text(encoding="utf-8"))
    summary_b = RunSummary.from_json(Path(args.b).read_text(encoding="utf-8"))
    report = compare_summaries(summary_a, summary_b)
    width = max(len(k) for k in report)
    for key, value in report.items():
        if isinstance(value, float):
            print(f"{key:<{width}}  {value:+.3f}")
        else:
            print(f"{key:<{width}}  {value}")
    if args.out:
        out_json = Path(args.out + ".json")
        out_json.write_text(
            __import__("json").dumps(report, indent=2) + "\n", encoding="utf-8"
        )
        if summary_a.csv_path and summary_b.csv_path:
            frames_csv = Path(args.out + ".frames.csv")
            write_comparison_frames_csv(
                metrics.read_csv(summary_a.csv_path),
                metrics.read_csv(summary_b.csv_path),
                frames_csv,
            )
            print(f"wrote {out_json} and {frames_csv}")
        else:
            print(f"wrote {out_json}")
    return 0


def _cmd_scenarios() -> int:
    print(f"{'name':<14} {'down(Mbps)':>10} {'up(Mbps)':>9} {'rtt(ms)':>8} {'loss(%)':>8}")
    for s in SCENARIO_PRESETS.values():
        print(
            f"{s.name:<14} {s.downlink_mbps:>10g} {s.uplink_mbps:>9g} "
            f"{s.base_rtt_ms:>8g} {s.loss_prob * 100:>8g}"
        )
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    from .transport import serve_tcp

    backend = PaletteBackend(DEFAULT_PALETTE, measure_wall_time=True)
    print(f"serving palette backend on {args.host}:{args.port}", file=sys.stderr)
    serve_tcp(backend, host=args.host, port=args.port)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "scenarios":
            return _cmd_scenarios()
        if args.command == "serve":
            return _cmd_serve(args)
        raise AssertionError("unreachable")
    except (NavpError, ValueError, OSError, KeyError) as exc:
        print(f"navp: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
