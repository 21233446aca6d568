"""Command line front end.

Subcommands: ``gen-plans`` (build a plan set), ``run`` (trials of one plan),
``bench`` (full plan-set benchmark), ``stats`` (re-summarise persisted
runs). Any flag can come from a key=value config file via ``--config``;
explicit flags win because config entries are expanded before the real
argument list.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import (BenchSpec, format_summary_table, run_bench, summarize,
                    SUMMARY_FIELDS, _fmt)
from .floorplan import FloorPlanConfig, generate_plan, save_plan


def _parse_start(text):
    if not text:
        return None
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("start must be 'x,y,yaw'")
    return tuple(parts)


def _expand_config(argv: list[str]) -> list[str]:
    """Turn ``--config FILE`` key=value entries into leading CLI flags."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise SystemExit("--config needs a file argument")
    path = Path(argv[idx + 1])
    rest = argv[:idx] + argv[idx + 2:]
    injected = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        injected += [f"--{key.strip().replace('_', '-')}", value.strip()]
    # subcommand first, then config values, then explicit flags (which win)
    return rest[:1] + injected + rest[1:]


def _add_common_run_args(p):
    p.add_argument("--predictor", default="identity",
                   help="identity | oracle | heuristic | external:<cmd> | tcp:<host>:<port>")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--coverage", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--start", type=_parse_start, default=None,
                   help="fixed start pose 'x,y,yaw' (sampled if omitted)")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--max-steps", type=int, default=2000)
    p.add_argument("--sensor-noise", type=float, default=0.05)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mapex")
    parser.add_argument("--config", help="key=value file supplying defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-plans", help="generate a floor plan set")
    g.add_argument("--count", type=int, default=10)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--max-w", type=float, default=21.0)
    g.add_argument("--max-h", type=float, default=11.0)
    g.add_argument("--res", type=float, default=0.2)
    g.add_argument("--min-door", type=float, default=0.8)
    g.add_argument("--min-room", type=float, default=2.0)
    g.add_argument("--internal-room-prob", type=float, default=0.2)
    g.add_argument("--furniture-max", type=int, default=6)

    r = sub.add_parser("run", help="run trials of one planner on one plan")
    r.add_argument("--plan", type=Path, required=True)
    r.add_argument("--planner", default="frontier",
                   help="frontier | frontier_pred | greedy_pred | external:<cmd> | tcp:<host>:<port>")
    _add_common_run_args(r)

    b = sub.add_parser("bench", help="benchmark planners over a plan set")
    b.add_argument("--plans", type=Path, required=True,
                   help="directory of .pgm plans (with sidecars)")
    b.add_argument("--planners", default="frontier",
                   help="comma-separated planner list")
    b.add_argument("--jobs", type=int, default=1)
    _add_common_run_args(b)

    s = sub.add_parser("stats", help="summarise persisted runs")
    s.add_argument("--runs", type=Path, required=True)
    s.add_argument("--format", choices=("table", "csv"), default="table")
    return parser


def cmd_gen_plans(args) -> int:
    args.out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        config = FloorPlanConfig(
            max_width_m=args.max_w, max_height_m=args.max_h,
            resolution_m=args.res, min_door_width_m=args.min_door,
            min_room_dim_m=args.min_room,
            internal_room_prob=args.internal_room_prob,
            furniture_count_range=(0, args.furniture_max),
            rng_seed=args.seed + i)
        plan = generate_plan(config)
        save_plan(plan, args.out / f"plan_{i:04d}.pgm")
    print(f"wrote {args.count} plans to {args.out}")
    return 0


def _bench_spec(args, plans, planners) -> BenchSpec:
    return BenchSpec(
        plans=plans,
        planners=planners,
        predictor=args.predictor,
        trials_per_plan=args.trials,
        coverage_target=args.coverage,
        base_seed=args.seed,
        out_dir=args.out,
        parallelism=getattr(args, "jobs", 1),
        start=args.start,
        max_steps=args.max_steps,
        sensor_noise=args.sensor_noise)


def cmd_run(args) -> int:
    summary = run_bench(_bench_spec(args, [args.plan], [args.planner]))
    print(format_summary_table(summary))
    return 0


def cmd_bench(args) -> int:
    plans = sorted(args.plans.glob("*.pgm"))
    if not plans:
        print(f"no plans found in {args.plans}", file=sys.stderr)
        return 2
    planners = [p.strip() for p in args.planners.split(",") if p.strip()]
    summary = run_bench(_bench_spec(args, plans, planners))
    print(format_summary_table(summary))
    return 0


def cmd_stats(args) -> int:
    summary = summarize(args.runs)
    for err in summary.errors:
        print(f"warning: {err}", file=sys.stderr)
    if not summary.trials:
        print("no trials found", file=sys.stderr)
        return 2
    if args.format == "csv":
        print(",".join(SUMMARY_FIELDS))
        for row in summary.rows:
            print(",".join(_fmt(row[k]) for k in SUMMARY_FIELDS))
    else:
        print(format_summary_table(summary))
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    argv = _expand_config(argv)
    args = build_parser().parse_args(argv)
    handlers = {"gen-plans": cmd_gen_plans, "run": cmd_run,
                "bench": cmd_bench, "stats": cmd_stats}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
