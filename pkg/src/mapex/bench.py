"""Multi-trial benchmark harness: runs planner/predictor combinations over
plan sets, records per-trial traces, and reduces them to the statistics
tables and coverage-vs-path curves used for comparisons.

Per-trial seeds derive as ``base_seed + trial_index``, so a benchmark spec
fully determines every output byte; serial and parallel execution write
identical files. Trials that error (protocol violations included) are
recorded as failures, never crash the harness, and are excluded from path
statistics but counted.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import pgm
from .episode import (TERMINAL_COVERAGE, Episode, EpisodeConfig,
                      EpisodeRecord)
from .floorplan import FloorPlan, load_plan
from .planners import make_policy
from .predictor import make_predictor

SUMMARY_FIELDS = ("plan", "planner", "trials", "successes", "failures",
                  "min_m", "max_m", "avg_m", "std_m")


@dataclass
class BenchSpec:
    plans: list
    planners: list
    predictor: str = "identity"
    trials_per_plan: int = 10
    coverage_target: float = 0.95
    base_seed: int = 0
    out_dir: Path | str = "bench_out"
    parallelism: int = 1
    start: tuple[float, float, float] | None = None
    max_steps: int = 2000
    sensor_noise: float = 0.05

    def __post_init__(self):
        if self.trials_per_plan < 1:
            raise ValueError("trials_per_plan must be >= 1")
        if not self.planners:
            raise ValueError("planners must be non-empty")
        self.plans = [Path(p) for p in self.plans]
        self.out_dir = Path(self.out_dir)


@dataclass
class BenchSummary:
    rows: list = field(default_factory=list)    # one dict per (plan, planner)
    trials: list = field(default_factory=list)  # one dict per trial
    errors: list = field(default_factory=list)  # unreadable trace files


def run_episode(plan: FloorPlan, policy, predictor,
                config: EpisodeConfig) -> EpisodeRecord:
    """Drive one episode with a policy until the environment terminates or
    the policy reports exploration complete."""
    env = Episode(plan, config, predictor)
    env.reset()
    while not env.done:
        action = policy.next_action(env)
        if action is None:
            env.finish("exploration_complete")
            break
        env.step(action)
    return env.record


def _config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _trial_name(plan_path: Path, planner: str, trial: int) -> str:
    return f"{Path(plan_path).stem}__{planner}__t{trial:03d}"


def run_trial(task: dict) -> dict:
    """Execute one benchmark trial and persist its trace and manifest.

    ``task`` is a plain picklable dict (see run_bench) so trials can run in
    worker processes.
    """
    plan_path = Path(task["plan"])
    planner_name = task["planner"]
    trial = task["trial"]
    out_dir = Path(task["out_dir"])
    name = _trial_name(plan_path, planner_name, trial)
    trace_path = out_dir / "trials" / f"{name}.csv"
    manifest_path = out_dir / "trials" / f"{name}.manifest"
    trace_path.parent.mkdir(parents=True, exist_ok=True)

    seed = task["base_seed"] + trial
    row = {
        "plan": plan_path.stem, "planner": planner_name, "trial": trial,
        "seed": seed, "success": False, "path_at_target_m": None,
        "steps": 0, "final_coverage": 0.0, "final_f1": 0.0,
        "terminal_reason": "error",
    }
    policy = None
    predictor = None
    try:
        plan = load_plan(plan_path)
        policy = make_policy(planner_name)
        predictor = make_predictor(task["predictor"], plan=plan)
        sensor_seed = seed
        config = EpisodeConfig(
            coverage_target=task["coverage_target"],
            max_steps=task["max_steps"],
            rng_seed=seed,
            start=tuple(task["start"]) if task["start"] else None,
            coverage_source=policy.coverage_source,
        )
        config.sensor = replace(config.sensor, rng_seed=sensor_seed,
                                adjacent_occupied_prob=task["sensor_noise"])
        record = run_episode(plan, policy, predictor, config)
        record.to_csv(trace_path)
        path_at = record.path_at_coverage(task["coverage_target"])
        final = record.final
        row.update({
            "success": record.terminal_reason == TERMINAL_COVERAGE and path_at is not None,
            "path_at_target_m": path_at,
            "steps": final.step,
            "final_coverage": final.coverage,
            "final_f1": final.f1,
            "terminal_reason": record.terminal_reason,
        })
    except Exception as exc:  # failed trial, not a harness crash
        row["error"] = f"{type(exc).__name__}: {exc}"
        if not trace_path.exists():
            EpisodeRecord().to_csv(trace_path)
    finally:
        for closer in (policy, predictor):
            if closer is not None:
                try:
                    closer.close()
                except Exception:
                    pass

    semantic = {k: task[k] for k in ("planner", "predictor", "trial",
                                     "base_seed", "coverage_target",
                                     "max_steps", "start", "sensor_noise")}
    semantic["plan"] = plan_path.name
    manifest = {
        "plan_path": str(plan_path),
        "plan": row["plan"],
        "planner": planner_name,
        "predictor": task["predictor"],
        "trial": trial,
        "seed": seed,
        "coverage_target": repr(task["coverage_target"]),
        "config_hash": _config_hash(semantic),
        "terminal_reason": row["terminal_reason"],
        "success": int(row["success"]),
        "path_at_target_m": "" if row["path_at_target_m"] is None else repr(row["path_at_target_m"]),
    }
    if "error" in row:
        manifest["error"] = row["error"]
    pgm.write_sidecar(manifest_path, manifest)
    return row


def run_bench(spec: BenchSpec) -> BenchSummary:
    """Run every (plan, planner, trial) combination and write all outputs:
    per-trial CSV traces and manifests, the summary table (text + CSV) and
    per-(plan, planner) coverage-vs-path curves (CSV + SVG)."""
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    tasks = []
    for plan_path in spec.plans:
        for planner in spec.planners:
            for trial in range(spec.trials_per_plan):
                tasks.append({
                    "plan": str(plan_path),
                    "planner": planner,
                    "predictor": spec.predictor,
                    "trial": trial,
                    "base_seed": spec.base_seed,
                    "coverage_target": spec.coverage_target,
                    "max_steps": spec.max_steps,
                    "start": list(spec.start) if spec.start else None,
                    "out_dir": str(spec.out_dir),
                    "sensor_noise": spec.sensor_noise,
                })
    if spec.parallelism > 1:
        with ProcessPoolExecutor(max_workers=spec.parallelism) as pool:
            results = list(pool.map(run_trial, tasks))
    else:
        results = [run_trial(t) for t in tasks]

    results.sort(key=lambda r: (r["plan"], r["planner"], r["trial"]))
    summary = BenchSummary(rows=_reduce(results), trials=results)
    write_summary(summary, spec.out_dir)
    _write_all_curves(spec, summary, spec.out_dir)
    return summary


def _reduce(trials: list) -> list:
    groups: dict = {}
    for t in trials:
        groups.setdefault((t["plan"], t["planner"]), []).append(t)
    rows = []
    for (plan, planner), members in sorted(groups.items()):
        paths = [t["path_at_target_m"] for t in members if t["success"]]
        n_ok = len(paths)
        row = {"plan": plan, "planner": planner,
               "trials": len(members), "successes": n_ok,
               "failures": len(members) - n_ok,
               "min_m": min(paths) if paths else None,
               "max_m": max(paths) if paths else None,
               "avg_m": float(np.mean(paths)) if paths else None,
               "std_m": float(np.std(paths, ddof=1)) if n_ok > 1 else (0.0 if paths else None)}
        rows.append(row)
    return rows


def write_summary(summary: BenchSummary, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [",".join(SUMMARY_FIELDS)]
    for row in summary.rows:
        lines.append(",".join(_fmt(row[k]) for k in SUMMARY_FIELDS))
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n")
    (out_dir / "summary.txt").write_text(format_summary_table(summary) + "\n")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_summary_table(summary: BenchSummary) -> str:
    headers = ("plan", "planner", "trials", "fail", "min", "max", "avg", "std")
    rows = [headers]
    for r in summary.rows:
        rows.append((r["plan"], r["planner"], str(r["trials"]), str(r["failures"]),
                     _num(r["min_m"]), _num(r["max_m"]), _num(r["avg_m"]), _num(r["std_m"])))
    widths = [max(len(row[i]) for row in rows) for i in range(len(headers))]
    out = []
    for i, row in enumerate(rows):
        out.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip())
        if i == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out)


def _num(value) -> str:
    return "-" if value is None else f"{value:.2f}"


# -- summarising persisted runs ------------------------------------------------


def summarize(runs_dir) -> BenchSummary:
    """Rebuild a BenchSummary from persisted trial traces and manifests."""
    runs_dir = Path(runs_dir)
    trials_dir = runs_dir / "trials" if (runs_dir / "trials").is_dir() else runs_dir
    results = []
    errors = []
    for manifest_path in sorted(trials_dir.glob("*.manifest")):
        try:
            manifest = pgm.read_sidecar(manifest_path)
            trace_path = manifest_path.with_suffix(".csv")
            record = EpisodeRecord.from_csv(trace_path)
            target = float(manifest["coverage_target"])
            path_at = record.path_at_coverage(target)
            success = manifest.get("success") == "1"
            results.append({
                "plan": manifest["plan"],
                "planner": manifest["planner"],
                "trial": int(manifest["trial"]),
                "seed": int(manifest["seed"]),
                "success": success,
                "path_at_target_m": path_at,
                "steps": record.final.step if record.rows else 0,
                "final_coverage": record.final.coverage if record.rows else 0.0,
                "final_f1": record.final.f1 if record.rows else 0.0,
                "terminal_reason": manifest.get("terminal_reason", "unknown"),
            })
        except Exception as exc:
            errors.append(f"{manifest_path.name}: {type(exc).__name__}: {exc}")
    results.sort(key=lambda r: (r["plan"], r["planner"], r["trial"]))
    return BenchSummary(rows=_reduce(results), trials=results, errors=errors)


# -- coverage-vs-path curves ----------------------------------------------------


def coverage_curve(records: list[EpisodeRecord], points: int = 201):
    """Mean and standard deviation of coverage as a step function of path
    length, sampled on a shared grid across trials."""
    max_path = max((r.rows[-1].path_m for r in records if r.rows), default=0.0)
    xs = np.linspace(0.0, max_path, points) if max_path > 0 else np.zeros(1)
    curves = []
    for record in records:
        if not record.rows:
            continue
        path = np.array([row.path_m for row in record.rows])
        cov = np.maximum.accumulate(np.array([row.coverage for row in record.rows]))
        idx = np.searchsorted(path, xs, side="right") - 1
        curves.append(np.where(idx >= 0, cov[np.clip(idx, 0, len(cov) - 1)], 0.0))
    if not curves:
        return xs, np.zeros_like(xs), np.zeros_like(xs)
    stack = np.vstack(curves)
    return xs, stack.mean(axis=0), stack.std(axis=0)


def _write_all_curves(spec: BenchSpec, summary: BenchSummary, out_dir: Path) -> None:
    curves_dir = Path(out_dir) / "curves"
    curves_dir.mkdir(parents=True, exist_ok=True)
    groups: dict = {}
    for t in summary.trials:
        groups.setdefault((t["plan"], t["planner"]), []).append(t)
    for (plan, planner), members in sorted(groups.items()):
        records = []
        for t in members:
            trace = Path(out_dir) / "trials" / f"{plan}__{planner}__t{t['trial']:03d}.csv"
            if trace.exists():
                records.append(EpisodeRecord.from_csv(trace))
        xs, mean, std = coverage_curve(records)
        name = f"{plan}__{planner}"
        lines = ["path_m,mean_coverage,std_coverage"]
        for x, m, s in zip(xs, mean, std):
            lines.append(f"{x!r},{m!r},{s!r}")
        (curves_dir / f"{name}.csv").write_text("\n".join(lines) + "\n")
        (curves_dir / f"{name}.svg").write_text(render_curve_svg(xs, mean, std, name))


def render_curve_svg(xs, mean, std, title: str,
                     width: int = 640, height: int = 400) -> str:
    """Minimal curve rendering: mean polyline plus a +-std band.

    The CSV next to it is the authoritative artifact; this is a quick look.
    """
    pad = 50
    x_max = float(xs[-1]) if len(xs) and xs[-1] > 0 else 1.0

    def sx(x):
        return pad + (width - 2 * pad) * x / x_max

    def sy(y):
        return height - pad - (height - 2 * pad) * min(max(y, 0.0), 1.0)

    mean_pts = " ".join(f"{sx(x):.1f},{sy(m):.1f}" for x, m in zip(xs, mean))
    upper = [(x, min(1.0, m + s)) for x, m, s in zip(xs, mean, std)]
    lower = [(x, max(0.0, m - s)) for x, m, s in zip(xs, mean, std)]
    band_pts = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in upper + lower[::-1])
    y95 = sy(0.95)
    return f"""<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">
<rect width="{width}" height="{height}" fill="white"/>
<polygon points="{band_pts}" fill="#4477aa" fill-opacity="0.25" stroke="none"/>
<polyline points="{mean_pts}" fill="none" stroke="#4477aa" stroke-width="2"/>
<line x1="{pad}" y1="{y95:.1f}" x2="{width - pad}" y2="{y95:.1f}" stroke="#888" stroke-dasharray="5,4"/>
<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>
<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>
<text x="{width // 2}" y="{height - 12}" text-anchor="middle" font-size="13">path length (m), max {x_max:.1f}</text>
<text x="16" y="{height // 2}" transform="rotate(-90 16 {height // 2})" text-anchor="middle" font-size="13">coverage</text>
<text x="{width // 2}" y="24" text-anchor="middle" font-size="14">{title}</text>
</svg>
"""
