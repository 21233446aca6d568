"""The exploration environment: reset/step semantics, observation assembly,
reward, termination and trace recording.

Each step applies one discrete action, checks ground-truth collision at the
new pose and at its deceleration successor, integrates a scan, refreshes
the prediction, and pays

    reward = -1 + (-penalty          if collision
                   scale * delta_f1  otherwise)

so rewards telescope: over a collision-free episode their sum equals
``-steps + scale * (f1_final - f1_initial)``.

Episodes are bit-reproducible: the plan, the configuration (seeds included)
and the action sequence fully determine the trace.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dynamics import HOVER, MotionTable, Pose, apply_action, check_collision, wrap_angle
from .floorplan import FloorPlan
from .grid import FREE, UNKNOWN, Grid2D
from .metrics import coverage, f1_score
from .occupancy import (EgoTransformSpec, HierarchicalMap, LogOddsConfig,
                        ego_to_world, ego_transform, inflate)
from .predictor import ThresholdConfig, dynamic_threshold
from .sensor import SensorConfig, sense

TERMINAL_COVERAGE = "coverage"
TERMINAL_COLLISION = "collision"
TERMINAL_MAX_STEPS = "max_steps"
TERMINAL_EXPLORATION_COMPLETE = "exploration_complete"
TERMINAL_ERROR = "error"


@dataclass
class EpisodeConfig:
    collision_penalty: float = 10.0
    reward_scale: float = 100.0
    coverage_target: float = 0.95
    max_steps: int = 2000
    sensor: SensorConfig = field(default_factory=SensorConfig)
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    log_odds: LogOddsConfig = field(default_factory=LogOddsConfig)
    robot_radius_m: float = 0.3
    rng_seed: int = 0
    start: tuple[float, float, float] | None = None
    coverage_source: str = "predicted"  # which coverage gates termination
    high_res_m: float = 0.05
    low_res_m: float = 0.2
    ego_size: tuple[int, int] = (237, 237)

    def __post_init__(self):
        if self.collision_penalty <= 0 or self.reward_scale <= 0:
            raise ValueError("penalty and reward scale must be positive")
        if not 0.0 < self.coverage_target <= 1.0:
            raise ValueError("coverage_target must be in (0, 1]")
        if self.coverage_source not in ("predicted", "observed"):
            raise ValueError("coverage_source must be 'predicted' or 'observed'")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass
class Observation:
    """What a policy sees: the inflated fine ego map, the inflated
    thresholded-prediction ego map, and the previous action."""

    high_ego: Grid2D
    pred_ego: Grid2D
    last_action: int


@dataclass
class StepRow:
    step: int
    x: float
    y: float
    yaw: float
    action: int
    reward: float
    collision: bool
    coverage: float
    f1: float
    path_m: float


_CSV_FIELDS = ("step", "x", "y", "yaw", "action", "reward", "collision",
               "coverage", "f1", "path_m")


@dataclass
class EpisodeRecord:
    """Per-step trace of one episode plus its terminal reason."""

    rows: list[StepRow] = field(default_factory=list)
    terminal_reason: str | None = None

    def path_at_coverage(self, target: float) -> float | None:
        for row in self.rows:
            if row.coverage >= target:
                return row.path_m
        return None

    @property
    def final(self) -> StepRow:
        return self.rows[-1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CSV_FIELDS)
            for r in self.rows:
                writer.writerow([r.step, repr(r.x), repr(r.y), repr(r.yaw),
                                 r.action, repr(r.reward), int(r.collision),
                                 repr(r.coverage), repr(r.f1), repr(r.path_m)])

    @classmethod
    def from_csv(cls, path) -> "EpisodeRecord":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != list(_CSV_FIELDS):
                raise ValueError(f"unexpected trace columns in {path}")
            for d in reader:
                rows.append(StepRow(int(d["step"]), float(d["x"]), float(d["y"]),
                                    float(d["yaw"]), int(d["action"]),
                                    float(d["reward"]), bool(int(d["collision"])),
                                    float(d["coverage"]), float(d["f1"]),
                                    float(d["path_m"])))
        return cls(rows)


def start_candidates(plan: FloorPlan, collision_grid: Grid2D) -> np.ndarray:
    """Interior cells a robot can legally start from (row-major order)."""
    valid = (collision_grid.cells == FREE) & plan.interior_mask
    return np.argwhere(valid)


def sample_start_pose(plan: FloorPlan, collision_grid: Grid2D,
                      rng: np.random.Generator) -> Pose:
    """Uniform start over collision-free interior cells, uniform heading."""
    candidates = start_candidates(plan, collision_grid)
    if len(candidates) == 0:
        raise ValueError("no collision-free interior cell to start from")
    row, col = candidates[int(rng.integers(len(candidates)))]
    x, y = collision_grid.center_of(int(row), int(col))
    yaw = wrap_angle(float(rng.uniform(-math.pi, math.pi)))
    return Pose(x, y, yaw)


class Episode:
    """One exploration run over one plan.

    Standard environment API: ``reset() -> observation`` then
    ``step(action) -> (observation, reward, done, info)``. Collision is
    checked against the ground truth inflated by the robot radius, both at
    the commanded pose and at its pure-deceleration successor.
    """

    def __init__(self, plan: FloorPlan, config: EpisodeConfig | None = None,
                 predictor=None, motion_table: MotionTable | None = None):
        from .predictor import IdentityPredictor
        self.plan = plan
        self.config = config or EpisodeConfig()
        self.predictor = predictor or IdentityPredictor()
        self.motion_table = motion_table or MotionTable.default()
        if abs(plan.resolution_m - self.config.low_res_m) > 1e-12:
            raise ValueError("plan resolution must equal the coarse map resolution")
        self._collision_grid = inflate(plan.to_grid(), self.config.robot_radius_m)
        self.record = EpisodeRecord()
        self.done = True
        self.pose: Pose | None = None

    # -- lifecycle ------------------------------------------------------------

    def reset(self) -> Observation:
        cfg = self.config
        rng = np.random.default_rng([cfg.rng_seed, 0])
        if cfg.start is not None:
            pose = Pose(*cfg.start)
            if check_collision(pose, self._collision_grid, cfg.robot_radius_m):
                raise ValueError(f"configured start pose {cfg.start} is in collision")
        else:
            pose = sample_start_pose(self.plan, self._collision_grid, rng)
        self.pose = pose
        self.maps = HierarchicalMap(
            self.plan.width * self.plan.resolution_m,
            self.plan.height * self.plan.resolution_m,
            high_res_m=cfg.high_res_m, low_res_m=cfg.low_res_m,
            config=cfg.log_odds)
        self.last_action = HOVER
        self.step_count = 0
        self.path_length_m = 0.0
        self.done = False
        self.terminal_reason: str | None = None
        self.record = EpisodeRecord()

        scan = sense(self.plan, pose, cfg.sensor, resolution_m=cfg.high_res_m, step=0)
        self.maps.integrate(pose, scan)
        self._refresh()
        if self._coverage() >= cfg.coverage_target:
            self._finish(TERMINAL_COVERAGE)
        self._append_row(HOVER, 0.0, False)
        return self.last_observation

    def step(self, action: int) -> tuple[Observation, float, bool, dict]:
        if self.done:
            raise RuntimeError("step() called on a finished episode")
        if not 0 <= action <= 5:
            raise ValueError(f"action {action} out of range 0..5")
        cfg = self.config
        previous = self.last_action
        new_pose = apply_action(self.pose, action, previous, self.motion_table)
        move, _ = self.motion_table.entry(action, previous)
        coast = apply_action(new_pose, HOVER, action, self.motion_table)
        collided = (check_collision(new_pose, self._collision_grid, cfg.robot_radius_m)
                    or check_collision(coast, self._collision_grid, cfg.robot_radius_m))

        self.pose = new_pose
        self.last_action = action
        self.step_count += 1
        self.path_length_m += move

        if collided:
            reward = -1.0 - cfg.collision_penalty
            self._finish(TERMINAL_COLLISION)
            self._append_row(action, reward, True)
            return self.last_observation, reward, True, self._info()

        scan = sense(self.plan, new_pose, cfg.sensor,
                     resolution_m=cfg.high_res_m, step=self.step_count)
        self.maps.integrate(new_pose, scan)
        prev_f1 = self.f1
        self._refresh()
        reward = -1.0 + cfg.reward_scale * (self.f1 - prev_f1)

        if self._coverage() >= cfg.coverage_target:
            self._finish(TERMINAL_COVERAGE)
        elif self.step_count >= cfg.max_steps:
            self._finish(TERMINAL_MAX_STEPS)
        self._append_row(action, reward, False)
        return self.last_observation, reward, self.done, self._info()

    def finish(self, reason: str) -> None:
        """Terminate externally (e.g. a planner reports exploration done)."""
        self._finish(reason)

    # -- state refresh ----------------------------------------------------------

    def _refresh(self) -> None:
        cfg = self.config
        pose = self.pose
        spec = EgoTransformSpec(pose, cfg.ego_size, UNKNOWN)

        low = self.maps.low_grid()
        observed = self.maps.observed_low_cells()
        low_ego = ego_transform(low, spec)
        prob = self.predictor.predict(low_ego, pose)
        thres_ego = dynamic_threshold(prob, observed, cfg.thresholds)
        pred_world = ego_to_world(thres_ego, spec, low)

        self.f1 = f1_score(pred_world, self.plan).f1
        self.coverage_predicted = coverage(pred_world, self.plan)
        known = self.maps.ever_known_mask() & self.plan.interior_mask
        self.coverage_observed = float(known.sum() / self.plan.interior_cell_count)

        high_inflated = inflate(self.maps.high_grid(), cfg.robot_radius_m)
        self.high_inflated = high_inflated
        self.observed_low = low
        self.predicted_world = pred_world
        self.last_observation = Observation(
            high_ego=ego_transform(high_inflated, spec),
            pred_ego=inflate(thres_ego, cfg.robot_radius_m),
            last_action=self.last_action)

    def _coverage(self) -> float:
        if self.config.coverage_source == "predicted":
            return self.coverage_predicted
        return self.coverage_observed

    def _finish(self, reason: str) -> None:
        self.done = True
        self.terminal_reason = reason
        self.record.terminal_reason = reason

    def _append_row(self, action: int, reward: float, collision: bool) -> None:
        self.record.rows.append(StepRow(
            self.step_count, self.pose.x, self.pose.y, self.pose.yaw,
            action, reward, collision, self._coverage(), self.f1,
            self.path_length_m))

    def _info(self) -> dict:
        return {
            "step": self.step_count,
            "coverage": self._coverage(),
            "coverage_observed": self.coverage_observed,
            "coverage_predicted": self.coverage_predicted,
            "f1": self.f1,
            "path_m": self.path_length_m,
            "terminal_reason": self.terminal_reason,
        }
