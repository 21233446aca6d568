"""Discrete vehicle dynamics: the six-action control space, pose
integration and collision checking.

The effect of an action depends on the previous action (a proxy for the
vehicle's velocity state): a yaw command issued while flying forward still
carries residual forward displacement from deceleration. The per-pair
displacement and rotation live in a 6x6 lookup measured from recorded
vehicle motion; the table ships as a CSV fixture so the numbers are data,
not code.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .grid import NON_FLIGHT, OCCUPIED, Grid2D

HOVER = 0
TURN_RIGHT = 1
TURN_LEFT = 2
FORWARD = 3
FORWARD_RIGHT = 4
FORWARD_LEFT = 5
ACTION_COUNT = 6

ACTION_NAMES = ("hover", "turn_right", "turn_left", "forward",
                "forward_right", "forward_left")


def wrap_angle(a: float) -> float:
    """Normalise an angle to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class Pose:
    """Continuous robot state: world position in metres, yaw in radians."""

    x: float
    y: float
    yaw: float


@dataclass
class MotionTable:
    """6x6 lookup of (displacement m, rotation rad) indexed by
    [current action, previous action]."""

    move_m: np.ndarray
    rot_rad: np.ndarray

    def __post_init__(self):
        self.move_m = np.asarray(self.move_m, dtype=np.float64)
        self.rot_rad = np.asarray(self.rot_rad, dtype=np.float64)
        if self.move_m.shape != (6, 6) or self.rot_rad.shape != (6, 6):
            raise ValueError("motion table must be 6x6")
        if self.move_m[0, 0] != 0.0 or self.rot_rad[0, 0] != 0.0:
            raise ValueError("hover from rest must be a no-op")

    def entry(self, current: int, previous: int) -> tuple[float, float]:
        if not (0 <= current < ACTION_COUNT and 0 <= previous < ACTION_COUNT):
            raise ValueError(f"action ids must be in 0..5, got {current}, {previous}")
        return float(self.move_m[current, previous]), float(self.rot_rad[current, previous])

    @classmethod
    def from_csv(cls, path) -> "MotionTable":
        move = np.full((6, 6), np.nan)
        rot = np.full((6, 6), np.nan)
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                c = int(row["current"])
                p = int(row["previous"])
                move[c, p] = float(row["move_m"])
                rot[c, p] = float(row["rot_rad"])
        if np.isnan(move).any() or np.isnan(rot).any():
            raise ValueError(f"incomplete motion table: {path}")
        return cls(move, rot)

    @classmethod
    def default(cls) -> "MotionTable":
        ref = resources.files("mapex").joinpath("data/motion_table.csv")
        with resources.as_file(ref) as path:
            return cls.from_csv(path)


def apply_action(pose: Pose, current: int, previous: int,
                 table: MotionTable) -> Pose:
    """Advance a pose by one action.

    The vehicle rotates first, then translates along the new heading; both
    amounts come from the (current, previous) table entry.
    """
    move, rot = table.entry(current, previous)
    yaw = wrap_angle(pose.yaw + rot)
    return Pose(pose.x + move * math.cos(yaw),
                pose.y + move * math.sin(yaw),
                yaw)


def check_collision(pose: Pose, grid: Grid2D, robot_radius_m: float) -> bool:
    """True if the robot disc at ``pose`` is in collision on ``grid``.

    Collision means: any cell whose centre lies within ``robot_radius_m``
    of (x, y) is occupied, or the cell containing (x, y) is non-flight.
    Poses off the map count as collisions.
    """
    row, col = grid.cell_of(pose.x, pose.y)
    if not grid.in_bounds(row, col):
        return True
    if grid.cells[row, col] == NON_FLIGHT:
        return True
    r_cells = robot_radius_m / grid.resolution_m
    reach = int(math.floor(r_cells)) + 1
    r0 = max(0, row - reach)
    r1 = min(grid.height, row + reach + 1)
    c0 = max(0, col - reach)
    c1 = min(grid.width, col + reach + 1)
    if r0 >= r1 or c0 >= c1:
        return True
    window = grid.cells[r0:r1, c0:c1]
    rows = np.arange(r0, r1, dtype=np.float64)[:, None]
    cols = np.arange(c0, c1, dtype=np.float64)[None, :]
    cx = (pose.x - grid.origin[0]) / grid.resolution_m
    cy = (pose.y - grid.origin[1]) / grid.resolution_m
    within = (rows - cy) ** 2 + (cols - cx) ** 2 <= r_cells ** 2
    return bool(((window == OCCUPIED) & within).any())
