"""Procedural ground-truth floor plans.

A plan is a binary occupancy grid of a building interior: an axis-aligned
(possibly L- or T-shaped) perimeter, recursively partitioned into rooms by
straight walls, every shared wall pierced by a doorway at least as wide as
the configured minimum. Optional extras: free-standing internal rooms and
cabinet-like furniture blocks, both rasterised as occupied. The free
interior is always a single connected region.

Generation is a pure function of the configuration, including its seed.
Plans serialise to a binary PGM plus a key=value sidecar (see pgm module).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import pgm
from .grid import FREE, OCCUPIED, UNKNOWN, Grid2D

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


class GenerationError(RuntimeError):
    """Raised when no valid plan can be generated for a configuration."""


@dataclass
class FloorPlanConfig:
    max_width_m: float = 21.0
    max_height_m: float = 11.0
    resolution_m: float = 0.2
    min_door_width_m: float = 0.8
    min_room_dim_m: float = 2.0
    internal_room_prob: float = 0.2
    furniture_count_range: tuple[int, int] = (0, 6)
    rng_seed: int = 0

    def __post_init__(self):
        if self.resolution_m <= 0:
            raise ValueError("resolution must be positive")
        if self.max_width_m <= 0 or self.max_height_m <= 0:
            raise ValueError("plan bounds must be positive")
        if self.min_door_width_m / self.resolution_m < 1.0:
            raise ValueError("minimum door width must span at least one cell")
        if not 0.0 <= self.internal_room_prob <= 1.0:
            raise ValueError("internal_room_prob must be a probability")
        lo, hi = self.furniture_count_range
        if lo < 0 or hi < lo:
            raise ValueError("furniture_count_range must be a non-negative range")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")

    @property
    def grid_shape(self) -> tuple[int, int]:
        return (int(round(self.max_height_m / self.resolution_m)),
                int(round(self.max_width_m / self.resolution_m)))

    @property
    def door_cells(self) -> int:
        return int(math.ceil(self.min_door_width_m / self.resolution_m))

    @property
    def room_cells(self) -> int:
        return int(math.ceil(self.min_room_dim_m / self.resolution_m))


@dataclass
class FloorPlan:
    """Ground-truth occupancy of one building.

    ``grid`` holds FREE/OCCUPIED; cells outside ``interior_mask`` are
    exterior padding up to the configured maximum bounds. World origin
    convention: cell (0, 0) is centred at (res/2, res/2), so the grid
    covers [0, width*res] x [0, height*res].
    """

    grid: np.ndarray
    interior_mask: np.ndarray
    resolution_m: float
    rng_seed: int = 0

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.int8)
        self.interior_mask = np.asarray(self.interior_mask, dtype=bool)
        if self.grid.shape != self.interior_mask.shape:
            raise ValueError("grid and interior mask shapes differ")

    @property
    def interior_cell_count(self) -> int:
        return int(self.interior_mask.sum())

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    def to_grid(self) -> Grid2D:
        half = self.resolution_m / 2.0
        return Grid2D(self.grid.copy(), self.resolution_m, origin=(half, half))

    def occupancy(self, resolution_m: float | None = None) -> np.ndarray:
        """Boolean occupancy raster, optionally upsampled to a finer grid."""
        occ = self.grid == OCCUPIED
        if resolution_m is None or resolution_m == self.resolution_m:
            return occ
        factor = self.resolution_m / resolution_m
        if abs(factor - round(factor)) > 1e-9 or factor < 1:
            raise ValueError("target resolution must evenly divide the plan resolution")
        f = int(round(factor))
        return np.repeat(np.repeat(occ, f, axis=0), f, axis=1)


# ---------------------------------------------------------------------------
# generation


def generate_plan(config: FloorPlanConfig) -> FloorPlan:
    """Generate a floor plan; deterministic in the configuration seed."""
    h, w = config.grid_shape
    min_side = config.room_cells + 2
    if min(h, w) < max(min_side, 3):
        raise GenerationError(
            f"bounds {config.max_width_m}x{config.max_height_m} m cannot fit a "
            f"{config.min_room_dim_m} m room at {config.resolution_m} m resolution")
    rng = np.random.default_rng(config.rng_seed)
    for _ in range(50):
        built = _generate_once(config, rng)
        if built is None:
            continue
        occ, inside = built
        free = inside & ~occ
        if not free.any():
            continue
        if _connected(free) and _door_gaps_ok(occ, inside, config.door_cells):
            grid = np.where(occ, OCCUPIED, FREE).astype(np.int8)
            return FloorPlan(grid, inside, config.resolution_m, config.rng_seed)
    raise GenerationError(f"no valid plan after 50 attempts (seed {config.rng_seed})")


def _generate_once(config, rng):
    h, w = config.grid_shape
    room = config.room_cells
    door = config.door_cells

    inside, free_rects, seams = _sample_outline(rng, h, w, room)
    occ = inside & ~ndimage.binary_erosion(inside, structure=np.ones((3, 3)),
                                           border_value=0)
    # Walls accumulate during partitioning; doorways are carved only after
    # every wall exists, so no later wall can end up pinching a doorway.
    walls = []
    for s, bx0, bx1, lo, hi in seams:
        occ[s, bx0:bx1 + 1] = True
        walls.append((True, s, lo, hi))

    leaves = []
    for rect in free_rects:
        _partition(occ, rng, rect, room, door, leaves, walls)

    for wall in walls:
        if not _carve_door(occ, inside, rng, wall, door):
            return None

    for leaf in leaves:
        if rng.random() < config.internal_room_prob:
            _add_internal_room(occ, rng, leaf, room, door)

    _add_furniture(occ, inside, rng, config)

    if rng.random() < 0.5:
        occ, inside = occ[::-1].copy(), inside[::-1].copy()
    if rng.random() < 0.5:
        occ, inside = occ[:, ::-1].copy(), inside[:, ::-1].copy()
    return occ, inside


def _sample_outline(rng, h, w, room):
    """Choose the building outline: a rectangle, minus zero, one or two
    corner notches (L / T shapes). Returns the inside mask, the free
    rectangles to partition (inclusive bounds), and the seam walls between
    sections as (row, wall col span, door candidate col span)."""
    min_side = room + 2
    bh = int(rng.integers(max(min_side, (2 * h) // 3), h + 1))
    bw = int(rng.integers(max(min_side, (2 * w) // 3), w + 1))
    y0 = int(rng.integers(0, h - bh + 1))
    x0 = int(rng.integers(0, w - bw + 1))
    y_top = y0 + bh - 1
    x_rgt = x0 + bw - 1

    inside = np.zeros((h, w), dtype=bool)
    inside[y0:y0 + bh, x0:x0 + bw] = True

    draw = rng.random()
    want_t = draw < 0.2 and bw >= 3 * min_side and bh >= 2 * min_side
    want_l = draw < 0.5 and bw >= 2 * min_side and bh >= 2 * min_side

    if not (want_t or want_l):
        return inside, [(y0 + 1, x0 + 1, y_top - 1, x_rgt - 1)], []

    # Horizontal seam wall at row s splits a bottom section from a narrower
    # top section; the corner notches above the seam become exterior.
    s = int(rng.integers(y0 + room + 1, y0 + bh - room - 1))
    if want_t:
        nw1 = int(rng.integers(min_side, bw - 2 * min_side + 1))
        nw2 = int(rng.integers(min_side, bw - nw1 - min_side + 1))
        inside[s + 1:y_top + 1, x0:x0 + nw1] = False
        inside[s + 1:y_top + 1, x_rgt - nw2 + 1:x_rgt + 1] = False
        arm_c0, arm_c1 = x0 + nw1, x_rgt - nw2
    else:
        nw = int(rng.integers(min_side, bw - min_side + 1))
        side = rng.random() < 0.5
        if side:
            inside[s + 1:y_top + 1, x_rgt - nw + 1:x_rgt + 1] = False
            arm_c0, arm_c1 = x0, x_rgt - nw
        else:
            inside[s + 1:y_top + 1, x0:x0 + nw] = False
            arm_c0, arm_c1 = x0 + nw, x_rgt
    free_rects = [
        (y0 + 1, x0 + 1, s - 1, x_rgt - 1),
        (s + 1, arm_c0 + 1, y_top - 1, arm_c1 - 1),
    ]
    seams = [(s, x0, x_rgt, arm_c0 + 1, arm_c1 - 1)]
    return inside, free_rects, seams


def _partition(occ, rng, rect, room, door, leaves, walls):
    """Recursive axis-aligned splitting. Walls are drawn now and recorded;
    their doorways are carved in a later pass."""
    y0, x0, y1, x1 = rect
    h = y1 - y0 + 1
    w = x1 - x0 + 1
    if h <= 0 or w <= 0:
        return
    can_h = h >= 2 * room + 1 and w >= door
    can_v = w >= 2 * room + 1 and h >= door
    if not (can_h or can_v):
        leaves.append(rect)
        return
    span = max(h, w)
    p_split = 1.0 if span >= 3 * room else 0.8
    if rng.random() > p_split:
        leaves.append(rect)
        return
    if can_h and can_v:
        split_rows = h > w or (h == w and rng.random() < 0.5)
    else:
        split_rows = can_h
    if split_rows:
        wy = y0 + int(rng.integers(room, h - room))
        occ[wy, x0:x1 + 1] = True
        walls.append((True, wy, x0, x1))
        _partition(occ, rng, (y0, x0, wy - 1, x1), room, door, leaves, walls)
        _partition(occ, rng, (wy + 1, x0, y1, x1), room, door, leaves, walls)
    else:
        wx = x0 + int(rng.integers(room, w - room))
        occ[y0:y1 + 1, wx] = True
        walls.append((False, wx, y0, y1))
        _partition(occ, rng, (y0, x0, y1, wx - 1), room, door, leaves, walls)
        _partition(occ, rng, (y0, wx + 1, y1, x1), room, door, leaves, walls)


def _carve_door(occ, inside, rng, wall, door):
    """Open a doorway somewhere along a wall: the carved span must still be
    solid wall and both flanking strips must be completely clear, so a
    doorway never ends up beside the foot of a crossing wall (which would
    pinch the passage below the minimum width). False when no spot fits."""
    is_row, line, lo, hi = wall
    view = occ if is_row else occ.T
    inside_view = inside if is_row else inside.T
    if hi - lo + 1 < door:
        return False
    candidates = []
    for c in range(lo, hi - door + 2):
        span = slice(c, c + door)
        if not view[line, span].all():
            continue
        if view[line - 1, span].any() or view[line + 1, span].any():
            continue
        if not (inside_view[line - 1, span].all() and inside_view[line + 1, span].all()):
            continue
        candidates.append(c)
    if not candidates:
        return False
    c = candidates[int(rng.integers(0, len(candidates)))]
    view[line, c:c + door] = False
    return True


def _add_internal_room(occ, rng, leaf, room, door):
    """Place a wall-detached room inside a leaf, keeping a clearance of at
    least a door width to everything else; one doorway in its own wall."""
    y0, x0, y1, x1 = leaf
    inner = max(room, door)
    need = inner + 2 + 2 * door
    if y1 - y0 + 1 < need or x1 - x0 + 1 < need:
        return
    ih = int(rng.integers(inner + 2, y1 - y0 + 2 - 2 * door))
    iw = int(rng.integers(inner + 2, x1 - x0 + 2 - 2 * door))
    ry = int(rng.integers(y0 + door, y1 - door - ih + 2))
    rx = int(rng.integers(x0 + door, x1 - door - iw + 2))
    if occ[ry:ry + ih, rx:rx + iw].any():
        return
    occ[ry, rx:rx + iw] = True
    occ[ry + ih - 1, rx:rx + iw] = True
    occ[ry:ry + ih, rx] = True
    occ[ry:ry + ih, rx + iw - 1] = True
    side = int(rng.integers(0, 4))
    if side < 2:  # top / bottom wall
        wy = ry if side == 0 else ry + ih - 1
        dx = int(rng.integers(rx + 1, rx + iw - door))
        occ[wy, dx:dx + door] = False
    else:  # left / right wall
        wx = rx if side == 2 else rx + iw - 1
        dy = int(rng.integers(ry + 1, ry + ih - door))
        occ[dy:dy + door, wx] = False


def _add_furniture(occ, inside, rng, config):
    """Scatter cabinet-like occupied blocks, each kept at least a door
    width clear of every other obstacle so no passage is pinched."""
    lo, hi = config.furniture_count_range
    count = int(rng.integers(lo, hi + 1))
    door = config.door_cells
    h, w = occ.shape
    for _ in range(count):
        for _attempt in range(20):
            fh = int(rng.integers(1, 3))
            fw = int(rng.integers(2, 7))
            if rng.random() < 0.5:
                fh, fw = fw, fh
            if h - fh < 1 or w - fw < 1:
                continue
            y = int(rng.integers(0, h - fh))
            x = int(rng.integers(0, w - fw))
            cy0, cy1 = max(0, y - door), min(h, y + fh + door)
            cx0, cx1 = max(0, x - door), min(w, x + fw + door)
            block = np.s_[cy0:cy1, cx0:cx1]
            if occ[block].any() or not inside[block].all():
                continue
            occ[y:y + fh, x:x + fw] = True
            break


# ---------------------------------------------------------------------------
# validation


def _connected(free: np.ndarray) -> bool:
    _, n = ndimage.label(free, structure=_CROSS)
    return n == 1


def _door_gaps_ok(occ, inside, min_gap) -> bool:
    """Every maximal free run bounded by occupied cells on both ends, along
    any row or column, must span at least ``min_gap`` cells."""
    for occ_lines, in_lines in ((occ, inside), (occ.T, inside.T)):
        for occ_line, in_line in zip(occ_lines, in_lines):
            run = 0
            bounded_left = False
            for o, i in zip(occ_line, in_line):
                if not i:
                    run = 0
                    bounded_left = False
                elif o:
                    if bounded_left and 0 < run < min_gap:
                        return False
                    run = 0
                    bounded_left = True
                else:
                    run += 1
    return True


# ---------------------------------------------------------------------------
# serialisation


def save_plan(plan: FloorPlan, path) -> None:
    """Write a plan as binary PGM plus a ``<path>.meta`` sidecar."""
    path = Path(path)
    raw = pgm.encode_cells(plan.grid)
    raw[~plan.interior_mask] = pgm.STATE_TO_BYTE[UNKNOWN]  # exterior
    pgm.write_pgm(path, raw)
    pgm.write_sidecar(Path(str(path) + ".meta"), {
        "format": "floorplan-v1",
        "width": plan.width,
        "height": plan.height,
        "resolution_m": repr(plan.resolution_m),
        "rng_seed": plan.rng_seed,
        "interior_cells": plan.interior_cell_count,
    })


def load_plan(path) -> FloorPlan:
    path = Path(path)
    raw = pgm.read_pgm(path)
    meta = pgm.read_sidecar(Path(str(path) + ".meta"))
    bad = ~np.isin(raw, [0, 128, 255])
    if bad.any():
        raise ValueError(f"unknown cell encoding: {int(raw[bad].flat[0])}")
    if int(meta["width"]) != raw.shape[1] or int(meta["height"]) != raw.shape[0]:
        raise ValueError(f"dimension mismatch between image and sidecar: {path}")
    resolution = float(meta["resolution_m"])
    if resolution <= 0:
        raise ValueError(f"resolution mismatch: invalid resolution {resolution}")
    mask = raw != 128
    grid = np.where(raw == 0, OCCUPIED, FREE).astype(np.int8)
    plan = FloorPlan(grid, mask, resolution, int(meta.get("rng_seed", 0)))
    if "interior_cells" in meta and int(meta["interior_cells"]) != plan.interior_cell_count:
        raise ValueError(f"interior cell count mismatch in sidecar: {path}")
    return plan
