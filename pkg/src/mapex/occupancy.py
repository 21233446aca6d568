"""Observed occupancy maps: log-odds accumulation, the two-level map stack,
obstacle inflation and ego-centric resampling.

The robot maintains a fine map for collision-relevant detail and a coarse
map for prediction and decision making. Scans update the fine map through
clamped log-odds; the coarse map is a per-block projection of the fine
classification (any occupied block cell makes the coarse cell occupied).
Ego-centric views re-express a map in the robot frame: the robot sits at
the centre cell with its heading along the +x axis of the output grid, and
everything outside the source map pads as unknown.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .dynamics import Pose
from .grid import (FREE, NON_FLIGHT, OCCUPIED, UNKNOWN, Grid2D,
                   states_severity)
from .sensor import ScanResult

_TIE_EPS = 1e-9


@dataclass
class LogOddsConfig:
    """Evidence increments and decision thresholds for log-odds mapping.

    A cell classifies free below ``free_threshold`` and occupied above
    ``occupied_threshold``; the band between the two is unknown, which
    gives the classification a little hysteresis around the prior.
    """

    hit: float = 0.85
    miss: float = -0.4
    clamp: float = 3.5
    occupied_threshold: float = 0.12
    free_threshold: float = -0.12

    def __post_init__(self):
        if self.hit <= 0 or self.miss >= 0:
            raise ValueError("hit must be positive and miss negative")
        if self.clamp <= 0:
            raise ValueError("clamp must be positive")
        if not -self.clamp < self.free_threshold <= self.occupied_threshold < self.clamp:
            raise ValueError("decision thresholds must be ordered within the clamp")


class LogOddsGrid:
    """Per-cell log-odds accumulator behind one observed occupancy map."""

    def __init__(self, shape: tuple[int, int], resolution_m: float,
                 origin: tuple[float, float] = (0.0, 0.0),
                 config: LogOddsConfig | None = None):
        self.values = np.zeros(shape, dtype=np.float64)
        self.resolution_m = resolution_m
        self.origin = origin
        self.config = config or LogOddsConfig()

    @property
    def shape(self):
        return self.values.shape

    def classify(self) -> Grid2D:
        cfg = self.config
        cells = np.zeros(self.values.shape, dtype=np.int8)
        cells[self.values > cfg.occupied_threshold] = OCCUPIED
        cells[self.values < cfg.free_threshold] = FREE
        return Grid2D(cells, self.resolution_m, self.origin)


def integrate_scan(grid: LogOddsGrid, pose: Pose, scan: ScanResult) -> None:
    """Fold one scan into a log-odds map.

    Traversed cells take a miss update, hit and noise cells a hit update;
    each cell is updated at most once per scan, hits winning over misses.
    """
    if abs(scan.resolution_m - grid.resolution_m) > 1e-12:
        raise ValueError("scan raster resolution does not match the map")
    h, w = grid.shape
    pr = int(math.floor((pose.y - grid.origin[1]) / grid.resolution_m + 0.5))
    pc = int(math.floor((pose.x - grid.origin[0]) / grid.resolution_m + 0.5))
    if not (0 <= pr < h and 0 <= pc < w):
        raise ValueError("pose outside map bounds")

    hit_cells = [scan.all_hit_cells()]
    if len(scan.noise_cells):
        hit_cells.append(scan.noise_cells)
    hits = np.concatenate(hit_cells) if hit_cells else np.empty((0, 2), dtype=np.int64)
    hit_keys = np.unique(hits[:, 0] * w + hits[:, 1]) if len(hits) else np.empty(0, dtype=np.int64)

    if scan.traversed:
        trav = np.concatenate([t for t in scan.traversed if len(t)] or
                              [np.empty((0, 2), dtype=np.int64)])
    else:
        trav = np.empty((0, 2), dtype=np.int64)
    trav_keys = np.unique(trav[:, 0] * w + trav[:, 1]) if len(trav) else np.empty(0, dtype=np.int64)
    miss_keys = np.setdiff1d(trav_keys, hit_keys, assume_unique=True)

    cfg = grid.config
    flat = grid.values.reshape(-1)
    flat[hit_keys] = np.clip(flat[hit_keys] + cfg.hit, -cfg.clamp, cfg.clamp)
    flat[miss_keys] = np.clip(flat[miss_keys] + cfg.miss, -cfg.clamp, cfg.clamp)


def inflate(grid: Grid2D, radius_m: float) -> Grid2D:
    """Mark every free or unknown cell within ``radius_m`` of an occupied
    cell (centre-to-centre) as non-flight. Occupied cells are unchanged."""
    if radius_m < 0:
        raise ValueError("inflation radius must be non-negative")
    out = grid.copy()
    occ = grid.cells == OCCUPIED
    if not occ.any():
        return out
    r = radius_m / grid.resolution_m
    reach = int(math.floor(r))
    if reach < 1:
        return out
    span = np.arange(-reach, reach + 1)
    disc = (span[:, None] ** 2 + span[None, :] ** 2) <= r * r
    near = ndimage.binary_dilation(occ, structure=disc)
    out.cells[near & ~occ] = NON_FLIGHT
    return out


@dataclass
class EgoTransformSpec:
    """How to crop a map around the robot: output size (odd, so the robot
    is the exact centre cell), padding state, and the robot pose."""

    robot_pose: Pose
    out_size: tuple[int, int] = (237, 237)
    pad_value: int = UNKNOWN

    def __post_init__(self):
        h, w = self.out_size
        if h % 2 == 0 or w % 2 == 0:
            raise ValueError("ego output size must be odd in both dimensions")


def _sample_nearest(src: Grid2D, xs: np.ndarray, ys: np.ndarray,
                    pad_value: int) -> np.ndarray:
    """Nearest-cell lookup of world points with the conservative tie rule:
    points exactly on a cell boundary take the most severe neighbouring
    state (occupied > non-flight > unknown > free)."""
    res = src.resolution_m
    u = (xs - src.origin[0]) / res + 0.5
    v = (ys - src.origin[1]) / res + 0.5
    cols = np.floor(u).astype(np.int64)
    rows = np.floor(v).astype(np.int64)
    inb = (rows >= 0) & (rows < src.height) & (cols >= 0) & (cols < src.width)
    out = np.full(xs.shape, pad_value, dtype=np.int8)
    out[inb] = src.cells[rows[inb], cols[inb]]

    tie_u = np.abs(u - np.round(u)) < _TIE_EPS
    tie_v = np.abs(v - np.round(v)) < _TIE_EPS
    ties = np.nonzero(tie_u | tie_v)
    if len(ties[0]):
        for idx in zip(*ties):
            cands_r = {rows[idx]}
            cands_c = {cols[idx]}
            if tie_v[idx]:
                cands_r.add(int(np.round(v[idx])) - 1)
                cands_r.add(int(np.round(v[idx])))
            if tie_u[idx]:
                cands_c.add(int(np.round(u[idx])) - 1)
                cands_c.add(int(np.round(u[idx])))
            best = out[idx]
            best_sev = states_severity(np.array(best))
            for r in cands_r:
                for c in cands_c:
                    state = src.cells[r, c] if src.in_bounds(r, c) else pad_value
                    sev = states_severity(np.array(state))
                    if sev > best_sev:
                        best, best_sev = state, sev
            out[idx] = best
    return out


def ego_transform(grid: Grid2D, spec: EgoTransformSpec) -> Grid2D:
    """Re-express a map in the robot frame.

    The robot occupies the centre cell of the output and its heading points
    along +x (increasing column); regions outside the source map pad with
    ``spec.pad_value``. Sampling is nearest-neighbour at the source
    resolution, so a pure translation by whole cells and rotations by
    multiples of 90 degrees are exact index permutations.
    """
    h, w = spec.out_size
    c0r, c0c = h // 2, w // 2
    res = grid.resolution_m
    dx = (np.arange(w) - c0c)[None, :] * res
    dy = (np.arange(h) - c0r)[:, None] * res
    pose = spec.robot_pose
    cosy, siny = math.cos(pose.yaw), math.sin(pose.yaw)
    wx = pose.x + cosy * dx - siny * dy
    wy = pose.y + siny * dx + cosy * dy
    cells = _sample_nearest(grid, wx, wy, spec.pad_value)
    return Grid2D(cells, res, origin=(-c0c * res, -c0r * res))


def ego_to_world(ego: Grid2D, spec: EgoTransformSpec, template: Grid2D) -> Grid2D:
    """Resample an ego-centric map back onto a world-frame grid shaped like
    ``template`` (inverse of ego_transform, up to nearest-cell rounding)."""
    res = template.resolution_m
    xs = template.origin[0] + np.arange(template.width)[None, :] * res
    ys = template.origin[1] + np.arange(template.height)[:, None] * res
    xs, ys = np.broadcast_arrays(xs, ys)
    pose = spec.robot_pose
    dx = xs - pose.x
    dy = ys - pose.y
    cosy, siny = math.cos(pose.yaw), math.sin(pose.yaw)
    ex = cosy * dx + siny * dy
    ey = -siny * dx + cosy * dy
    cells = _sample_nearest(ego, ex, ey, spec.pad_value)
    return Grid2D(cells, res, template.origin)


def project_low_from_high(high: Grid2D, low_resolution_m: float) -> Grid2D:
    """Reduce a fine map to a coarse one.

    A coarse cell is occupied if any covered fine cell is occupied (non-
    flight counts as occupied), free if none is occupied and at least one
    is free, otherwise unknown. The coarse resolution must be an integer
    multiple of the fine one.
    """
    ratio = low_resolution_m / high.resolution_m
    if abs(ratio - round(ratio)) > 1e-9 or ratio < 1:
        raise ValueError("low resolution must be an integer multiple of high")
    k = int(round(ratio))
    cells = high.cells
    ph = (-cells.shape[0]) % k
    pw = (-cells.shape[1]) % k
    if ph or pw:
        cells = np.pad(cells, ((0, ph), (0, pw)), constant_values=UNKNOWN)
    blocks = cells.reshape(cells.shape[0] // k, k, cells.shape[1] // k, k)
    occ_any = ((blocks == OCCUPIED) | (blocks == NON_FLIGHT)).any(axis=(1, 3))
    free_any = (blocks == FREE).any(axis=(1, 3))
    out = np.zeros(occ_any.shape, dtype=np.int8)
    out[occ_any] = OCCUPIED
    out[~occ_any & free_any] = FREE
    origin = (high.origin[0] + (k - 1) / 2.0 * high.resolution_m,
              high.origin[1] + (k - 1) / 2.0 * high.resolution_m)
    return Grid2D(out, low_resolution_m, origin)


class HierarchicalMap:
    """The two observed maps of one episode, fed from the same scans.

    The fine map accumulates log-odds evidence; the coarse map is its
    block projection, refreshed after every scan. ``observed_low_cells``
    counts coarse cells that have ever classified as known, which makes
    the observed-space measure monotone even under sensing noise.
    """

    def __init__(self, width_m: float, height_m: float,
                 high_res_m: float = 0.05, low_res_m: float = 0.2,
                 config: LogOddsConfig | None = None):
        ratio = low_res_m / high_res_m
        if abs(ratio - round(ratio)) > 1e-9 or ratio < 1:
            raise ValueError("low resolution must be an integer multiple of high")
        k = int(round(ratio))
        lw = int(round(width_m / low_res_m))
        lh = int(round(height_m / low_res_m))
        self.low_res_m = low_res_m
        self.high = LogOddsGrid((lh * k, lw * k), high_res_m,
                                origin=(high_res_m / 2.0, high_res_m / 2.0),
                                config=config)
        self._ever_known = np.zeros((lh, lw), dtype=bool)
        self._high_grid: Grid2D | None = None
        self._low_grid: Grid2D | None = None

    def integrate(self, pose: Pose, scan: ScanResult) -> None:
        integrate_scan(self.high, pose, scan)
        self._high_grid = None
        self._low_grid = None

    def high_grid(self) -> Grid2D:
        if self._high_grid is None:
            self._high_grid = self.high.classify()
        return self._high_grid

    def low_grid(self) -> Grid2D:
        if self._low_grid is None:
            self._low_grid = project_low_from_high(self.high_grid(), self.low_res_m)
            self._ever_known |= self._low_grid.cells != UNKNOWN
        return self._low_grid

    def observed_low_cells(self) -> int:
        self.low_grid()
        return int(self._ever_known.sum())

    def ever_known_mask(self) -> np.ndarray:
        self.low_grid()
        return self._ever_known.copy()


def save_grid(grid: Grid2D, path) -> None:
    """Export an observed map in the shared PGM + sidecar format."""
    from . import pgm
    pgm.write_pgm(path, pgm.encode_cells(grid.cells))
    pgm.write_sidecar(str(path) + ".meta", {
        "format": "gridmap-v1",
        "width": grid.width,
        "height": grid.height,
        "resolution_m": repr(grid.resolution_m),
        "origin_x": repr(grid.origin[0]),
        "origin_y": repr(grid.origin[1]),
    })


def load_grid(path) -> Grid2D:
    from . import pgm
    raw = pgm.read_pgm(path)
    meta = pgm.read_sidecar(str(path) + ".meta")
    cells = pgm.decode_cells(raw)
    return Grid2D(cells, float(meta["resolution_m"]),
                  (float(meta.get("origin_x", 0.0)), float(meta.get("origin_y", 0.0))))
