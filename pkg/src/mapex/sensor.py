"""Planar range sensing against a ground-truth floor plan.

Rays are spread uniformly across the field of view, marched at a tenth of
a cell per sample, and stop at the first occupied sample. Sensing noise
follows an adjacency model: whenever a cell is detected as occupied, each
of its eight neighbours is independently reported occupied as well with a
fixed probability. Results are deterministic given the seed and the step
index, so whole episodes replay bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Pose
from .floorplan import FloorPlan

_NEIGHBORS_8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1),
                (0, 1), (1, -1), (1, 0), (1, 1))


@dataclass
class SensorConfig:
    fov_rad: float = 1.518
    max_range_m: float = 5.0
    ray_count: int = 174
    adjacent_occupied_prob: float = 0.05
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.fov_rad <= 2.0 * math.pi:
            raise ValueError("fov must be in (0, 2*pi]")
        if self.ray_count < 1:
            raise ValueError("ray_count must be >= 1")
        if not 0.0 <= self.adjacent_occupied_prob <= 1.0:
            raise ValueError("adjacent_occupied_prob must be a probability")
        if self.max_range_m <= 0:
            raise ValueError("max_range_m must be positive")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")


@dataclass
class ScanResult:
    """One scan in a fixed raster: per-ray hit flag, hit cell and ordered
    traversed cells, plus the noise-injected extra occupied cells."""

    resolution_m: float
    hit: np.ndarray                 # (rays,) bool
    hit_cells: np.ndarray           # (rays, 2) row/col, -1 where no hit
    traversed: list[np.ndarray]     # per ray: (n, 2) row/col, first-visit order
    noise_cells: np.ndarray         # (k, 2) row/col, may repeat

    def all_hit_cells(self) -> np.ndarray:
        return self.hit_cells[self.hit]


def ray_angles(config: SensorConfig, yaw: float) -> np.ndarray:
    """World angles of each ray, spread uniformly across the field of view
    centred on ``yaw`` (end rays inclusive)."""
    k = config.ray_count
    if k == 1:
        return np.array([yaw])
    half = config.fov_rad / 2.0
    return yaw + np.linspace(-half, half, k)


def sense(plan: FloorPlan, pose: Pose, config: SensorConfig,
          resolution_m: float | None = None, step: int = 0) -> ScanResult:
    """Cast one scan from ``pose`` against the plan's occupancy.

    ``resolution_m`` selects the raster the scan is expressed in (the plan
    resolution by default; a finer raster must divide it evenly). ``step``
    keys the noise stream so repeated calls inside an episode draw fresh
    but reproducible noise.
    """
    res = plan.resolution_m if resolution_m is None else resolution_m
    occ = plan.occupancy(res)
    h, w = occ.shape

    pr = int(math.floor(pose.y / res))
    pc = int(math.floor(pose.x / res))
    if not (0 <= pr < h and 0 <= pc < w):
        raise ValueError("sensor pose outside the map")
    if occ[pr, pc]:
        raise ValueError("sensing from inside obstacle")

    angles = ray_angles(config, pose.yaw)
    step_m = res / 10.0
    n_steps = int(math.ceil(config.max_range_m / step_m))
    ts = np.arange(n_steps + 1) * step_m
    xs = pose.x + ts[None, :] * np.cos(angles)[:, None]
    ys = pose.y + ts[None, :] * np.sin(angles)[:, None]
    cols = np.floor(xs / res).astype(np.int64)
    rows = np.floor(ys / res).astype(np.int64)
    inb = (rows >= 0) & (rows < h) & (cols >= 0) & (cols < w)

    occ_samples = np.zeros(rows.shape, dtype=bool)
    occ_samples[inb] = occ[rows[inb], cols[inb]]

    keys = np.where(inb, rows * w + cols, np.int64(-1))
    k = config.ray_count
    hit = occ_samples.any(axis=1)
    first_hit = np.where(hit, np.argmax(occ_samples, axis=1), n_steps + 1)
    hit_cells = np.full((k, 2), -1, dtype=np.int64)
    hit_keys = keys[np.arange(k)[hit], first_hit[hit]]
    hit_cells[hit, 0] = hit_keys // w
    hit_cells[hit, 1] = hit_keys % w

    # A straight ray never revisits a cell, so first-visit order equals
    # consecutive deduplication of the sample stream.
    changed = np.ones(keys.shape, dtype=bool)
    changed[:, 1:] = keys[:, 1:] != keys[:, :-1]
    take = changed & inb & (np.arange(n_steps + 1)[None, :] < first_hit[:, None])
    flat = keys[take]
    cells_rc = np.stack([flat // w, flat % w], axis=1)
    bounds = np.concatenate([[0], np.cumsum(take.sum(axis=1))])
    traversed = [cells_rc[bounds[i]:bounds[i + 1]] for i in range(k)]

    noise = _adjacency_noise(occ.shape, hit_cells[hit], config, step)
    return ScanResult(res, hit, hit_cells, traversed, noise)


def _adjacency_noise(shape, hit_cells, config, step):
    """8-neighbours of each detected-occupied cell, each independently
    reported occupied with the configured probability. Draw order is fixed
    (hit cells sorted, neighbours row-major) for reproducibility."""
    p = config.adjacent_occupied_prob
    if p <= 0.0 or not len(hit_cells):
        return np.empty((0, 2), dtype=np.int64)
    h, w = shape
    rng = np.random.default_rng([config.rng_seed, step])
    unique_keys = np.unique(hit_cells[:, 0] * w + hit_cells[:, 1])
    centers = np.stack([unique_keys // w, unique_keys % w], axis=1)
    draws = rng.random((len(centers), 8))
    offsets = np.array(_NEIGHBORS_8, dtype=np.int64)
    neighbors = centers[:, None, :] + offsets[None, :, :]
    ok = ((draws < p)
          & (neighbors[:, :, 0] >= 0) & (neighbors[:, :, 0] < h)
          & (neighbors[:, :, 1] >= 0) & (neighbors[:, :, 1] < w))
    return neighbors[ok]
