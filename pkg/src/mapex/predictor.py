"""Map prediction: occupancy-probability estimates over the unseen part of
a building, and the dynamic threshold that turns them into a trinary map.

The free cut-off ramps up with the observed fraction of the maximum plan
area: early in an episode almost nothing classifies as free (conservative
while evidence is thin), and once enough space has been observed the
cut-off saturates at its configured maximum.

Three reference predictors ship in-process (identity, ground-truth oracle,
morphological heuristic) and an external client speaks the byte-stream
protocol so trained models can plug in as a subprocess or TCP peer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .dynamics import Pose
from .floorplan import FloorPlan
from .grid import FREE, NON_FLIGHT, OCCUPIED, UNKNOWN, Grid2D
from .protocol import (DEFAULT_TIMEOUT_S, ExternalPredictorClient,
                       make_endpoint)


@dataclass
class ThresholdConfig:
    occupied_cutoff: float = 0.94
    free_cutoff_max: float = 0.04
    ramp_gain: float = 10.0
    ramp_power: float = 4.0
    max_plan_cells: int = 5775

    def __post_init__(self):
        if not 0.0 < self.free_cutoff_max < self.occupied_cutoff < 1.0:
            raise ValueError("need 0 < free_cutoff_max < occupied_cutoff < 1")
        if self.max_plan_cells < 1:
            raise ValueError("max_plan_cells must be positive")


@dataclass
class ProbabilityMap:
    """Per-cell occupancy probabilities aligned with an ego map (same
    shape, resolution and origin as the grid the prediction came from)."""

    cells: np.ndarray
    resolution_m: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.float64)
        if self.cells.ndim != 2:
            raise ValueError("probability map must be 2-D")
        if self.cells.size and (self.cells.min() < 0.0 or self.cells.max() > 1.0):
            raise ValueError("probabilities must lie in [0, 1]")


def free_cutoff(observed_cells: int, config: ThresholdConfig) -> float:
    """Free cut-off for a given observed coarse-cell count."""
    if observed_cells < 0:
        raise ValueError("observed_cells must be non-negative")
    frac = min(1.0, observed_cells / config.max_plan_cells)
    ramp = min(1.0, config.ramp_gain * frac ** config.ramp_power)
    return config.free_cutoff_max * ramp


def dynamic_threshold(prob: ProbabilityMap, observed_cells: int,
                      config: ThresholdConfig) -> Grid2D:
    """Convert probabilities to the trinary map: strictly below the ramped
    free cut-off is free, strictly above the occupied cut-off is occupied,
    everything else unknown."""
    t_f = free_cutoff(observed_cells, config)
    p = prob.cells
    cells = np.zeros(p.shape, dtype=np.int8)
    cells[p < t_f] = FREE
    cells[p > config.occupied_cutoff] = OCCUPIED
    return Grid2D(cells, prob.resolution_m, prob.origin)


_TRINARY_PROBS = {FREE: 0.0, UNKNOWN: 0.5, OCCUPIED: 1.0, NON_FLIGHT: 1.0}


class IdentityPredictor:
    """Echoes the observation: free 0.0, unknown 0.5, occupied 1.0."""

    def predict(self, ego_low: Grid2D, pose: Pose | None = None) -> ProbabilityMap:
        p = np.full(ego_low.cells.shape, 0.5)
        p[ego_low.cells == FREE] = 0.0
        occ = (ego_low.cells == OCCUPIED) | (ego_low.cells == NON_FLIGHT)
        p[occ] = 1.0
        return ProbabilityMap(p, ego_low.resolution_m, ego_low.origin)

    def close(self) -> None:
        pass


class OraclePredictor:
    """Renders the ground-truth plan into the ego frame: occupied 1.0,
    interior free 0.0, exterior 0.5. Useful for validating everything
    downstream of prediction."""

    def __init__(self, plan: FloorPlan):
        self.plan = plan

    def predict(self, ego_low: Grid2D, pose: Pose | None = None) -> ProbabilityMap:
        if pose is None:
            raise ValueError("oracle predictor needs the robot pose")
        h, w = ego_low.cells.shape
        c0r, c0c = h // 2, w // 2
        res = ego_low.resolution_m
        dx = (np.arange(w) - c0c)[None, :] * res
        dy = (np.arange(h) - c0r)[:, None] * res
        cosy, siny = np.cos(pose.yaw), np.sin(pose.yaw)
        wx = pose.x + cosy * dx - siny * dy
        wy = pose.y + siny * dx + cosy * dy
        cols = np.floor(wx / self.plan.resolution_m).astype(np.int64)
        rows = np.floor(wy / self.plan.resolution_m).astype(np.int64)
        inb = ((rows >= 0) & (rows < self.plan.height)
               & (cols >= 0) & (cols < self.plan.width))
        p = np.full((h, w), 0.5)
        r, c = rows[inb], cols[inb]
        interior = self.plan.interior_mask[r, c]
        vals = np.where(self.plan.grid[r, c] == OCCUPIED, 1.0,
                        np.where(interior, 0.0, 0.5))
        p[inb] = vals
        return ProbabilityMap(p, res, ego_low.origin)

    def close(self) -> None:
        pass


class HeuristicPredictor:
    """Structure-completion heuristic, no learning involved.

    Observed walls are morphologically closed (sub-door gaps read as wall),
    and the rectangular hull of the closed walls is completed as a guessed
    building outline. Emits only {0.02, 0.5, 0.97}.
    """

    wall_p = 0.97
    free_p = 0.02

    def predict(self, ego_low: Grid2D, pose: Pose | None = None) -> ProbabilityMap:
        cells = ego_low.cells
        occ = (cells == OCCUPIED) | (cells == NON_FLIGHT)
        free = cells == FREE
        p = np.full(cells.shape, 0.5)
        if occ.any():
            closed = ndimage.binary_closing(occ, structure=np.ones((3, 3)))
            closed |= occ
            rows = np.nonzero(closed.any(axis=1))[0]
            cols = np.nonzero(closed.any(axis=0))[0]
            r0, r1 = rows[0], rows[-1]
            c0, c1 = cols[0], cols[-1]
            hull = np.zeros_like(closed)
            hull[r0, c0:c1 + 1] = True
            hull[r1, c0:c1 + 1] = True
            hull[r0:r1 + 1, c0] = True
            hull[r0:r1 + 1, c1] = True
            walls = closed | (hull & ~free)
            p[walls] = self.wall_p
            p[free & ~walls] = self.free_p
        else:
            p[free] = self.free_p
        return ProbabilityMap(p, ego_low.resolution_m, ego_low.origin)

    def close(self) -> None:
        pass


class ExternalPredictor:
    """Bridges to an external predictor over the byte-stream protocol."""

    def __init__(self, endpoint, timeout_s: float = DEFAULT_TIMEOUT_S):
        self.client = ExternalPredictorClient(endpoint, timeout_s)

    def predict(self, ego_low: Grid2D, pose: Pose | None = None) -> ProbabilityMap:
        cells = ego_low.cells.copy()
        cells[cells == NON_FLIGHT] = OCCUPIED  # the wire format is trinary
        probs = self.client.predict_cells(cells)
        return ProbabilityMap(probs.astype(np.float64), ego_low.resolution_m,
                              ego_low.origin)

    def close(self) -> None:
        self.client.close()


def make_predictor(name: str, plan: FloorPlan | None = None,
                   timeout_s: float = DEFAULT_TIMEOUT_S):
    """Build a predictor from a CLI-style name: ``identity``, ``oracle``,
    ``heuristic``, ``external:<command>`` or ``tcp:<host>:<port>``."""
    if name == "identity":
        return IdentityPredictor()
    if name == "oracle":
        if plan is None:
            raise ValueError("oracle predictor needs the ground-truth plan")
        return OraclePredictor(plan)
    if name == "heuristic":
        return HeuristicPredictor()
    if name.startswith(("external:", "tcp:")):
        return ExternalPredictor(make_endpoint(name), timeout_s)
    raise ValueError(f"unknown predictor: {name!r}")
