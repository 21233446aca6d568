"""Prediction quality and exploration coverage over building interiors.

Both scores ignore everything outside the interior mask. The F1 form used
throughout rewards correctly predicted occupied cells and penalises every
interior cell that is predicted wrongly (unknown counts as wrong):

    f1 = TP / (TP + 0.5 * (N - T))

with TP the correctly predicted occupied cells, T all correctly predicted
cells (free + occupied) and N the interior cell count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .floorplan import FloorPlan
from .grid import FREE, OCCUPIED, Grid2D


@dataclass
class PredictionScore:
    true_occupied: int
    correct_total: int
    interior_cells: int
    f1: float


def _check_aligned(predicted: Grid2D, truth: FloorPlan) -> None:
    if predicted.cells.shape != truth.grid.shape:
        raise ValueError(f"shape mismatch: {predicted.cells.shape} vs {truth.grid.shape}")
    if abs(predicted.resolution_m - truth.resolution_m) > 1e-12:
        raise ValueError("resolution mismatch between prediction and truth")


def f1_score(predicted: Grid2D, truth: FloorPlan) -> PredictionScore:
    """Score a world-frame trinary map against the ground truth.

    Ego-centric maps must be resampled back to the world frame first (see
    occupancy.ego_to_world) so the score does not depend on the viewpoint.
    """
    _check_aligned(predicted, truth)
    interior = truth.interior_mask
    pred = predicted.cells
    tp = int(((pred == OCCUPIED) & (truth.grid == OCCUPIED) & interior).sum())
    tf = int(((pred == FREE) & (truth.grid == FREE) & interior).sum())
    t = tp + tf
    n = int(interior.sum())
    f1 = 0.0 if tp == 0 else tp / (tp + 0.5 * (n - t))
    return PredictionScore(tp, t, n, f1)


def coverage(grid: Grid2D, truth: FloorPlan) -> float:
    """Fraction of interior cells classified free or occupied."""
    _check_aligned(grid, truth)
    known = (grid.cells == FREE) | (grid.cells == OCCUPIED)
    n = truth.interior_cell_count
    if n == 0:
        raise ValueError("plan has no interior cells")
    return float((known & truth.interior_mask).sum() / n)
