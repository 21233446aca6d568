"""Grid primitives shared by mapping, sensing, planning and scoring.

Cell arrays are int8 numpy arrays over four states. The trinary subset
{free, unknown, occupied} is coded {-1, 0, +1} so thresholded prediction
maps can live in the same arrays; NON_FLIGHT marks the inflation band
around obstacles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FREE = -1
UNKNOWN = 0
OCCUPIED = 1
NON_FLIGHT = 2

CELL_STATES = (FREE, UNKNOWN, OCCUPIED, NON_FLIGHT)

# Tie-break severity for nearest-neighbour resampling: when a sample point
# lands exactly on a cell boundary the more dangerous state wins, so
# obstacles cannot vanish under rotation. Index by state + 1.
TIE_SEVERITY = np.array([0, 1, 3, 2], dtype=np.int8)


@dataclass
class Grid2D:
    """Resolution-tagged 2-D cell array.

    ``origin`` is the world (x, y) of the centre of cell (0, 0); x runs
    along columns, y along rows. Cell (row, col) covers the square of side
    ``resolution_m`` centred on ``center_of(row, col)``.
    """

    cells: np.ndarray
    resolution_m: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.int8)
        if self.cells.ndim != 2:
            raise ValueError("cells must be a 2-D array")
        if self.resolution_m <= 0:
            raise ValueError("resolution must be positive")

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Cell containing world point (x, y); may lie out of bounds."""
        col = int(np.floor((x - self.origin[0]) / self.resolution_m + 0.5))
        row = int(np.floor((y - self.origin[1]) / self.resolution_m + 0.5))
        return row, col

    def cells_of(self, xs, ys):
        """Vectorised cell_of for arrays of world coordinates."""
        res = self.resolution_m
        cols = np.floor((np.asarray(xs, dtype=np.float64) - self.origin[0]) / res + 0.5)
        rows = np.floor((np.asarray(ys, dtype=np.float64) - self.origin[1]) / res + 0.5)
        return rows.astype(np.int64), cols.astype(np.int64)

    def center_of(self, row: int, col: int) -> tuple[float, float]:
        return (self.origin[0] + col * self.resolution_m,
                self.origin[1] + row * self.resolution_m)

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width

    def copy(self) -> "Grid2D":
        return Grid2D(self.cells.copy(), self.resolution_m, self.origin)


def states_severity(states: np.ndarray) -> np.ndarray:
    """Map cell states to their tie-break severity (higher = worse)."""
    return TIE_SEVERITY[np.asarray(states, dtype=np.int64) + 1]
