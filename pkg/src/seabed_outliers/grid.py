"""Uniform 1-D discretization of the monitored line segment.

All lengths are kilometres. Fields are stored at cell centres and integrated
with the midpoint rule, which is also the binning used for Poisson counts.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, OutOfDomainError

DEFAULT_LENGTH_KM = 13.0
DEFAULT_N_CELLS = 260


@dataclass(frozen=True)
class SpatialGrid:
    length_km: float
    n_cells: int
    cell_width: float = field(init=False)
    cell_centers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not np.isfinite(self.length_km) or self.length_km <= 0:
            raise InvalidArgumentError(f"length_km must be positive, got {self.length_km}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise InvalidArgumentError(f"n_cells must be an integer >= 2, got {self.n_cells}")
        object.__setattr__(self, "n_cells", int(self.n_cells))
        width = float(self.length_km) / self.n_cells
        centers = (np.arange(self.n_cells) + 0.5) * width
        centers.setflags(write=False)
        object.__setattr__(self, "cell_width", width)
        object.__setattr__(self, "cell_centers", centers)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.n_cells, self.cell_width)

    def __eq__(self, other):
        if not isinstance(other, SpatialGrid):
            return NotImplemented
        return self.length_km == other.length_km and self.n_cells == other.n_cells

    def __hash__(self):
        return hash((self.length_km, self.n_cells))


def make_grid(length_km: float = DEFAULT_LENGTH_KM, n_cells: int = DEFAULT_N_CELLS) -> SpatialGrid:
    return SpatialGrid(float(length_km), n_cells)


def integrate(grid: SpatialGrid, values) -> float:
    """Midpoint-rule integral of a cell-centred field over the whole domain."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_cells,):
        raise InvalidArgumentError(
            f"expected {grid.n_cells} values, got shape {values.shape}"
        )
    return float(np.sum(values) * grid.cell_width)


def locate_cells(grid: SpatialGrid, s) -> np.ndarray:
    """Vectorized `locate_cell`; s = L maps to the last cell."""
    s = np.asarray(s, dtype=float)
    bad = ~((s >= 0.0) & (s <= grid.length_km))
    if np.any(bad):
        offending = np.atleast_1d(s)[np.atleast_1d(bad)][0]
        raise OutOfDomainError(
            f"position {offending!r} km is outside [0, {grid.length_km}]"
        )
    idx = np.floor(s / grid.cell_width).astype(np.int64)
    return np.minimum(idx, grid.n_cells - 1)


def locate_cell(grid: SpatialGrid, s: float) -> int:
    return int(locate_cells(grid, s))
