"""Synthetic arrival generation.

Normal arrivals are drawn from one intensity realization by thinning:
uniform candidates on [0, L] are accepted with probability
λ(cell)/max λ until the target count is reached.  Commission outliers come
from a homogeneous Poisson process.
"""
from __future__ import annotations

import numpy as np

from .arrivals import ArrivalSet
from .errors import InvalidArgumentError, NumericalError
from .gp import IntensityField
from .grid import SpatialGrid, integrate, locate_cells

MAX_CANDIDATES = 10_000_000
COUNT_MODES = ("expected", "poisson")


def target_count(realization: IntensityField, rng: np.random.Generator,
                 mode: str = "expected", duration: float = 1.0) -> int:
    expected = integrate(realization.grid, realization.values) * duration
    if mode == "expected":
        return int(round(expected))
    if mode == "poisson":
        return int(rng.poisson(expected))
    raise InvalidArgumentError(f"count mode must be one of {COUNT_MODES}, got {mode!r}")


def sample_normal_arrivals(realization: IntensityField, rng: np.random.Generator,
                           count: int | None = None, mode: str = "expected",
                           duration: float = 1.0) -> ArrivalSet:
    grid = realization.grid
    if count is None:
        count = target_count(realization, rng, mode, duration)
    if count < 0:
        raise InvalidArgumentError("arrival count must be nonnegative")
    if count == 0:
        return ArrivalSet.empty(grid.length_km)
    peak = float(realization.values.max())
    if peak <= 0:
        raise InvalidArgumentError("cannot place arrivals: intensity is zero everywhere")
    accept_prob = realization.values / peak
    mean_accept = float(accept_prob.mean())

    accepted = []
    n_accepted = 0
    drawn = 0
    while n_accepted < count:
        if drawn >= MAX_CANDIDATES:
            raise NumericalError(
                f"thinning drew {drawn} candidates but accepted only {n_accepted} of {count}",
                candidates=drawn, accepted=n_accepted,
            )
        need = count - n_accepted
        batch = min(int(1.2 * need / mean_accept) + 16, MAX_CANDIDATES - drawn)
        cand = rng.uniform(0.0, grid.length_km, batch)
        u = rng.random(batch)
        keep = cand[u < accept_prob[locate_cells(grid, cand)]]
        drawn += batch
        keep = keep[:need]
        accepted.append(keep)
        n_accepted += keep.size
    pos = np.concatenate(accepted)
    return ArrivalSet(grid.length_km, pos, np.zeros(pos.size, dtype=bool))


def sample_uniform_outliers(rate_per_km: float, grid: SpatialGrid, rng: np.random.Generator,
                            unit_time: float = 1.0) -> ArrivalSet:
    if rate_per_km < 0 or unit_time <= 0:
        raise InvalidArgumentError("rate must be nonnegative and unit_time positive")
    n = int(rng.poisson(rate_per_km * grid.length_km * unit_time))
    pos = rng.uniform(0.0, grid.length_km, n)
    return ArrivalSet(grid.length_km, pos, np.ones(n, dtype=bool))


def merge(normal: ArrivalSet, outliers: ArrivalSet, rng: np.random.Generator) -> ArrivalSet:
    if abs(normal.length_km - outliers.length_km) > 1e-9 * max(normal.length_km, 1.0):
        raise InvalidArgumentError("cannot merge arrivals from different domains")
    if normal.is_outlier is None or outliers.is_outlier is None:
        raise InvalidArgumentError("merge requires labeled arrival sets")
    pos = np.concatenate([normal.positions, outliers.positions])
    lab = np.concatenate([normal.is_outlier, outliers.is_outlier])
    order = rng.permutation(pos.size)
    return ArrivalSet(normal.length_km, pos[order], lab[order])
