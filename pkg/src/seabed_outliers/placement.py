"""Sensor placement for detecting commission outliers.

A sensor at a detects a target at s with probability
ρ·exp(-(a - s)²/σ_l).  The number of undetected outliers Λ1 over a horizon
is the miss-weighted integral of the λ1 field; the void probability
E[exp(-Λ1)] is approximated by exp(-E[Λ1])·(1 + Var[Λ1]/2), whose first two
moments follow from lognormal identities on the grid.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple

import numpy as np

from .errors import BudgetExceededError, InvalidArgumentError, NumericalError
from .gp import GaussianField
from .grid import SpatialGrid

log = logging.getLogger(__name__)

BRUTE_FORCE_BUDGET = 1_000_000


@dataclass(frozen=True)
class DetectionModel:
    rho: float = 0.98
    sigma_l: float = 0.05

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise InvalidArgumentError(f"rho must lie in [0, 1], got {self.rho}")
        if not self.sigma_l > 0:
            raise InvalidArgumentError(f"sigma_l must be positive, got {self.sigma_l}")


def gamma(s, a, model: DetectionModel):
    """Single-sensor detection probability; broadcasts over s and a."""
    d = np.subtract(a, s)
    out = model.rho * np.exp(-(d * d) / model.sigma_l)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SensorArray:
    positions: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1)
        if not np.all(np.isfinite(pos)):
            raise InvalidArgumentError("sensor positions must be finite")
        object.__setattr__(self, "positions", pos)

    def __len__(self):
        return self.positions.size

    @property
    def has_duplicates(self) -> bool:
        return np.unique(self.positions).size != self.positions.size


def _check_sensors(grid: SpatialGrid, sensors: SensorArray):
    p = sensors.positions
    if np.any(p < 0) or np.any(p > grid.length_km):
        raise InvalidArgumentError(f"sensor positions must lie in [0, {grid.length_km}]")
    if sensors.has_duplicates:
        log.warning("co-located sensors in %s; the λ1 estimate may be degenerate", p)


def miss_profile(grid: SpatialGrid, sensors: SensorArray, model: DetectionModel) -> np.ndarray:
    """Probability that every sensor misses a target at each cell centre."""
    _check_sensors(grid, sensors)
    s = grid.cell_centers
    if len(sensors) == 0:
        return np.ones(grid.n_cells)
    return np.prod(1.0 - gamma(s[None, :], sensors.positions[:, None], model), axis=0)


@dataclass(frozen=True)
class ObjectiveReport:
    expected_undetected: float
    variance: float
    objective: float
    horizon_ratio: float

    def as_dict(self) -> dict:
        return {
            "expected_undetected": self.expected_undetected,
            "variance": self.variance,
            "objective": self.objective,
            "horizon_ratio": self.horizon_ratio,
        }


class _MomentKernel:
    """Precomputed pieces of the E[Λ1] and Var[Λ1] formulas for one λ1 field."""

    def __init__(self, field_: GaussianField, horizon_ratio: float):
        if not horizon_ratio > 0:
            raise InvalidArgumentError("horizon ratio T/T_c must be positive")
        K = field_.cov
        v = np.diag(K)
        self.r = float(horizon_ratio)
        self.base = field_.grid.cell_width * np.exp(field_.mean + 0.5 * v)
        # Var = r² qᵀ (exp(K) - 1) q, the centred form of E[Λ²] - E[Λ]²
        self.excess = np.expm1(K)

    def moments(self, g: np.ndarray):
        """E[Λ1] and Var[Λ1] for miss profile(s) ``g`` of shape (..., N)."""
        q = g * self.base
        mean = self.r * q.sum(axis=-1)
        var = self.r ** 2 * np.einsum("...i,...i->...", q @ self.excess, q)
        return mean, var


def _objective(mean, var):
    var = np.asarray(var, dtype=float)
    if np.any(var < -1e-9):
        raise NumericalError(f"negative variance {float(np.min(var)):.3e} for Λ1",
                             variance=float(np.min(var)))
    var = np.maximum(var, 0.0)
    return np.exp(-mean) * (1.0 + 0.5 * var), var


def undetected_moments(lambda1: GaussianField, sensors: SensorArray, model: DetectionModel,
                       horizon_ratio: float = 1.0) -> ObjectiveReport:
    kern = _MomentKernel(lambda1, horizon_ratio)
    g = miss_profile(lambda1.grid, sensors, model)
    mean, var = kern.moments(g)
    obj, var = _objective(mean, var)
    return ObjectiveReport(float(mean), float(var), float(obj), float(horizon_ratio))


class MCEstimate(NamedTuple):
    value: float
    stderr: float


def void_probability_mc(lambda1: GaussianField, sensors: SensorArray, model: DetectionModel,
                        horizon_ratio: float = 1.0, n_samples: int = 10_000,
                        rng: np.random.Generator | None = None, chunk: int = 5_000,
                        return_samples: bool = False):
    """Monte Carlo estimate of E[exp(-Λ1)] over draws of the λ1 field."""
    if n_samples < 2:
        raise InvalidArgumentError("need at least two samples")
    rng = np.random.default_rng() if rng is None else rng
    grid = lambda1.grid
    wg = horizon_ratio * grid.cell_width * miss_profile(grid, sensors, model)
    totals = []
    remaining = n_samples
    while remaining:
        k = min(chunk, remaining)
        totals.append(np.exp(lambda1.sample_log(rng, k)) @ wg)
        remaining -= k
    totals = np.concatenate(totals)
    vals = np.exp(-totals)
    est = MCEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_samples)))
    return (est, totals) if return_samples else est


@dataclass
class PlacementResult:
    sensors: SensorArray
    report: ObjectiveReport
    trace: list = field(default_factory=list)

    def trace_dicts(self) -> list:
        return [dict(step=i, **r.as_dict()) for i, r in enumerate(self.trace)]


def _candidate_array(grid: SpatialGrid, candidates) -> np.ndarray:
    c = np.sort(np.asarray(candidates, dtype=float).reshape(-1))
    if np.any(c < 0) or np.any(c > grid.length_km):
        raise InvalidArgumentError("candidate locations must lie inside the domain")
    return c


def greedy_place(candidates, n_sensors: int, lambda1: GaussianField, model: DetectionModel,
                 horizon_ratio: float = 1.0) -> PlacementResult:
    """Add sensors one at a time, each maximizing the approximate void probability.

    Ties go to the smallest candidate position.  The trace holds the report
    for the empty network followed by one report per placed sensor.
    """
    grid = lambda1.grid
    cand = _candidate_array(grid, candidates)
    if n_sensors < 1 or n_sensors > cand.size:
        raise InvalidArgumentError(
            f"cannot place {n_sensors} sensors on {cand.size} candidate locations"
        )
    kern = _MomentKernel(lambda1, horizon_ratio)
    miss = 1.0 - gamma(grid.cell_centers[None, :], cand[:, None], model)

    g = np.ones(grid.n_cells)
    mean, var = kern.moments(g)
    obj, var = _objective(mean, var)
    trace = [ObjectiveReport(float(mean), float(var), float(obj), float(horizon_ratio))]
    available = np.ones(cand.size, dtype=bool)
    chosen = []
    for _ in range(n_sensors):
        G = g[None, :] * miss
        means, vars_ = kern.moments(G)
        objs, vars_ = _objective(means, vars_)
        objs = np.where(available, objs, -np.inf)
        best = int(np.argmax(objs))
        available[best] = False
        chosen.append(cand[best])
        g = G[best]
        trace.append(ObjectiveReport(float(means[best]), float(vars_[best]), float(objs[best]),
                                     float(horizon_ratio)))
    return PlacementResult(SensorArray(np.array(chosen)), trace[-1], trace)


def brute_force_place(candidates, n_sensors: int, lambda1: GaussianField, model: DetectionModel,
                      horizon_ratio: float = 1.0, budget: int = BRUTE_FORCE_BUDGET,
                      chunk: int = 2_048) -> PlacementResult:
    """Exhaustive search over all n_sensors-subsets of the candidates.

    Ties resolve to the lexicographically first subset of sorted positions.
    """
    grid = lambda1.grid
    cand = _candidate_array(grid, candidates)
    if n_sensors < 1 or n_sensors > cand.size:
        raise InvalidArgumentError(
            f"cannot place {n_sensors} sensors on {cand.size} candidate locations"
        )
    n_subsets = math.comb(cand.size, n_sensors)
    if n_subsets > budget:
        raise BudgetExceededError(
            f"{n_subsets} subsets exceed the brute-force budget of {budget}"
        )
    kern = _MomentKernel(lambda1, horizon_ratio)
    miss = 1.0 - gamma(grid.cell_centers[None, :], cand[:, None], model)

    best_obj = -np.inf
    best = None
    best_mv = None
    combos = combinations(range(cand.size), n_sensors)
    while True:
        block = np.array(list(_take(combos, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        G = np.prod(miss[block], axis=1)
        means, vars_ = kern.moments(G)
        objs, vars_ = _objective(means, vars_)
        i = int(np.argmax(objs))
        if objs[i] > best_obj:
            best_obj = float(objs[i])
            best = block[i]
            best_mv = (float(means[i]), float(vars_[i]))
    report = ObjectiveReport(best_mv[0], best_mv[1], best_obj, float(horizon_ratio))
    return PlacementResult(SensorArray(cand[best]), report, [report])


def _take(iterator, n):
    for _, item in zip(range(n), iterator):
        yield item


def write_sensors_csv(path, sensors: SensorArray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["order", "position_km"])
        for i, p in enumerate(sensors.positions):
            w.writerow([i, repr(float(p))])


def write_placement_json(path, result: PlacementResult, **extra) -> None:
    doc = {
        "sensors_km": [float(p) for p in result.sensors.positions],
        "final": result.report.as_dict(),
        "trace": result.trace_dicts(),
    }
    doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
