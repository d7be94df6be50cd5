"""Probability that an arrival at s is a commission outlier.

Three estimators of 1 - E[λ0/(λ0+λ1)]: a Monte Carlo average over posterior
draws of λ0, the mean-only plug-in, and the second-order Taylor correction
that adds λ1·σ0²/(μ0+λ1)³.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError
from .gp import GaussianField, IntensityField, IntensityStats
from .grid import SpatialGrid

MC_ORACLE = "mc_oracle"
MEAN_ONLY = "mean_only"
SECOND_ORDER = "second_order"
METHODS = (MC_ORACLE, MEAN_ONLY, SECOND_ORDER)


@dataclass(frozen=True)
class OutlierProbabilityCurve:
    """Per-cell outlier probability.

    ``raw`` keeps the unclamped estimator (the second-order form can leave
    [0, 1]); ``probabilities`` is the clamped copy used for classification.
    """

    grid: SpatialGrid
    method: str
    raw: np.ndarray
    stderr: Optional[np.ndarray] = None
    zero_mass_cells: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidArgumentError(f"unknown method {self.method!r}")
        raw = np.asarray(self.raw, dtype=float)
        if raw.shape != (self.grid.n_cells,):
            raise InvalidArgumentError("curve length does not match grid")
        object.__setattr__(self, "raw", raw)

    @property
    def probabilities(self) -> np.ndarray:
        return np.clip(self.raw, 0.0, 1.0)

    @property
    def clamped(self) -> np.ndarray:
        return (self.raw < 0.0) | (self.raw > 1.0)


def _lambda1_values(grid: SpatialGrid, lambda1) -> np.ndarray:
    if isinstance(lambda1, IntensityField):
        if lambda1.grid != grid:
            raise InvalidArgumentError("λ1 is defined on a different grid")
        return lambda1.values
    v = np.broadcast_to(np.asarray(lambda1, dtype=float), (grid.n_cells,))
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise InvalidArgumentError("λ1 must be finite and nonnegative")
    return v


def _check_stats(grid: SpatialGrid, stats: IntensityStats):
    if stats.mean.shape != (grid.n_cells,):
        raise InvalidArgumentError("intensity statistics do not match grid")


def p_outlier_mc(posterior: GaussianField, lambda1, n_samples: int = 10_000,
                 rng: np.random.Generator | None = None,
                 chunk: int = 2_000) -> OutlierProbabilityCurve:
    """Monte Carlo estimate of 1 - E[λ0/(λ0+λ1)] with per-cell standard errors."""
    if n_samples < 2:
        raise InvalidArgumentError("need at least two Monte Carlo samples")
    grid = posterior.grid
    lam1 = _lambda1_values(grid, lambda1)
    rng = np.random.default_rng() if rng is None else rng
    s1 = np.zeros(grid.n_cells)
    s2 = np.zeros(grid.n_cells)
    zero_mass = np.zeros(grid.n_cells, dtype=bool)
    remaining = n_samples
    while remaining:
        k = min(chunk, remaining)
        lam0 = np.exp(posterior.sample_log(rng, k))
        denom = lam0 + lam1[None, :]
        ok = denom > 0
        zero_mass |= ~ok.all(axis=0)
        # outlier share; defined as 0 where there is no event mass at all
        share = np.where(ok, lam1[None, :] / np.where(ok, denom, 1.0), 0.0)
        s1 += share.sum(axis=0)
        s2 += (share ** 2).sum(axis=0)
        remaining -= k
    mean = s1 / n_samples
    var = np.maximum(s2 / n_samples - mean ** 2, 0.0) * n_samples / (n_samples - 1)
    return OutlierProbabilityCurve(grid, MC_ORACLE, np.clip(mean, 0.0, 1.0),
                                   np.sqrt(var / n_samples), int(zero_mass.sum()))


def _mean_only_raw(mu0, lam1):
    denom = mu0 + lam1
    ok = denom > 0
    safe = np.where(ok, denom, 1.0)
    return np.where(ok, 1.0 - mu0 / safe, 0.0), ok, safe


def p_outlier_mean_only(grid: SpatialGrid, stats: IntensityStats, lambda1) -> OutlierProbabilityCurve:
    _check_stats(grid, stats)
    lam1 = _lambda1_values(grid, lambda1)
    raw, ok, _ = _mean_only_raw(stats.mean, lam1)
    return OutlierProbabilityCurve(grid, MEAN_ONLY, raw, zero_mass_cells=int((~ok).sum()))


def second_order_correction(stats: IntensityStats, lam1) -> np.ndarray:
    """λ1·σ0²/(μ0+λ1)³, zero where μ0 + λ1 = 0."""
    denom = stats.mean + lam1
    ok = denom > 0
    return np.where(ok, lam1 * stats.variance / np.where(ok, denom, 1.0) ** 3, 0.0)


def p_outlier_second_order(grid: SpatialGrid, stats: IntensityStats, lambda1) -> OutlierProbabilityCurve:
    _check_stats(grid, stats)
    lam1 = _lambda1_values(grid, lambda1)
    raw, ok, _ = _mean_only_raw(stats.mean, lam1)
    raw = raw + second_order_correction(stats, lam1)
    return OutlierProbabilityCurve(grid, SECOND_ORDER, raw, zero_mass_cells=int((~ok).sum()))


def write_curves_csv(path, curves) -> None:
    """Long-format export: one row per (cell, method)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["s_km", "value", "method"])
        for curve in curves:
            for s, v in zip(curve.grid.cell_centers, curve.raw):
                w.writerow([repr(float(s)), repr(float(v)), curve.method])
