"""Jensen gaps of the two plug-in outlier probabilities and their bounds.

Sign convention: gap = oracle - approximation on the outlier-probability
scale, which equals μ0/(μ0+λ1) - E[λ0/(λ0+λ1)] for the mean-only plug-in.
Positive values mean the approximation underestimates the outlier
probability.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .gp import IntensityStats
from .outlier_probability import (
    MC_ORACLE,
    OutlierProbabilityCurve,
    _lambda1_values,
    p_outlier_mean_only,
    p_outlier_second_order,
)


def jensen_gap(mc: OutlierProbabilityCurve, approx: OutlierProbabilityCurve) -> np.ndarray:
    if mc.grid != approx.grid:
        raise InvalidArgumentError("curves are defined on different grids")
    if mc.method != MC_ORACLE:
        raise InvalidArgumentError("first curve must be the Monte Carlo oracle")
    return mc.raw - approx.raw


@dataclass(frozen=True)
class GapBounds:
    J_upper: np.ndarray
    Jt_lower: np.ndarray
    Jt_upper: np.ndarray


def gap_bounds(stats: IntensityStats, lambda1) -> GapBounds:
    """Upper bound on the mean-only gap and the band for the second-order gap.

    0 <= J <= σ0²/(μ0+λ1)²;  -λ1σ0²/(μ0+λ1)³ <= J~ <= μ0σ0²/(μ0+λ1)³.
    Cells with μ0 + λ1 = 0 carry no event mass and get zero bounds.
    """
    mu = stats.mean
    lam1 = np.broadcast_to(np.asarray(getattr(lambda1, "values", lambda1), dtype=float), mu.shape)
    if np.any(mu < 0) or np.any(lam1 < 0):
        raise InvalidArgumentError("μ0 and λ1 must be nonnegative")
    var = stats.variance
    denom = mu + lam1
    ok = denom > 0
    d = np.where(ok, denom, 1.0)
    J_upper = np.where(ok, var / d ** 2, 0.0)
    Jt_lower = np.where(ok, -lam1 * var / d ** 3, 0.0)
    Jt_upper = np.where(ok, mu * var / d ** 3, 0.0)
    return GapBounds(J_upper, Jt_lower, Jt_upper)


def lemma1_check(stats: IntensityStats, lambda1) -> np.ndarray:
    """True where the second-order error band is strictly inside the mean-only bound.

    Only defined for strictly positive μ0, σ0 and λ1.
    """
    lam1 = np.broadcast_to(np.asarray(getattr(lambda1, "values", lambda1), dtype=float),
                           stats.mean.shape)
    if np.any(stats.mean <= 0) or np.any(stats.sd <= 0) or np.any(lam1 <= 0):
        raise InvalidArgumentError("bound ordering requires μ0, σ0, λ1 > 0")
    b = gap_bounds(stats, lam1)
    return np.maximum(np.abs(b.Jt_lower), b.Jt_upper) < b.J_upper


@dataclass(frozen=True)
class GapReport:
    s_km: np.ndarray
    p_mc: np.ndarray
    p_mc_se: np.ndarray
    p_mean_only: np.ndarray
    p_second_order: np.ndarray
    J: np.ndarray
    J_tilde: np.ndarray
    bounds: GapBounds

    @property
    def mean_abs_J(self) -> float:
        return float(np.mean(np.abs(self.J)))

    @property
    def mean_abs_J_tilde(self) -> float:
        return float(np.mean(np.abs(self.J_tilde)))

    @property
    def reduction_percent(self) -> float:
        if self.mean_abs_J == 0:
            return 0.0
        return 100.0 * (1.0 - self.mean_abs_J_tilde / self.mean_abs_J)

    def summary(self) -> dict:
        return {
            "mean_abs_J": self.mean_abs_J,
            "mean_abs_J_tilde": self.mean_abs_J_tilde,
            "reduction_percent": self.reduction_percent,
            "n_cells": int(self.s_km.size),
        }


def gap_report(mc: OutlierProbabilityCurve, stats: IntensityStats, lambda1) -> GapReport:
    grid = mc.grid
    lam1 = _lambda1_values(grid, lambda1)
    mean_only = p_outlier_mean_only(grid, stats, lam1)
    second = p_outlier_second_order(grid, stats, lam1)
    se = mc.stderr if mc.stderr is not None else np.zeros(grid.n_cells)
    return GapReport(
        s_km=grid.cell_centers.copy(),
        p_mc=mc.raw,
        p_mc_se=se,
        p_mean_only=mean_only.raw,
        p_second_order=second.raw,
        J=jensen_gap(mc, mean_only),
        J_tilde=jensen_gap(mc, second),
        bounds=gap_bounds(stats, lam1),
    )


GAP_COLUMNS = ("s_km", "p_mc", "p_mc_se", "p_mean_only", "p_second_order", "J", "J_tilde",
               "bound_J_upper", "bound_Jt_lower", "bound_Jt_upper")


def write_gap_csv(path, report: GapReport) -> None:
    cols = [report.s_km, report.p_mc, report.p_mc_se, report.p_mean_only, report.p_second_order,
            report.J, report.J_tilde, report.bounds.J_upper, report.bounds.Jt_lower,
            report.bounds.Jt_upper]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GAP_COLUMNS)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])


def write_gap_summary(path, report: GapReport) -> None:
    with open(path, "w") as fh:
        json.dump(report.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
