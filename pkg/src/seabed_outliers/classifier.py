"""Probabilistic classification of potential commission outliers.

For each observed arrival a uniform draw is compared with the normal CDF of
the observed count K under N(μ_N, σ_N²); if that gate opens, a second draw is
compared with the outlier probability at the arrival's cell.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .arrivals import ArrivalSet
from .errors import InvalidArgumentError, UndefinedRateError
from .grid import locate_cells


@dataclass(frozen=True)
class ArrivalCountModel:
    """Gaussian model of the number of normal arrivals per unit time."""

    mu_N: float
    sigma_N: float
    unit_time: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.mu_N) and np.isfinite(self.sigma_N)):
            raise InvalidArgumentError("count model parameters must be finite")
        if not self.sigma_N > 0:
            raise InvalidArgumentError(f"sigma_N must be positive, got {self.sigma_N}")
        if not self.unit_time > 0:
            raise InvalidArgumentError("unit_time must be positive")

    def gate_probability(self, k: int) -> float:
        """P(X < K) for X ~ N(μ_N, σ_N²)."""
        return float(norm.cdf((k - self.mu_N) / self.sigma_N))


def draw_uniforms(rng: np.random.Generator, k: int) -> np.ndarray:
    """The (u1, u2) pair for each arrival, shape (k, 2).

    Both draws are taken for every arrival so that two classifiers fed the
    same stream see identical random numbers.
    """
    return rng.random((k, 2))


def classify(arrivals: ArrivalSet, model: ArrivalCountModel, curve,
             rng: np.random.Generator | None = None, uniforms=None) -> ArrivalSet:
    grid = curve.grid
    if abs(arrivals.length_km - grid.length_km) > 1e-9 * grid.length_km:
        raise InvalidArgumentError("arrival domain does not match the probability curve grid")
    k = len(arrivals)
    if k == 0:
        return arrivals.with_classification(np.empty(0, dtype=bool))
    if uniforms is None:
        rng = np.random.default_rng() if rng is None else rng
        uniforms = draw_uniforms(rng, k)
    u = np.asarray(uniforms, dtype=float)
    if u.shape != (k, 2):
        raise InvalidArgumentError(f"expected uniforms of shape {(k, 2)}, got {u.shape}")
    gate = model.gate_probability(k)
    p = curve.probabilities[locate_cells(grid, arrivals.positions)]
    marked = (u[:, 0] < gate) & (u[:, 1] < p)
    return arrivals.with_classification(marked)


@dataclass(frozen=True)
class ClassificationScore:
    """True-positive rate over true outliers, with the false-positive rate over normals.

    ``false_positive_rate`` is NaN when the set contains no normal arrivals.
    """

    success_rate: float
    false_positive_rate: float
    n_outliers: int
    n_normals: int
    n_marked: int


def success_rate(classified: ArrivalSet) -> ClassificationScore:
    if classified.is_outlier is None:
        raise InvalidArgumentError("success rate needs ground-truth labels")
    if classified.classified is None:
        raise InvalidArgumentError("arrival set has not been classified")
    truth = classified.is_outlier
    marks = classified.classified
    n_out = int(truth.sum())
    n_norm = int((~truth).sum())
    if n_out == 0:
        raise UndefinedRateError("no true outliers: success rate is undefined")
    tpr = float((marks & truth).sum() / n_out)
    fpr = float((marks & ~truth).sum() / n_norm) if n_norm else float("nan")
    return ClassificationScore(tpr, fpr, n_out, n_norm, int(marks.sum()))


def write_classified_csv(path, classified: ArrivalSet) -> None:
    import csv

    from .arrivals import labels_of

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["position_km", "truth_label", "classified_outlier"])
        for p, lab, c in zip(classified.positions, labels_of(classified), classified.classified):
            w.writerow([repr(float(p)), lab, int(c)])
