"""Matérn Gaussian processes on a :class:`SpatialGrid`.

A :class:`GaussianField` describes the log-intensity of a log-Gaussian Cox
process.  Sampling exponentiates a Cholesky draw; :func:`intensity_stats`
returns the exact lognormal mean and standard deviation per cell.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special

from .errors import InvalidArgumentError, NumericalError
from .grid import SpatialGrid

log = logging.getLogger(__name__)

JITTER_LADDER = (1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


@dataclass(frozen=True)
class MaternParams:
    """Matérn hyperparameters; ``range_km`` is the practical range β."""

    marginal_variance: float = 1.0
    smoothness: float = 1.5
    range_km: float = 2.0

    def __post_init__(self):
        for name in ("marginal_variance", "smoothness", "range_km"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidArgumentError(f"{name} must be positive and finite, got {v}")

    @property
    def kappa(self) -> float:
        return float(np.sqrt(8.0 * self.smoothness) / self.range_km)


def matern_cov(params: MaternParams, distance_km):
    """Matérn covariance at the given lag(s).

    k(d) = σ² 2^(1-ζ)/Γ(ζ) (κd)^ζ K_ζ(κd), with k(0) = σ².
    """
    d = np.asarray(distance_km, dtype=float)
    if np.any(d < 0):
        raise InvalidArgumentError("distance must be nonnegative")
    nu = params.smoothness
    x = params.kappa * d
    out = np.full(d.shape, params.marginal_variance, dtype=float)
    pos = x > 0
    if np.any(pos):
        xp = x[pos]
        # log-space avoids overflow of x^nu and underflow of K_nu for large lags
        logk = (
            (1.0 - nu) * np.log(2.0)
            - special.gammaln(nu)
            + nu * np.log(xp)
            + np.log(special.kve(nu, xp))
            - xp
        )
        out[pos] = params.marginal_variance * np.exp(logk)
    # numerical noise near zero lag can push the ratio marginally above 1
    np.minimum(out, params.marginal_variance, out=out)
    return float(out) if out.ndim == 0 else out


def matern_matrix(grid: SpatialGrid, params: MaternParams) -> np.ndarray:
    c = grid.cell_centers
    return matern_cov(params, np.abs(c[:, None] - c[None, :]))


def stable_cholesky(cov: np.ndarray, ladder=JITTER_LADDER):
    """Lower Cholesky factor of ``cov + jitter*I`` using the smallest jitter that works."""
    n = cov.shape[0]
    last_err = None
    for jitter in ladder:
        try:
            chol = linalg.cholesky(cov + jitter * np.eye(n), lower=True, check_finite=True)
        except (linalg.LinAlgError, ValueError) as err:
            last_err = err
            continue
        if np.all(np.diag(chol) > 0):
            return chol, jitter
    eig_min = float(np.linalg.eigvalsh(0.5 * (cov + cov.T)).min())
    raise NumericalError(
        f"Cholesky factorization failed up to jitter {ladder[-1]:g} "
        f"(smallest eigenvalue {eig_min:.3e}): {last_err}",
        min_eigenvalue=eig_min,
        max_jitter=ladder[-1],
    )


@dataclass(frozen=True)
class GaussianField:
    """Gaussian log-intensity field on a grid."""

    grid: SpatialGrid
    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray = field(repr=False)
    jitter: float = 0.0

    @classmethod
    def from_moments(cls, grid: SpatialGrid, mean, cov) -> "GaussianField":
        mean = np.array(mean, dtype=float)
        cov = np.array(cov, dtype=float)
        n = grid.n_cells
        if mean.shape != (n,) or cov.shape != (n, n):
            raise InvalidArgumentError(
                f"field shapes {mean.shape}/{cov.shape} do not match grid of {n} cells"
            )
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            raise InvalidArgumentError("field mean and covariance must be finite")
        cov = 0.5 * (cov + cov.T)
        if np.any(np.diag(cov) < 0):
            raise InvalidArgumentError("covariance diagonal must be nonnegative")
        chol, jitter = stable_cholesky(cov)
        for arr in (mean, cov, chol):
            arr.setflags(write=False)
        return cls(grid, mean, cov, chol, jitter)

    @property
    def variance(self) -> np.ndarray:
        return np.diag(self.cov).copy()

    def sample_log(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        n = self.grid.n_cells
        if size is None:
            return self.mean + self.chol @ rng.standard_normal(n)
        z = rng.standard_normal((size, n))
        return self.mean[None, :] + z @ self.chol.T


@dataclass(frozen=True)
class IntensityStats:
    mean: np.ndarray
    sd: np.ndarray

    def __post_init__(self):
        for name in ("mean", "sd"):
            v = np.asarray(getattr(self, name), dtype=float)
            if not (np.all(np.isfinite(v)) and np.all(v >= 0)):
                raise InvalidArgumentError(f"intensity {name} must be finite and nonnegative")
            object.__setattr__(self, name, v)

    @property
    def variance(self) -> np.ndarray:
        return self.sd ** 2


@dataclass(frozen=True)
class IntensityField:
    """One intensity realization, events per km per unit time."""

    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_cells,):
            raise InvalidArgumentError("intensity length does not match grid")
        if not (np.all(np.isfinite(v)) and np.all(v >= 0)):
            raise InvalidArgumentError("intensity must be finite and nonnegative")
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: SpatialGrid, rate_per_km: float) -> "IntensityField":
        return cls(grid, np.full(grid.n_cells, float(rate_per_km)))


def build_field(grid: SpatialGrid, log_mean, params: MaternParams) -> GaussianField:
    log_mean = np.broadcast_to(np.asarray(log_mean, dtype=float), (grid.n_cells,))
    field_ = GaussianField.from_moments(grid, log_mean, matern_matrix(grid, params))
    log.debug("built Matérn field %s with jitter %g", params, field_.jitter)
    return field_


def sample_intensity(field_: GaussianField, rng: np.random.Generator) -> IntensityField:
    return IntensityField(field_.grid, np.exp(field_.sample_log(rng)))


def intensity_stats(field_: GaussianField) -> IntensityStats:
    """Lognormal moments: mean = exp(m + v/2), sd = mean * sqrt(exp(v) - 1)."""
    v = np.diag(field_.cov)
    mean = np.exp(field_.mean + 0.5 * v)
    sd = np.sqrt(np.expm1(v)) * mean
    return IntensityStats(mean, sd)
