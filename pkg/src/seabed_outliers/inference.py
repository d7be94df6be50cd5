"""Laplace approximation of the LGCP posterior on a grid.

The latent log-intensity η has a Gaussian prior N(m, K).  Given per-cell
counts over a duration T_c the likelihood is Poisson with mean
T_c·Δ·exp(η_i).  The mode is found by damped Newton iterations in the
K-premultiplied parametrization (η = m + K a), so K is never inverted.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .arrivals import ArrivalSet
from .classifier import ArrivalCountModel
from .errors import InvalidArgumentError, NumericalError
from .gp import GaussianField, MaternParams, build_field
from .grid import SpatialGrid, integrate, locate_cells

log = logging.getLogger(__name__)

GRAD_TOL = 1e-8
MAX_NEWTON = 100
MAX_HALVINGS = 30
MIN_PRIOR_COUNT = 0.5
OBJ_RTOL = 1e-13


@dataclass(frozen=True)
class BinnedCounts:
    grid: SpatialGrid
    counts: np.ndarray
    duration: float

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.shape != (self.grid.n_cells,):
            raise InvalidArgumentError("counts length does not match grid")
        if np.any(c < 0) or np.any(c != np.round(c)):
            raise InvalidArgumentError("counts must be nonnegative integers")
        if not self.duration > 0:
            raise InvalidArgumentError(f"duration must be positive, got {self.duration}")
        object.__setattr__(self, "counts", c.astype(np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def bin_arrivals(grid: SpatialGrid, arrivals: ArrivalSet, duration: float) -> BinnedCounts:
    idx = locate_cells(grid, arrivals.positions)
    counts = np.bincount(idx, minlength=grid.n_cells)
    return BinnedCounts(grid, counts, float(duration))


def default_log_mean(counts: BinnedCounts) -> float:
    """Constant prior mean log(total / (L·T_c)); an empty record counts as half an event."""
    total = max(counts.total, MIN_PRIOR_COUNT)
    return float(np.log(total / (counts.grid.length_km * counts.duration)))


def default_prior(counts: BinnedCounts, params: MaternParams | None = None) -> GaussianField:
    return build_field(counts.grid, default_log_mean(counts), params or MaternParams())


@dataclass
class LaplaceResult:
    field: GaussianField
    mode: np.ndarray
    iterations: int
    grad_norm: float
    objective_trace: list = field(default_factory=list)


def _objective(y, exposure, f, a, m):
    eta = m + f
    return float(np.dot(y, eta) - np.dot(exposure, np.exp(eta)) - 0.5 * np.dot(a, f))


def laplace_fit(counts: BinnedCounts, prior: GaussianField,
                tol: float = GRAD_TOL, max_iter: int = MAX_NEWTON) -> LaplaceResult:
    if counts.grid != prior.grid:
        raise InvalidArgumentError("counts and prior are defined on different grids")
    n = prior.grid.n_cells
    y = counts.counts.astype(float)
    exposure = np.full(n, counts.duration * prior.grid.cell_width)
    m = prior.mean
    K = prior.chol @ prior.chol.T  # the jittered prior actually factorized

    a = np.zeros(n)
    f = np.zeros(n)
    obj = _objective(y, exposure, f, a, m)
    trace = [obj]
    grad_norm = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        mu = exposure * np.exp(m + f)
        grad = (y - mu) - a
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm <= tol:
            it -= 1
            break
        W = mu
        sW = np.sqrt(W)
        B = np.eye(n) + sW[:, None] * K * sW[None, :]
        L = linalg.cholesky(B, lower=True)
        b = W * f + (y - mu)
        v = linalg.cho_solve((L, True), sW * (K @ b))
        a_new = b - sW * v
        step = a_new - a
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            a_try = a + t * step
            f_try = K @ a_try
            obj_try = _objective(y, exposure, f_try, a_try, m)
            # near the mode the gain drops below float resolution of the objective
            if np.isfinite(obj_try) and obj_try >= obj - OBJ_RTOL * (1.0 + abs(obj)):
                break
            t *= 0.5
        else:
            # no ascent possible in floating point: we are at the mode
            mu = exposure * np.exp(m + f)
            grad_norm = float(np.max(np.abs((y - mu) - a)))
            break
        a, f, obj = a_try, f_try, obj_try
        trace.append(obj)
    else:
        mu = exposure * np.exp(m + f)
        grad_norm = float(np.max(np.abs((y - mu) - a)))

    if grad_norm > tol:
        raise NumericalError(
            f"Newton iteration did not converge: gradient max-norm {grad_norm:.3e}",
            grad_norm=grad_norm,
            iterations=it,
        )

    W = exposure * np.exp(m + f)
    sW = np.sqrt(W)
    B = np.eye(n) + sW[:, None] * K * sW[None, :]
    L = linalg.cholesky(B, lower=True)
    V = linalg.solve_triangular(L, sW[:, None] * K, lower=True)
    post_cov = K - V.T @ V
    post = GaussianField.from_moments(prior.grid, m + f, post_cov)
    log.debug("Laplace fit converged in %d iterations (|grad|=%.2e)", it, grad_norm)
    return LaplaceResult(post, m + f, it, grad_norm, trace)


def fit_posterior(counts: BinnedCounts, prior: GaussianField) -> GaussianField:
    """Laplace approximation of the posterior log-intensity field."""
    return laplace_fit(counts, prior).field


def fit_arrivals(grid: SpatialGrid, arrivals: ArrivalSet, duration: float,
                 params: MaternParams | None = None) -> GaussianField:
    """Bin, build the default prior and fit; used for both normal and outlier intensities."""
    counts = bin_arrivals(grid, arrivals, duration)
    return fit_posterior(counts, default_prior(counts, params))


def posterior_arrival_count_model(posterior: GaussianField, duration: float = 1.0,
                                  n_samples: int = 10_000,
                                  rng: np.random.Generator | None = None,
                                  chunk: int = 5_000) -> ArrivalCountModel:
    """Gaussian summary of the total arrival count per unit time.

    Each sampled intensity is integrated over the domain and divided by
    ``duration``.  Fields returned by :func:`fit_posterior` are already per
    unit time, so the default ``duration=1`` applies to them.
    """
    if n_samples < 2:
        raise InvalidArgumentError("need at least two samples")
    if not duration > 0:
        raise InvalidArgumentError("duration must be positive")
    rng = np.random.default_rng() if rng is None else rng
    grid = posterior.grid
    totals = []
    remaining = n_samples
    while remaining:
        k = min(chunk, remaining)
        lam = np.exp(posterior.sample_log(rng, k))
        totals.append(lam.sum(axis=1) * grid.cell_width / duration)
        remaining -= k
    totals = np.concatenate(totals)
    sd = float(np.std(totals, ddof=1))
    return ArrivalCountModel(float(totals.mean()), max(sd, np.finfo(float).tiny), float(duration))


def expected_total(field_: GaussianField) -> float:
    return integrate(field_.grid, np.exp(field_.mean + 0.5 * np.diag(field_.cov)))
