"""Monte Carlo experiments comparing the mean-only and second-order classifiers.

All experiments use a paired design: both branches see the same synthetic
windows and the same uniform draws, so differences isolate the choice of
outlier-probability curve.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .arrivals import ArrivalSet
from .classifier import ArrivalCountModel, classify, draw_uniforms, success_rate
from .errors import InvalidArgumentError, UndefinedRateError
from .gp import GaussianField, IntensityField, MaternParams, intensity_stats
from .grid import SpatialGrid, make_grid
from .inference import (
    BinnedCounts,
    default_prior,
    fit_arrivals,
    fit_posterior,
    posterior_arrival_count_model,
)
from .outlier_probability import (
    OutlierProbabilityCurve,
    p_outlier_mean_only,
    p_outlier_second_order,
)
from .placement import DetectionModel, SensorArray, gamma, greedy_place, miss_profile
from .synthesis import merge, sample_normal_arrivals, sample_uniform_outliers

log = logging.getLogger(__name__)

# Shipping-lane shaped normal traffic: (centre km, width km, relative weight)
DEFAULT_LANES = ((10.0, 0.6, 0.55), (12.4, 0.4, 0.35), (4.2, 0.5, 0.10))


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to synthesize one historical record and its windows.

    Rates are per km per unit time; ``history_duration`` is T_c in unit
    times and each observed window spans ``window`` unit times.
    """

    length_km: float = 13.0
    n_cells: int = 260
    matern: MaternParams = field(default_factory=MaternParams)
    normals_per_unit_time: float = 4.03
    lanes: tuple = DEFAULT_LANES
    background_fraction: float = 0.05
    history_duration: float = 1.0
    window: float = 1.0
    outlier_rate_per_km: float = 1.54
    lambda1_init_per_km: float = 0.75
    count_mode: str = "poisson"
    count_model_samples: int = 10_000
    detection: DetectionModel = field(default_factory=DetectionModel)
    n_sensors: int = 7
    detection_trials: int = 10_000

    @property
    def grid(self) -> SpatialGrid:
        return make_grid(self.length_km, self.n_cells)


def truth_intensity(config: ScenarioConfig) -> IntensityField:
    """Deterministic normal-traffic intensity with the configured total rate."""
    grid = config.grid
    s = grid.cell_centers
    shape = np.zeros_like(s)
    for centre, width, weight in config.lanes:
        bump = np.exp(-0.5 * ((s - centre) / width) ** 2)
        shape += weight * bump / (bump.sum() * grid.cell_width)
    shape /= shape.sum() * grid.cell_width
    shape = (1.0 - config.background_fraction) * shape + config.background_fraction / grid.length_km
    return IntensityField(grid, config.normals_per_unit_time * shape)


@dataclass
class Scenario:
    config: ScenarioConfig
    grid: SpatialGrid
    truth: IntensityField
    history: BinnedCounts
    posterior: GaussianField
    count_model: ArrivalCountModel
    mean_only: OutlierProbabilityCurve
    second_order: OutlierProbabilityCurve

    @property
    def stats(self):
        return intensity_stats(self.posterior)


def scenario_from_posterior(config: ScenarioConfig, posterior: GaussianField,
                            history: BinnedCounts, rng: np.random.Generator,
                            truth: IntensityField | None = None) -> Scenario:
    grid = posterior.grid
    stats = intensity_stats(posterior)
    lam1 = IntensityField.constant(grid, config.lambda1_init_per_km)
    model = posterior_arrival_count_model(posterior, 1.0, config.count_model_samples, rng)
    return Scenario(config, grid, truth, history, posterior, model,
                    p_outlier_mean_only(grid, stats, lam1),
                    p_outlier_second_order(grid, stats, lam1))


def prepare_scenario(config: ScenarioConfig, rng: np.random.Generator) -> Scenario:
    """Draw a historical record from the truth, fit λ0 and build both curves."""
    grid = config.grid
    truth = truth_intensity(config)
    counts = rng.poisson(truth.values * grid.cell_width * config.history_duration)
    history = BinnedCounts(grid, counts, config.history_duration)
    posterior = fit_posterior(history, default_prior(history, config.matern))
    return scenario_from_posterior(config, posterior, history, rng, truth)


def synthesize_window(scenario: Scenario, rng: np.random.Generator) -> ArrivalSet:
    """Normals thinned from one posterior draw of λ0 plus uniform outliers."""
    cfg = scenario.config
    lam0 = IntensityField(scenario.grid, np.exp(scenario.posterior.sample_log(rng)))
    normals = sample_normal_arrivals(lam0, rng, mode=cfg.count_mode, duration=cfg.window)
    outliers = sample_uniform_outliers(cfg.outlier_rate_per_km, scenario.grid, rng, cfg.window)
    return merge(normals, outliers, rng)


def _paired_summary(a: np.ndarray, b: np.ndarray) -> dict:
    n = a.size
    diff = b - a
    se = lambda x: float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return {
        "n": int(n),
        "mean_only": float(a.mean()),
        "mean_only_se": se(a),
        "second_order": float(b.mean()),
        "second_order_se": se(b),
        "difference": float(diff.mean()),
        "difference_se": se(diff),
        "relative_improvement_percent": float(100.0 * diff.mean() / a.mean()) if a.mean() else float("nan"),
    }


def classification_experiment(scenario: Scenario, iterations: int,
                              rng: np.random.Generator) -> dict:
    """Classifier success rates for both curves over fresh synthetic windows.

    Windows without any true outlier have an undefined success rate and are
    skipped; the count is reported.
    """
    rates = np.empty((iterations, 2))
    fprs = np.empty((iterations, 2))
    keep = np.ones(iterations, dtype=bool)
    for it in range(iterations):
        window = synthesize_window(scenario, rng)
        u = draw_uniforms(rng, len(window))
        for j, curve in enumerate((scenario.mean_only, scenario.second_order)):
            marked = classify(window, scenario.count_model, curve, uniforms=u)
            try:
                score = success_rate(marked)
            except UndefinedRateError:
                keep[it] = False
                break
            rates[it, j] = score.success_rate
            fprs[it, j] = score.false_positive_rate
    summary = _paired_summary(rates[keep, 0], rates[keep, 1])
    summary["skipped_windows"] = int((~keep).sum())
    summary["false_positive_rate"] = {
        "mean_only": float(np.nanmean(fprs[keep, 0])),
        "second_order": float(np.nanmean(fprs[keep, 1])),
    }
    summary["count_model"] = {"mu_N": scenario.count_model.mu_N,
                              "sigma_N": scenario.count_model.sigma_N}
    summary["trace"] = rates[keep]
    return summary


@dataclass(frozen=True)
class DetectionResult:
    rate: float
    stderr: float
    expected_rate: float
    trials: int


def detection_probability(positions, sensors: SensorArray, model: DetectionModel) -> np.ndarray:
    pos = np.asarray(positions, dtype=float)
    if len(sensors) == 0:
        return np.zeros(pos.size)
    miss = np.prod(1.0 - gamma(pos[None, :], sensors.positions[:, None], model), axis=0)
    return 1.0 - miss


def detection_experiment(true_outliers: ArrivalSet, sensors: SensorArray,
                         model: DetectionModel, trials: int = 10_000,
                         rng: np.random.Generator | None = None,
                         uniforms: np.ndarray | None = None) -> DetectionResult:
    """Fraction of true outliers detected, averaged over Bernoulli trials."""
    pos = true_outliers.positions
    if true_outliers.is_outlier is not None:
        pos = pos[true_outliers.is_outlier]
    if pos.size == 0:
        raise UndefinedRateError("no true outliers to detect")
    p = detection_probability(pos, sensors, model)
    if uniforms is None:
        rng = np.random.default_rng() if rng is None else rng
        uniforms = rng.random((trials, pos.size))
    per_trial = (uniforms < p[None, :]).mean(axis=1)
    se = float(per_trial.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("nan")
    return DetectionResult(float(per_trial.mean()), se, float(p.mean()), int(trials))


def place_for(marked: ArrivalSet, scenario: Scenario) -> SensorArray:
    """Refit λ1 from a classified set and greedily place the configured sensors."""
    cfg = scenario.config
    lam1 = fit_arrivals(scenario.grid, marked, cfg.window, cfg.matern)
    result = greedy_place(scenario.grid.cell_centers, cfg.n_sensors, lam1, cfg.detection,
                          horizon_ratio=1.0)
    return result.sensors


def _replicate(scenario: Scenario, seed_seq: np.random.SeedSequence, with_oracle: bool):
    cfg = scenario.config
    rng = np.random.default_rng(seed_seq)
    while True:
        window = synthesize_window(scenario, rng)
        if window.is_outlier.any():
            break
    u = draw_uniforms(rng, len(window))
    branches = {}
    for name, curve in (("mean_only", scenario.mean_only), ("second_order", scenario.second_order)):
        marked = classify(window, scenario.count_model, curve, uniforms=u).marked()
        branches[name] = (place_for(marked, scenario), len(marked))
    if with_oracle:
        branches["oracle"] = (place_for(window.true_outliers(), scenario), window.n_outliers)
    trial_u = rng.random((cfg.detection_trials, window.n_outliers))
    row = {"n_arrivals": len(window), "n_outliers": window.n_outliers}
    for name, (sensors, n_marked) in branches.items():
        res = detection_experiment(window, sensors, cfg.detection, cfg.detection_trials,
                                   uniforms=trial_u)
        row[f"{name}_rate"] = res.rate
        row[f"{name}_expected"] = res.expected_rate
        row[f"{name}_marked"] = n_marked
        row[f"{name}_sensors"] = [float(p) for p in sensors.positions]
    return row


def pipeline_comparison(scenario: Scenario, replications: int, rng: np.random.Generator,
                        workers: int = 1, with_oracle: bool = True) -> dict:
    """Classify, refit λ1, place sensors and score detection for both curves.

    Each replication owns a spawned substream, so results do not depend on
    the worker count.
    """
    if replications < 1:
        raise InvalidArgumentError("need at least one replication")
    seeds = np.random.SeedSequence(int(rng.integers(2 ** 63))).spawn(replications)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda s: _replicate(scenario, s, with_oracle), seeds))
    else:
        rows = [_replicate(scenario, s, with_oracle) for s in seeds]
    a = np.array([r["mean_only_rate"] for r in rows])
    b = np.array([r["second_order_rate"] for r in rows])
    summary = _paired_summary(a, b)
    if with_oracle:
        summary["oracle"] = float(np.mean([r["oracle_rate"] for r in rows]))
    summary["rows"] = rows
    return summary


def scale_configs(base: ScenarioConfig, durations=(1.0, 7.0, 30.0)) -> list:
    return [replace(base, history_duration=float(d)) for d in durations]
