"""Commission-outlier classification and sensor placement for log-Gaussian Cox processes."""

__version__ = "0.1.0"

from .arrivals import ArrivalSet
from .classifier import ArrivalCountModel, classify, success_rate
from .gap_analysis import gap_bounds, gap_report, jensen_gap, lemma1_check
from .gp import (
    GaussianField,
    IntensityField,
    IntensityStats,
    MaternParams,
    build_field,
    intensity_stats,
    matern_cov,
    sample_intensity,
)
from .grid import SpatialGrid, integrate, locate_cell, make_grid
from .inference import BinnedCounts, bin_arrivals, fit_posterior, posterior_arrival_count_model
from .outlier_probability import (
    OutlierProbabilityCurve,
    p_outlier_mc,
    p_outlier_mean_only,
    p_outlier_second_order,
)
from .placement import (
    DetectionModel,
    ObjectiveReport,
    SensorArray,
    brute_force_place,
    gamma,
    greedy_place,
    miss_profile,
    undetected_moments,
    void_probability_mc,
)
from .synthesis import merge, sample_normal_arrivals, sample_uniform_outliers
