import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seabed_outliers.errors import InvalidArgumentError
from seabed_outliers.gap_analysis import (
    gap_bounds,
    gap_report,
    jensen_gap,
    lemma1_check,
    write_gap_csv,
    write_gap_summary,
)
from seabed_outliers.gp import GaussianField, IntensityStats, MaternParams, build_field, intensity_stats
from seabed_outliers.grid import make_grid
from seabed_outliers.outlier_probability import p_outlier_mc, p_outlier_mean_only


def stats1(mu, sd):
    return IntensityStats(np.atleast_1d(np.asarray(mu, float)), np.atleast_1d(np.asarray(sd, float)))


def test_bounds_unit_example():
    b = gap_bounds(stats1(1.0, 1.0), 1.0)
    assert b.J_upper[0] == pytest.approx(0.25)
    assert b.Jt_lower[0] == pytest.approx(-0.125)
    assert b.Jt_upper[0] == pytest.approx(0.125)


def test_bounds_zero_variance():
    b = gap_bounds(stats1([1.0, 2.0], [0.0, 0.0]), 1.0)
    for arr in (b.J_upper, b.Jt_lower, b.Jt_upper):
        np.testing.assert_array_equal(arr, 0.0)


def test_bounds_closed_form_upper():
    b = gap_bounds(stats1(2.0, 1.0), 1.0)
    assert b.Jt_upper[0] == pytest.approx(2 / 27)


def test_bounds_reject_negative():
    with pytest.raises(InvalidArgumentError):
        gap_bounds(stats1(1.0, 1.0), -1.0)


def test_lemma_unit_example():
    assert lemma1_check(stats1(1.0, 1.0), 1.0).all()


def test_lemma_random_triples():
    rng = np.random.default_rng(0)
    mu, sd, lam = (10.0 * (1.0 - rng.random(10_000)) for _ in range(3))
    assert lemma1_check(IntensityStats(mu, sd), lam).all()


@pytest.mark.parametrize("lam", [1e-6, 1e-4, 1e-2])
def test_lemma_small_outlier_intensity(lam):
    assert lemma1_check(stats1(3.0, 2.0), lam).all()


def test_lemma_requires_positive_inputs():
    with pytest.raises(InvalidArgumentError):
        lemma1_check(stats1(1.0, 0.0), 1.0)


triple = st.floats(1e-3, 1e3)


@settings(max_examples=300, deadline=None)
@given(triple, triple, triple)
def test_bound_identity(mu, sd, lam):
    b = gap_bounds(stats1(mu, sd), lam)
    lhs = b.J_upper[0] - b.Jt_upper[0]
    # subtraction cancels, so the tolerance scales with J_upper
    assert abs(lhs - abs(b.Jt_lower[0])) <= 1e-12 * b.J_upper[0]
    assert b.Jt_upper[0] > 0


def test_gap_identity_and_sign():
    g = make_grid(1.0, 4)
    f = GaussianField.from_moments(g, np.zeros(4), np.eye(4))
    mc = p_outlier_mc(f, 1.0, 10_000, np.random.default_rng(0))
    np.testing.assert_array_equal(jensen_gap(mc, mc), 0.0)
    with pytest.raises(InvalidArgumentError):
        jensen_gap(p_outlier_mean_only(g, intensity_stats(f), 1.0), mc)


def test_gap_vanishes_without_variance():
    g = make_grid(1.0, 4)
    f = GaussianField.from_moments(g, np.zeros(4), np.zeros((4, 4)))
    mc = p_outlier_mc(f, 1.0, 2_000, np.random.default_rng(0))
    J = jensen_gap(mc, p_outlier_mean_only(g, intensity_stats(f), 1.0))
    np.testing.assert_allclose(J, 0.0, atol=1e-4)


def test_gap_matches_quadrature_oracle():
    # λ0 lognormal(0, 1), λ1 = 1: E[λ0/(λ0+1)] = 1/2 by log-symmetry
    g = make_grid(1.0, 4)
    f = GaussianField.from_moments(g, np.zeros(4), np.eye(4))
    mc = p_outlier_mc(f, 1.0, 50_000, np.random.default_rng(3))
    J = jensen_gap(mc, p_outlier_mean_only(g, intensity_stats(f), 1.0))
    mu = np.exp(0.5)
    oracle = mu / (mu + 1) - 0.5
    assert np.all(np.abs(J - oracle) <= 3 * mc.stderr)


def test_report_contains_bounds_and_summary(tmp_path):
    g = make_grid(13.0, 50)
    f = build_field(g, np.log(0.5), MaternParams(0.5, 1.5, 2.0))
    mc = p_outlier_mc(f, 1.54, 20_000, np.random.default_rng(1))
    rep = gap_report(mc, intensity_stats(f), 1.54)
    se = rep.p_mc_se
    assert np.all(rep.J >= -3 * se) and np.all(rep.J <= rep.bounds.J_upper + 3 * se)
    assert np.all(rep.J_tilde >= rep.bounds.Jt_lower - 3 * se)
    assert np.all(rep.J_tilde <= rep.bounds.Jt_upper + 3 * se)
    assert rep.mean_abs_J_tilde < rep.mean_abs_J
    write_gap_csv(tmp_path / "gap.csv", rep)
    write_gap_summary(tmp_path / "gap.json", rep)
    header = (tmp_path / "gap.csv").read_text().splitlines()[0].split(",")
    assert header[:7] == ["s_km", "p_mc", "p_mc_se", "p_mean_only", "p_second_order", "J", "J_tilde"]
    assert "reduction_percent" in (tmp_path / "gap.json").read_text()
