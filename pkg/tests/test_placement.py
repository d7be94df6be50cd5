import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _placement_oracle import naive_best, naive_objective
from seabed_outliers.errors import BudgetExceededError, InvalidArgumentError
from seabed_outliers.gp import GaussianField, MaternParams, build_field
from seabed_outliers.grid import make_grid
from seabed_outliers.placement import (
    DetectionModel,
    SensorArray,
    brute_force_place,
    gamma,
    greedy_place,
    miss_profile,
    undetected_moments,
    void_probability_mc,
    write_placement_json,
    write_sensors_csv,
)

DM = DetectionModel()
G13 = make_grid(13.0, 52)


def golden_field():
    s = G13.cell_centers
    log_mean = np.log(0.2 + 1.5 * np.exp(-(s - 4) ** 2) + 1.0 * np.exp(-(s - 9.5) ** 2 / 0.5))
    return build_field(G13, log_mean, MaternParams(0.1, 1.5, 2.0))


def deterministic(grid, values):
    return GaussianField.from_moments(grid, np.log(values), np.zeros((grid.n_cells,) * 2))


def test_gamma_examples():
    assert gamma(3.0, 3.0, DM) == pytest.approx(0.98)
    assert gamma(0.0, 0.1, DM) == pytest.approx(0.98 * np.exp(-0.2))
    assert gamma(0.0, 0.56, DM) == pytest.approx(0.98 * np.exp(-0.56 ** 2 / 0.05))
    assert gamma(0.0, 0.56, DM) < 0.01


def test_detection_model_validation():
    with pytest.raises(InvalidArgumentError):
        DetectionModel(rho=1.5)
    with pytest.raises(InvalidArgumentError):
        DetectionModel(sigma_l=0.0)


def test_miss_profile_cases(small_grid):
    np.testing.assert_array_equal(miss_profile(small_grid, SensorArray(), DM), 1.0)
    np.testing.assert_allclose(miss_profile(small_grid, SensorArray([1.0]), DetectionModel(rho=0.0)), 1.0)
    c = small_grid.cell_centers[3]
    g = miss_profile(small_grid, SensorArray([c]), DM)
    assert g[3] == pytest.approx(0.02) and g.argmin() == 3
    with pytest.raises(InvalidArgumentError):
        miss_profile(small_grid, SensorArray([5.0]), DM)


def test_duplicate_sensors_warn(small_grid, caplog):
    with caplog.at_level(logging.WARNING):
        miss_profile(small_grid, SensorArray([1.0, 1.0]), DM)
    assert "co-located" in caplog.text


def test_deterministic_objective_is_exact_void_probability():
    g = make_grid(13.0, 260)
    rep = undetected_moments(deterministic(g, np.full(260, 20.02 / 13.0)), SensorArray(), DM)
    assert rep.expected_undetected == pytest.approx(20.02, abs=1e-9)
    assert rep.variance == 0.0
    assert abs(rep.objective - np.exp(-rep.expected_undetected)) <= 1e-12


def test_horizon_ratio_scales_moments():
    f = golden_field()
    r1 = undetected_moments(f, SensorArray([4.0]), DM, 1.0)
    r3 = undetected_moments(f, SensorArray([4.0]), DM, 3.0)
    assert r3.expected_undetected == pytest.approx(3 * r1.expected_undetected)
    assert r3.variance == pytest.approx(9 * r1.variance)
    with pytest.raises(InvalidArgumentError):
        undetected_moments(f, SensorArray(), DM, 0.0)


@pytest.mark.parametrize("sensors", [[], [4.0], [1.0, 6.0, 9.5]])
def test_moments_match_naive_oracle(sensors):
    f = golden_field()
    rep = undetected_moments(f, SensorArray(sensors), DM)
    obj, e1, var = naive_objective(G13, f.mean, f.cov, sensors)
    assert rep.expected_undetected == pytest.approx(e1, rel=1e-12)
    assert rep.variance == pytest.approx(var, rel=1e-8)
    assert rep.objective == pytest.approx(obj, rel=1e-10)


def test_small_variance_objective_matches_mc():
    f = build_field(G13, np.log(np.full(52, 2.0 / 13.0)), MaternParams(0.05, 1.5, 2.0))
    rep = undetected_moments(f, SensorArray([6.5]), DM)
    est, totals = void_probability_mc(f, SensorArray([6.5]), DM, n_samples=50_000,
                                      rng=np.random.default_rng(0), return_samples=True)
    x = totals - rep.expected_undetected
    budget = np.exp(-rep.expected_undetected) * np.mean(np.abs(x) ** 3 / 6 * np.maximum(1, np.exp(-x)))
    assert abs(rep.objective - est.value) <= 3 * est.stderr + budget


def test_void_probability_exceeds_plugin():
    # exp(-Λ) is convex, so E[exp(-Λ)] >= exp(-E[Λ])
    f = build_field(G13, np.zeros(52), MaternParams(1.0, 1.5, 2.0))
    rep = undetected_moments(f, SensorArray(), DM)
    est = void_probability_mc(f, SensorArray(), DM, n_samples=20_000, rng=np.random.default_rng(1))
    assert est.value > np.exp(-rep.expected_undetected) + 3 * est.stderr


def test_greedy_single_peak():
    s = G13.cell_centers
    f = deterministic(G13, 0.01 + 5 * np.exp(-((s - s[20]) ** 2) / 0.01))
    res = greedy_place(s, 1, f, DM)
    assert res.sensors.positions[0] == pytest.approx(s[20])


def test_greedy_two_peaks():
    s = G13.cell_centers
    f = deterministic(G13, 0.01 + 5 * np.exp(-((s - s[10]) ** 2) / 0.01) + 4 * np.exp(-((s - s[40]) ** 2) / 0.01))
    res = greedy_place(s, 2, f, DM)
    np.testing.assert_allclose(res.sensors.positions, [s[10], s[40]])


def test_greedy_tie_breaks_to_smallest():
    f = deterministic(G13, np.full(52, 0.1))
    s = G13.cell_centers
    res = greedy_place([s[30], s[20]], 1, f, DetectionModel(rho=0.0))
    assert res.sensors.positions[0] == s[20]


def test_greedy_trace_monotone():
    res = greedy_place(G13.cell_centers, 7, golden_field(), DM)
    obj = [r.objective for r in res.trace]
    assert len(res.trace) == 8
    assert all(b >= a for a, b in zip(obj, obj[1:]))
    assert res.report is res.trace[-1]


def test_brute_force_golden():
    cand = 0.5 + 12.0 * np.arange(20) / 19
    res = brute_force_place(cand, 3, golden_field(), DM)
    np.testing.assert_allclose(res.sensors.positions, cand[[5, 6, 14]])
    assert res.report.objective == pytest.approx(0.007417144228071902, rel=1e-9)


def test_brute_force_matches_naive_search():
    rng = np.random.default_rng(5)
    f = golden_field()
    cand = np.sort(rng.uniform(0, 13, 8))
    obj, combo = naive_best(G13, f.mean, f.cov, cand, 2)
    res = brute_force_place(cand, 2, f, DM)
    np.testing.assert_allclose(res.sensors.positions, combo)
    assert res.report.objective == pytest.approx(obj, rel=1e-10)


def test_brute_force_all_candidates():
    cand = [1.0, 5.0, 9.0]
    res = brute_force_place(cand, 3, golden_field(), DM)
    np.testing.assert_allclose(res.sensors.positions, cand)


def test_budget_and_argument_errors():
    f = golden_field()
    with pytest.raises(BudgetExceededError):
        brute_force_place(np.linspace(0, 13, 52), 7, f, DM)
    with pytest.raises(InvalidArgumentError):
        greedy_place([1.0, 2.0], 3, f, DM)
    with pytest.raises(InvalidArgumentError):
        greedy_place([1.0, 20.0], 1, f, DM)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 3))
def test_greedy_within_guarantee(seed, m):
    rng = np.random.default_rng(seed)
    g = make_grid(13.0, 40)
    f = build_field(g, np.log(rng.uniform(0.05, 1.5)) + rng.normal(0, 0.5, 40),
                    MaternParams(rng.uniform(0.05, 0.5), 1.5, 2.0))
    cand = rng.uniform(0, 13, 20)
    gr = greedy_place(cand, m, f, DM).report.objective
    bf = brute_force_place(cand, m, f, DM).report.objective
    assert gr >= (1 - 1 / np.e) * bf
    assert gr <= bf * (1 + 1e-12)


def test_writers(tmp_path):
    res = greedy_place(G13.cell_centers, 2, golden_field(), DM)
    write_sensors_csv(tmp_path / "s.csv", res.sensors)
    write_placement_json(tmp_path / "p.json", res, seed=1)
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "order,position_km"
    import json
    doc = json.loads((tmp_path / "p.json").read_text())
    assert doc["seed"] == 1 and len(doc["trace"]) == 3
