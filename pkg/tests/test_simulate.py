import math

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings

from hierlap.distances import grid_for, normal_grid
from hierlap.errors import InsufficientDataError
from hierlap.harness import ExperimentConfig
from hierlap.hierarchy import build_coupling, build_lattice
from hierlap.moments import exact_variances, kurtosis_excess, weight_profile
from hierlap.noise import NoiseSpec, make_rng
from hierlap.simulate import (
    PowerSums, SimPlan, binned_l1, dkw_radius, empirical_stats, kolmogorov_distance,
    sample_lambda_bar, write_samples_csv,
)
from scipy import stats

U = NoiseSpec("uniform", 0.5)


def plan(N, trials, alpha=1.0, seed=0, workers=1, noise=U):
    lat, sch = ExperimentConfig(alpha=alpha).model(N)
    return SimPlan(lat, sch, noise, trials, seed=seed, workers=workers)


def test_draw_count():
    p = plan(3, 10)
    assert p.draws_per_trial == 8 + 4 + 2 + 1 + p.lattice.tail_depth


def test_rademacher_single_weight():
    lat = build_lattice([], 0, 0)
    sch = build_coupling("qp", lat, p=2, alpha=1)
    x = sample_lambda_bar(SimPlan(lat, sch, NoiseSpec("rademacher", 0.3), 20_000, seed=2))
    assert set(np.unique(x)) == {-1.0, 1.0}
    assert abs(np.mean(x > 0) - 0.5) < 4 * 0.5 / math.sqrt(x.size)


def test_normalisation_uses_exact_sigma():
    x = sample_lambda_bar(plan(8, 100_000, seed=4))
    n = x.size
    assert abs(x.mean()) <= 4 / math.sqrt(n)
    se_var = math.sqrt((np.mean(x**4) - x.var() ** 2) / n)
    assert abs(x.var(ddof=1) - 1) <= 4 * se_var


@pytest.mark.parametrize("N", [4, 8, 10])
def test_unnormalised_variance_matches_closed_form(N):
    p = plan(N, 100_000, seed=N)
    prof = weight_profile(p.scheme, p.lattice)
    ub = sample_lambda_bar(p) * prof.std(U)
    B = exact_variances(p.scheme, p.lattice, U).B_N
    se = math.sqrt((np.mean(ub**4) - ub.var() ** 2) / ub.size)
    assert abs(ub.var(ddof=1) - B) <= 4 * se


def test_worker_count_invariance():
    ref = sample_lambda_bar(plan(9, 20_000, seed=3, workers=1))
    for w in (2, 8):
        assert np.array_equal(ref, sample_lambda_bar(plan(9, 20_000, seed=3, workers=w)))
    assert not np.array_equal(ref, sample_lambda_bar(plan(9, 20_000, seed=4)))


def test_plan_rejects_zero_trials():
    with pytest.raises(ValueError):
        plan(2, 0)


def test_empirical_stats_examples():
    s = empirical_stats([-1.0, 1.0])
    assert s.mean == 0 and s.variance == 2
    with pytest.raises(InsufficientDataError):
        empirical_stats([1.0])
    z = make_rng(99).standard_normal(10**6)
    assert empirical_stats(z).ks_normal < 1.63 / math.sqrt(10**6) * 1.5


def test_sample_kurtosis_matches_exact_cumulant():
    p = plan(10, 100_000, alpha=0.25, seed=8)
    x = sample_lambda_bar(p)
    s = empirical_stats(x)
    exact = kurtosis_excess(weight_profile(p.scheme, p.lattice), U)
    se = math.sqrt(24 / x.size)
    assert abs(s.excess_kurtosis - exact) <= 5 * se


def test_histogram_vs_grid():
    p = plan(10, 100_000, seed=21)
    x = sample_lambda_bar(p)
    g = grid_for(weight_profile(p.scheme, p.lattice), U)
    assert binned_l1(x, g) <= 0.02
    s = empirical_stats(x, grid=g)
    assert s.histogram.sum() * g.h == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=40), st.integers(1, 39))
def test_power_sums_merge(xs, cut):
    cut = min(cut, len(xs) - 1)
    a, b = PowerSums.of(xs[:cut]), PowerSums.of(xs[cut:])
    whole = PowerSums.of(xs)
    merged = a + b
    assert merged.count == whole.count
    assert merged.central(2) == pytest.approx(np.var(xs), rel=1e-9, abs=1e-9)
    assert (b + a).s4 == pytest.approx(merged.s4, rel=1e-12)


def test_kolmogorov_and_dkw():
    z = make_rng(5).standard_normal(50_000)
    assert kolmogorov_distance(z, stats.norm.cdf) <= dkw_radius(z.size, 0.99)
    assert dkw_radius(10**6, 0.99) == pytest.approx(1.628 / 1000, rel=1e-3)


def test_csv_export(tmp_path):
    x = sample_lambda_bar(plan(3, 50, seed=1))
    path = tmp_path / "s.csv"
    write_samples_csv(x, path)
    back = np.loadtxt(path, skiprows=1)
    assert np.array_equal(back, x)
    assert empirical_stats(x).to_json() == empirical_stats(x).to_json()


def test_mc_and_cf_tv_agree_at_n10():
    p = plan(10, 100_000, seed=12)
    normal = normal_grid()
    g = grid_for(weight_profile(p.scheme, p.lattice), U)
    from hierlap.distances import tv_distance
    mc = binned_l1(sample_lambda_bar(p), normal)
    assert abs(mc - tv_distance(g, normal)) <= 0.02
