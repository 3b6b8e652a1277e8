import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from windcal import dists, scoring
from windcal.dists import LogNormalMV, Tgev, TruncNormal
from windcal.errors import InvalidArgumentError, NumericalFailureError

Z_11_12 = 1.3829941271006384     # mpmath, tests/oracles


def quad(d, x):
    return scoring.crps_quadrature(lambda y: dists.cdf(d, y), x, scoring.support_hint(d))


# --- CRPS ------------------------------------------------------------------


def test_quadrature_examples():
    assert quad(TruncNormal(2.0, 1e-6), 3.0) == pytest.approx(1.0, abs=1e-6)
    assert quad(TruncNormal(20, 1), 20.0) == pytest.approx(0.23370, abs=1e-4)
    assert quad(TruncNormal(0, 1), 1.0) == pytest.approx(0.20489, abs=1e-4)


def test_quadrature_observation_outside_hint():
    d = TruncNormal(5.0, 1.0)
    lo, hi = scoring.support_hint(d)
    assert quad(d, hi + 3.0) == pytest.approx(dists.crps_closed(d, hi + 3.0), abs=1e-8)


def test_quadrature_budget_exhausted():
    noise = np.random.default_rng(0)
    with pytest.raises(NumericalFailureError):
        scoring.crps_quadrature(lambda y: noise.random(np.shape(y)), 1.0, (0.0, 2.0))


def test_quadrature_rejects_bad_hint():
    with pytest.raises(InvalidArgumentError):
        scoring.crps_quadrature(lambda y: y, 1.0, (2.0, 1.0))


def test_crps_ensemble_examples():
    assert scoring.crps_ensemble([1.0], 1.0) == 0.0
    assert scoring.crps_ensemble([0.0, 2.0], 1.0) == pytest.approx(0.5)
    # exact value of the step-CDF integral (fractions oracle)
    assert scoring.crps_ensemble(np.arange(1.0, 12.0), 6.0) == pytest.approx(10 / 11, abs=1e-12)
    with pytest.raises(InvalidArgumentError):
        scoring.crps_ensemble([], 1.0)


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_one_member_ensemble_is_absolute_error(f, x):
    assert scoring.crps_ensemble([f], x) == abs(f - x)


@given(st.lists(st.floats(0, 30), min_size=1, max_size=11), st.floats(-5, 35))
def test_crps_ensemble_matches_step_cdf_quadrature(members, x):
    f = np.sort(np.asarray(members))

    def step_cdf(y):
        return np.searchsorted(f, y, side="right") / f.size

    lo, hi = min(f[0], x) - 1.0, max(f[-1], x) + 1.0
    # integrate piecewise between the jumps to keep the rule exact
    knots = np.unique(np.concatenate([[lo, hi, x], f]))
    ref = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        mid = 0.5 * (a + b)
        ref += (b - a) * (step_cdf(mid) - (1.0 if mid >= x else 0.0)) ** 2
    assert scoring.crps_ensemble(f, x) == pytest.approx(ref, abs=1e-6)


def test_crps_ensemble_vectorised():
    f = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 4.0]])
    out = scoring.crps_ensemble(f, np.array([2.0, 1.0]))
    assert out[0] == scoring.crps_ensemble(f[0], 2.0)
    assert out[1] == scoring.crps_ensemble(f[1], 1.0)


def test_crpss_examples():
    assert scoring.crpss(0.8, 0.8) == 0.0
    assert scoring.crpss(0.72, 0.8) == pytest.approx(0.1)
    for bad in (0.0, -1.0):
        with pytest.raises(InvalidArgumentError):
            scoring.crpss(0.5, bad)


@given(st.floats(0.01, 10), st.floats(0.01, 10))
def test_crpss_sign_antisymmetry(a, b):
    ab, ba = scoring.crpss(a, b), scoring.crpss(b, a)
    assert (ab > 0) == (ba < 0)
    assert (ab == 0) == (a == b) == (ba == 0)


def test_mae_rmse_examples():
    obs = [1.0, 2.0, 3.0]
    assert scoring.mae(obs, obs) == 0 and scoring.rmse(obs, obs) == 0
    assert scoring.mae([0, 0], [1, -1]) == 1.0
    assert scoring.rmse([0, 0], [1, -1]) == 1.0
    assert scoring.mae([0, 0], [3, -1]) == 2.0
    assert scoring.rmse([0, 0], [3, -1]) == pytest.approx(math.sqrt(5))
    with pytest.raises(InvalidArgumentError):
        scoring.mae([1, 2], [1])
    with pytest.raises(InvalidArgumentError):
        scoring.rmse([], [])


# --- intervals -------------------------------------------------------------


def test_interval_spec():
    spec = scoring.IntervalSpec()
    assert spec.level == pytest.approx(0.833333333333)
    assert spec.lower_p == pytest.approx(1 / 12)
    assert spec.lower_p + spec.upper_p == 1.0
    for bad in (0.0, 1.0, 1.5):
        with pytest.raises(InvalidArgumentError):
            scoring.IntervalSpec(bad)


def test_central_interval_examples():
    lo, hi = scoring.central_interval(TruncNormal(10, 1))
    assert lo == pytest.approx(10 - Z_11_12, abs=1e-6)
    assert hi == pytest.approx(10 + Z_11_12, abs=1e-6)
    lo, hi = scoring.central_interval(TruncNormal(5, 1e-9))
    assert lo == pytest.approx(5) and hi == pytest.approx(5)


def test_ensemble_interval_examples():
    assert scoring.ensemble_interval(np.arange(1.0, 12.0)) == (1.0, 11.0)
    assert scoring.ensemble_interval(np.full(11, 4.2)) == (4.2, 4.2)
    with pytest.raises(InvalidArgumentError):
        scoring.ensemble_interval(np.arange(10.0))


@pytest.mark.parametrize("d", [TruncNormal(3.0, 2.0), LogNormalMV(4.0, 3.0), Tgev(5.0, 1.5, 0.1)])
def test_coverage_of_calibrated_forecasts(d):
    rng = np.random.default_rng(3)
    y = dists.quantile(d, rng.uniform(size=5000))
    lo, hi = scoring.central_interval(d)
    assert scoring.coverage(lo, hi, y) == pytest.approx(10 / 12, abs=0.02)


# --- PIT, ranks, KS, histograms ----------------------------------------------


def test_pit_examples():
    d = TruncNormal(4.0, 2.0)
    assert scoring.pit(d, dists.quantile(d, 0.5)) == pytest.approx(0.5, abs=1e-12)
    assert scoring.pit(d, 0.0) == 0.0
    assert scoring.pit(d, -1.0) == 0.0


def test_pit_of_true_law_is_uniform():
    hits = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        d = TruncNormal(3.0, 2.0)
        y = dists.quantile(d, rng.uniform(size=1000))
        hits += scoring.ks_statistic(scoring.pit(d, y)) < 1.36 / math.sqrt(1000)
    assert hits >= 8


def test_verification_rank_examples():
    f = np.arange(1.0, 12.0)
    assert scoring.verification_rank(f, 0.0, 1) == 1
    assert scoring.verification_rank(f, 20.0, 1) == 12
    assert scoring.verification_rank(f, 5.5, 1) == 6
    with pytest.raises(InvalidArgumentError):
        scoring.verification_rank(f[:5], 1.0, 0)


def test_verification_rank_ties_uniform():
    from scipy import stats
    ranks = [scoring.verification_rank(np.full(11, 3.0), 3.0, s) for s in range(2400)]
    counts = np.bincount(ranks, minlength=13)[1:]
    assert counts.sum() == 2400
    assert stats.chisquare(counts).pvalue > 0.001


def test_verification_ranks_vectorised_matches_scalar():
    rng = np.random.default_rng(8)
    f = np.round(rng.uniform(0, 3, (200, 11)))
    y = np.round(rng.uniform(0, 3, 200))
    seeds = np.arange(200) * 7
    vec = scoring.verification_ranks(f, y, seeds)
    assert all(vec[i] == scoring.verification_rank(f[i], y[i], seeds[i]) for i in range(200))


def test_ks_examples():
    n = 99
    assert scoring.ks_statistic(np.arange(1, n + 1) / (n + 1)) == pytest.approx(0.01)
    assert scoring.ks_statistic(np.full(10, 0.5)) == pytest.approx(0.5)
    with pytest.raises(InvalidArgumentError):
        scoring.ks_statistic([])
    with pytest.raises(InvalidArgumentError):
        scoring.ks_statistic([1.2])


def test_ks_of_uniform_draws():
    below = sum(scoring.ks_statistic(np.random.default_rng(s).uniform(size=1000)) < 0.0430
                for s in range(200))
    assert below / 200 >= 0.9


def test_histogram_examples():
    centres = (np.arange(12) + 0.5) / 12
    assert np.array_equal(scoring.histogram(centres, 12), np.ones(12))
    assert np.array_equal(scoring.histogram([], 12), np.zeros(12))
    assert scoring.histogram([0.0, 1.0], 4).tolist() == [1, 0, 0, 1]
    with pytest.raises(InvalidArgumentError):
        scoring.histogram([0.5], 0)


def test_underdispersed_ensemble_has_u_shaped_ranks():
    rng = np.random.default_rng(4)
    y = rng.normal(0, 1, 3000)
    f = rng.normal(0, 0.4, (3000, 11))
    counts = scoring.rank_histogram(scoring.verification_ranks(f, y, np.arange(3000)))
    assert counts.sum() == 3000
    assert min(counts[0], counts[-1]) > counts[1:-1].max()
    assert scoring.end_bin_excess(counts) > 1.0
    assert scoring.end_bin_excess(np.full(12, 5)) == 0.0
