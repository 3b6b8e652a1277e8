import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from windcal import dists, scoring
from windcal.dists import LogNormalMV, Tgev, TruncNormal, take
from windcal.errors import InvalidArgumentError

# reference values from tests/oracles/compute_oracles.py (mpmath quadrature)
ORACLE = {
    "tn_20_1_at_20": 0.23369497725510907,
    "tn_0_1_at_1": 0.20488271525523262,
    "tgev_2_05_01_at_23": 0.15364490751023779,
    "tgev_5_2_m02_at_1": 3.6376639980359956,
    "tgev_3_1_0_at_7": 2.7661013788005509,
    "tn_m479_176_at_3": 2.0449337757492609,
    "tn_m30_1_at_01": 0.053393169187846339,
    "tgev_spike_at_1": 0.26106406959398377,
    "tgev_far_below_at_09": 0.56982844308996089,
    "tgev_gumbel_mean": 1.2602020107893771,
}

locs = st.floats(0.0, 25.0)
scales = st.floats(0.1, 5.0)
shapes = st.floats(-0.27, 0.33)


def ln_from_log(mu, sigma):
    return LogNormalMV.from_log_params(mu, sigma)


# --- cdf / pdf -------------------------------------------------------------


def test_cdf_examples():
    assert dists.cdf(TruncNormal(0, 1), 0.0) == 0.0
    assert dists.cdf(TruncNormal(0, 1), 1.0) == pytest.approx(0.682689492137, abs=1e-10)
    assert dists.cdf(Tgev(0, 1, 0), 0.0) == 0.0
    assert dists.cdf(TruncNormal(3, 1), -2.0) == 0.0


def test_pdf_examples():
    assert dists.pdf(TruncNormal(0, 1), 0.0) == pytest.approx(0.797884560803, abs=1e-10)
    assert dists.pdf(TruncNormal(4, 2), -1.0) == 0.0
    assert dists.pdf(ln_from_log(0.0, 1.0), 1.0) == pytest.approx(0.398942280401, abs=1e-10)


@pytest.mark.parametrize("d", [TruncNormal(2.0, 1.5), ln_from_log(1.0, 0.4), Tgev(3.0, 1.2, 0.15),
                               Tgev(1.0, 2.0, -0.2), Tgev(4.0, 1.0, 0.0)])
def test_pdf_integrates_to_one_and_matches_cdf(d):
    total, _ = integrate.quad(lambda y: dists.pdf(d, y), 0, np.inf, epsabs=1e-12, limit=400)
    assert total == pytest.approx(1.0, abs=1e-6)
    for x in (0.3, 1.7, 4.2):
        h = 1e-5
        num = (dists.cdf(d, x + h) - dists.cdf(d, x - h)) / (2 * h)
        assert dists.pdf(d, x) == pytest.approx(num, rel=1e-6, abs=1e-9)


def test_gumbel_limit_of_cdf():
    x = np.linspace(0, 15, 61)
    base = dists.cdf(Tgev(4.0, 1.5, 0.0), x)
    for eps in (1e-6, -1e-6):
        assert np.max(np.abs(dists.cdf(Tgev(4.0, 1.5, eps), x) - base)) <= 1e-4


def test_gev_cdf_untruncated():
    assert dists.gev_cdf(0.0, 1.0, 0.0, 0.0) == pytest.approx(math.exp(-1.0))
    # below the lower endpoint of a Frechet-type law
    assert dists.gev_cdf(0.0, 1.0, 0.2, -6.0) == 0.0
    assert dists.gev_cdf(0.0, 1.0, 0.2, -5.001) == 0.0
    # exp(-(1.1)^-10) evaluated with mpmath at 50 digits
    assert dists.gev_cdf(0.0, 1.0, 0.1, 1.0) == pytest.approx(0.68008105497049902, rel=1e-13)


# --- quantiles -------------------------------------------------------------


def test_quantile_examples():
    assert dists.quantile(ln_from_log(0.0, 1.0), 0.5) == pytest.approx(1.0, abs=1e-12)
    assert dists.quantile(TruncNormal(0, 1), 0.682689492137) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(InvalidArgumentError):
        dists.quantile(TruncNormal(0, 1), 1.0)
    with pytest.raises(InvalidArgumentError):
        dists.quantile(TruncNormal(0, 1), 0.0)


@given(locs, scales, shapes, st.floats(0.001, 0.999))
def test_cdf_quantile_round_trip(loc, scale, shape, p):
    for d in (TruncNormal(loc, scale), LogNormalMV(max(loc, 0.1), scale ** 2), Tgev(loc, scale, shape)):
        q = dists.quantile(d, p)
        assert dists.cdf(d, q) == pytest.approx(p, abs=1e-8)


@given(locs, scales, shapes)
def test_quantile_monotone(loc, scale, shape):
    p = np.linspace(0.01, 0.99, 25)
    for d in (TruncNormal(loc, scale), LogNormalMV(max(loc, 0.1), scale ** 2), Tgev(loc, scale, shape)):
        q = dists.quantile(d, p)
        assert np.all(np.diff(q) >= 0)


def test_degenerate_tgev_branch():
    # upper endpoint loc - scale/shape = -1 lies below zero: point mass at 0
    d = Tgev(-5.0, 1.0, -0.25)
    assert dists.cdf(d, 0.0) == 1.0
    assert dists.cdf(d, 3.0) == 1.0
    assert dists.quantile(d, 0.3) == 0.0
    assert dists.crps_closed(d, 2.5) == pytest.approx(2.5)
    assert scoring.central_interval(d) == (0.0, 0.0)


def test_tgev_without_mass_above_zero():
    # t(0) underflows: 1 - G(0) is exactly 0 in double precision
    d = Tgev(np.array([-472.87, 2.0]), np.array([0.058, 0.5]), np.array([0.0047, 0.1]))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        q = dists.quantile(d, 0.5)
    assert q[0] == 0.0
    assert dists.cdf(Tgev(2.0, 0.5, 0.1), q[1]) == pytest.approx(0.5, abs=1e-12)
    assert dists.crps_closed(take(d, 0), 1.5) == pytest.approx(1.5)


# --- means -----------------------------------------------------------------


def test_mean_examples():
    assert dists.dist_mean(TruncNormal(0, 1)) == pytest.approx(math.sqrt(2 / math.pi), abs=1e-12)
    assert dists.dist_mean(LogNormalMV(3.2, 1.5)) == 3.2
    assert dists.dist_mean(Tgev(0, 1, 0)) == pytest.approx(ORACLE["tgev_gumbel_mean"], abs=1e-9)


@pytest.mark.parametrize("d", [Tgev(3.0, 1.2, 0.25), Tgev(1.0, 2.0, -0.2), Tgev(0.5, 1.0, 0.1)])
def test_tgev_mean_by_quadrature(d):
    ref, _ = integrate.quad(lambda y: 1.0 - dists.cdf(d, y), 0, np.inf, epsabs=1e-12, limit=400)
    assert dists.dist_mean(d) == pytest.approx(ref, abs=1e-7)


# --- closed-form CRPS ------------------------------------------------------


@pytest.mark.parametrize("d, x, key", [
    (TruncNormal(20, 1), 20.0, "tn_20_1_at_20"),
    (TruncNormal(0, 1), 1.0, "tn_0_1_at_1"),
    (Tgev(2, 0.5, 0.1), 2.3, "tgev_2_05_01_at_23"),
    (Tgev(5, 2, -0.2), 1.0, "tgev_5_2_m02_at_1"),
    (Tgev(3, 1, 0.0), 7.0, "tgev_3_1_0_at_7"),
])
def test_crps_golden_values(d, x, key):
    assert dists.crps_closed(d, x) == pytest.approx(ORACLE[key], abs=1e-9)


def test_crps_extreme_regimes():
    # loc/scale far below zero (the Phi(m)^2 denominator would underflow)
    assert dists.crps_closed(TruncNormal(-479, 17.6), 3.0) == pytest.approx(ORACLE["tn_m479_176_at_3"], abs=1e-9)
    assert dists.crps_closed(TruncNormal(-30, 1), 0.1) == pytest.approx(ORACLE["tn_m30_1_at_01"], abs=1e-12)
    # tiny mass above zero for a heavy-tailed GEV
    assert dists.crps_closed(Tgev(-4.18, 1e-4, 0.198), 1.0) == pytest.approx(ORACLE["tgev_spike_at_1"], abs=1e-9)
    # mass above zero ~ 1e-163, so its square underflows
    far = Tgev(-240.9, 0.071, 0.0093)
    assert dists.crps_closed(far, 0.9) == pytest.approx(ORACLE["tgev_far_below_at_09"], abs=1e-9)
    assert dists.tgev_crps_scalar(-240.9, 0.071, 0.0093, 0.9) == dists.crps_closed(far, 0.9)


def test_tn_crps_continuous_across_scaled_branch():
    below = dists.crps_closed(TruncNormal(-4.0 - 1e-9, 1.0), 0.3)
    above = dists.crps_closed(TruncNormal(-4.0 + 1e-9, 1.0), 0.3)
    assert below == pytest.approx(above, abs=1e-9)


def test_crps_point_mass_limit():
    assert dists.crps_closed(TruncNormal(2.0, 1e-7), 3.0) == pytest.approx(1.0, abs=1e-6)
    assert dists.crps_closed(TruncNormal(-2.0, 1e-3), 3.0) == pytest.approx(3.0, abs=1e-3)


def test_crps_below_zero_adds_distance():
    for d in (TruncNormal(3, 1), LogNormalMV(3, 2), Tgev(3, 1, 0.1)):
        assert dists.crps_closed(d, -1.5) == pytest.approx(dists.crps_closed(d, 0.0) + 1.5, abs=1e-12)


@pytest.mark.parametrize("shape", [1e-6, -1e-6, 5e-7, -3e-7, 1e-12])
def test_tgev_crps_near_gumbel(shape):
    d = Tgev(3.0, 1.5, shape)
    x = 4.1
    ref = scoring.crps_quadrature(lambda y: dists.cdf(d, y), x, scoring.support_hint(d))
    assert dists.crps_closed(d, x) == pytest.approx(ref, abs=1e-8)


@pytest.mark.parametrize("shape", [5e-324, -5e-324, 1e-310, 1e-20, -1e-9, 1e-7])
def test_tgev_tiny_shape_matches_gumbel(shape):
    d, g = Tgev(0.0, 1.0, shape), Tgev(0.0, 1.0, 0.0)
    tol = 2.0 * abs(shape) + 1e-14
    assert dists.cdf(d, 1.0) == pytest.approx(dists.cdf(g, 1.0), abs=tol)
    assert dists.quantile(d, 0.5) == pytest.approx(dists.quantile(g, 0.5), abs=tol)
    assert dists.dist_mean(d) == pytest.approx(ORACLE["tgev_gumbel_mean"], abs=tol + 1e-12)


@given(locs, scales, shapes, st.floats(0.0, 40.0))
def test_crps_nonnegative(loc, scale, shape, x):
    for d in (TruncNormal(loc, scale), LogNormalMV(max(loc, 0.1), scale ** 2), Tgev(loc, scale, shape)):
        assert dists.crps_closed(d, x) >= -1e-12


@given(locs, scales, shapes)
def test_crps_grows_linearly_far_out(loc, scale, shape):
    for d in (TruncNormal(loc, scale), LogNormalMV(max(loc, 0.1), scale ** 2), Tgev(loc, scale, min(shape, 0.2))):
        x1, x2 = 1e4, 2e4
        slope = (dists.crps_closed(d, x2) - dists.crps_closed(d, x1)) / (x2 - x1)
        assert slope == pytest.approx(1.0, abs=1e-3)


def test_crps_vectorised_matches_scalar(rng):
    loc = rng.uniform(0, 20, 50)
    scale = rng.uniform(0.2, 4, 50)
    x = rng.uniform(0, 25, 50)
    vec = dists.crps_closed(TruncNormal(loc, scale), x)
    for i in range(50):
        assert vec[i] == dists.crps_closed(TruncNormal(loc[i], scale[i]), x[i])


# --- log-normal conversion -------------------------------------------------


def test_ln_from_moments_examples():
    mu, s = dists.ln_from_moments(math.sqrt(math.e), math.e * (math.e - 1))
    assert mu == pytest.approx(0.0, abs=1e-12)
    assert s == pytest.approx(1.0, abs=1e-12)
    mu, s = dists.ln_from_moments(1.0, 1e-12)
    assert mu == pytest.approx(-5e-13, rel=1e-6)
    assert s == pytest.approx(1e-6, rel=1e-6)
    with pytest.raises(InvalidArgumentError):
        dists.ln_from_moments(0.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        dists.ln_from_moments(1.0, -1.0)


@given(st.floats(-3, 3), st.floats(0.01, 2.0))
def test_ln_round_trip(mu, sigma):
    d = ln_from_log(mu, sigma)
    mu2, s2 = d.log_params
    assert mu2 == pytest.approx(mu, abs=1e-10)
    assert s2 == pytest.approx(sigma, rel=1e-10)


# --- validation ------------------------------------------------------------


@pytest.mark.parametrize("make", [
    lambda: TruncNormal(1.0, 0.0),
    lambda: TruncNormal(np.nan, 1.0),
    lambda: LogNormalMV(-1.0, 1.0),
    lambda: LogNormalMV(1.0, 0.0),
    lambda: Tgev(1.0, 1.0, 0.34),
    lambda: Tgev(1.0, 1.0, -0.278),
    lambda: Tgev(1.0, -1.0, 0.0),
])
def test_invalid_parameters(make):
    with pytest.raises(InvalidArgumentError):
        make()


def test_take_and_family():
    d = TruncNormal(np.array([1.0, 2.0, 3.0]), 1.0)
    sub = dists.take(d, [2, 0])
    assert np.array_equal(sub.loc, [3.0, 1.0])
    assert np.array_equal(sub.scale, [1.0, 1.0])
    assert dists.family_of(Tgev(1, 1, 0)) == "tgev"
    with pytest.raises(InvalidArgumentError):
        dists.family_of("tn")
