import math

import numpy as np
import pytest
import scipy.stats as sps
from hypothesis import given, settings, strategies as st

from irbrisk.exceptions import DegenerateSampleError, DomainError, SampleSizeError, ValidationError
from irbrisk.normal import norm_ppf
from irbrisk.stats import (
    SampleSeries,
    correlation_from_r,
    describe,
    fisher_ci,
    linear_fit,
    pearson,
    probit_transform,
    qq_points,
    royston_bivariate,
    shapiro_wilk,
)

# gamma(3) sample, n = 37; W and p from scipy.stats.shapiro (Fortran swilk) before the build
GAMMA_FIXTURE = [4.7243, 5.0118, 0.9776, 4.335, 6.8498, 3.8538, 1.236, 2.7473, 0.9913, 1.0652, 4.4299, 1.8861,
                 1.7739, 1.7172, 2.3205, 2.0226, 2.7605, 3.0511, 1.7231, 2.0618, 5.1738, 2.0824, 0.4983, 1.1805,
                 6.9665, 1.2176, 4.114, 2.6953, 5.3129, 1.4873, 3.7774, 1.7894, 1.762, 1.9958, 1.5613, 3.4084,
                 1.5309]
GAMMA_W, GAMMA_P = 0.8967353048108002, 0.0023948335410296814
PROBIT_0159 = -2.1469156180927325  # bisection on 0.5 * erfc(-x / sqrt 2)


def blom_scores(n):
    return norm_ppf((np.arange(1, n + 1) - 0.375) / (n + 0.25))


def correlated_pair(r, n, seed):
    """Sample whose Pearson correlation is exactly r."""
    z = np.random.default_rng(seed).standard_normal((n, 2))
    z -= z.mean(0)
    z = z @ np.linalg.inv(np.linalg.cholesky(z.T @ z / (n - 1))).T
    z = z @ np.linalg.cholesky([[1, r], [r, 1]]).T
    return z[:, 0], z[:, 1]


# --- describe / probit ----------------------------------------------------------


def test_describe_constant():
    d = describe([0.3] * 5)
    assert d == {"min": 0.3, "max": 0.3, "mean": pytest.approx(0.3), "median": 0.3, "std": pytest.approx(0.0)}


def test_describe_hand_values():
    d = describe(SampleSeries("x", [1.0, 2.0, 3.0]))
    assert (d["mean"], d["median"], d["std"]) == (2.0, 2.0, 1.0)
    assert describe([4.0, 1.0, 3.0, 2.0])["median"] == 2.5


def test_probit_values():
    assert probit_transform([0.5])[0] == 0.0
    assert probit_transform([0.0159])[0] == pytest.approx(PROBIT_0159, abs=1e-9)
    lo, hi = probit_transform([0.001, 0.999])
    assert lo == pytest.approx(-3.0902, abs=1e-4) and lo == pytest.approx(-hi, abs=1e-12)


@pytest.mark.parametrize("bad", [[0.0], [1.0], [0.2, 1.3]])
def test_probit_domain(bad):
    with pytest.raises(DomainError):
        probit_transform(bad)


def test_series_validation():
    with pytest.raises(SampleSizeError):
        SampleSeries("x", [1.0, 2.0])
    with pytest.raises(ValidationError):
        SampleSeries("x", [1.0, 2.0, math.nan])
    with pytest.raises(ValidationError):
        SampleSeries("x", [1.0, 2.0, 3.0], years=(1, 2))


# --- Shapiro-Wilk ---------------------------------------------------------------


def test_sw_normal_scores():
    r = shapiro_wilk(blom_scores(37))
    assert r.w_stat >= 0.99 and r.p_value >= 0.9
    assert r.kind == "univariate" and r.n == 37


def test_sw_frozen_reference():
    r = shapiro_wilk(GAMMA_FIXTURE)
    assert r.w_stat == pytest.approx(GAMMA_W, abs=1e-3)
    assert r.p_value == pytest.approx(GAMMA_P, abs=1e-2)


@pytest.mark.parametrize("n", [3, 4, 5, 6, 8, 11, 12, 20, 37, 200, 5000])
@pytest.mark.parametrize("dist", ["normal", "exponential", "uniform"])
def test_sw_against_reference(n, dist):
    rng = np.random.default_rng(n)
    x = getattr(rng, dist if dist != "normal" else "standard_normal")(size=n)
    ref = sps.shapiro(x)
    r = shapiro_wilk(x)
    assert r.w_stat == pytest.approx(ref.statistic, abs=1e-6)
    assert r.p_value == pytest.approx(ref.pvalue, abs=2e-3)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(1e-3, 1e3), b=st.floats(-1e3, 1e3), seed=st.integers(0, 10 ** 6))
def test_sw_affine_invariance(a, b, seed):
    x = np.random.default_rng(seed).standard_normal(37)
    assert shapiro_wilk(a * x + b).w_stat == pytest.approx(shapiro_wilk(x).w_stat, abs=1e-10)


def test_sw_errors():
    with pytest.raises(SampleSizeError):
        shapiro_wilk([1.0, 2.0])
    with pytest.raises(SampleSizeError):
        shapiro_wilk(np.arange(5001.0))
    with pytest.raises(DegenerateSampleError):
        shapiro_wilk([2.0] * 10)


def test_sw_power_against_uniform():
    rng = np.random.default_rng(7)
    rej = np.mean([shapiro_wilk(rng.random(37)).p_value < 0.05 for _ in range(10_000)])
    assert rej > 0.2


def test_sw_null_calibration():
    rng = np.random.default_rng(8)
    p = np.array([shapiro_wilk(rng.standard_normal(37)).p_value for _ in range(10_000)])
    assert 0.04 <= np.mean(p < 0.05) <= 0.06
    assert sps.kstest(p, "uniform").statistic <= 0.02


# --- Royston bivariate -------------------------------------------------------------


def test_royston_perfect_margins():
    s = blom_scores(37)
    r = royston_bivariate(s, np.random.default_rng(0).permutation(s))
    assert r.p_value >= 0.9 and r.kind == "bivariate_composite"
    assert r.w_stat == min(r.marginal_w)


def test_royston_null_calibration():
    rng = np.random.default_rng(9)
    L = np.linalg.cholesky([[1, 0.7], [0.7, 1]])
    p = np.array([royston_bivariate(*(L @ rng.standard_normal((2, 37)))).p_value for _ in range(10_000)])
    assert abs(np.mean(p < 0.05) - 0.05) <= 0.015


def test_royston_power_exponential_margin():
    rng = np.random.default_rng(10)
    rej = np.mean([royston_bivariate(rng.exponential(size=37), rng.standard_normal(37)).p_value < 0.05
                   for _ in range(2000)])
    assert rej >= 0.5


def test_royston_edf_bounds():
    x, y = correlated_pair(0.0, 37, 1)
    assert royston_bivariate(x, y).edf == pytest.approx(2.0, abs=0.05)
    x, y = correlated_pair(0.99, 37, 1)
    assert royston_bivariate(x, y).edf < 1.2


def test_royston_errors():
    with pytest.raises(ValidationError):
        royston_bivariate([1.0, 2.0, 3.0], [1.0, 2.0, 3.0, 4.0])
    with pytest.raises(SampleSizeError):
        royston_bivariate([1.0, 2.0], [1.0, 3.0])


# --- Pearson / Fisher -----------------------------------------------------------------


@pytest.mark.parametrize("r,lo,hi", [(0.717, 0.511, 0.844), (0.599, 0.342, 0.773)])
def test_fisher_ci_published(r, lo, hi):
    got = fisher_ci(r, 37)
    assert got == pytest.approx((lo, hi), abs=1e-3)


def test_pearson_p_value_published():
    assert correlation_from_r(0.717, 37).p_value == pytest.approx(6.12e-7, rel=0.1)
    assert correlation_from_r(0.599, 37).p_value == pytest.approx(8.85e-5, rel=0.1)


def test_pearson_on_fixture():
    x, y = correlated_pair(0.717, 37, 3)
    c = pearson(x, y)
    assert c.r == pytest.approx(0.717, abs=1e-12)
    assert (c.ci_low, c.ci_high) == pytest.approx((0.511, 0.844), abs=1e-3)
    ref = sps.pearsonr(x, y)
    assert c.p_value == pytest.approx(ref.pvalue, rel=1e-8)


def test_pearson_perfect_line():
    x = np.arange(10.0)
    c = pearson(x, 3 * x - 2)
    assert c.r == pytest.approx(1.0) and c.p_value < 1e-12


@settings(max_examples=50, deadline=None)
@given(r=st.floats(-0.99, 0.99), n=st.integers(4, 500))
def test_fisher_symmetry(r, n):
    lo, hi = fisher_ci(r, n)
    assert lo <= r <= hi
    assert math.atanh(r) - math.atanh(lo) == pytest.approx(math.atanh(hi) - math.atanh(r), abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(1e-3, 1e3), b=st.floats(-10, 10), c=st.floats(1e-3, 1e3), seed=st.integers(0, 10 ** 6))
def test_pearson_affine_invariance(a, b, c, seed):
    # shifts are scaled with each margin so the inputs keep their significant digits
    x, y = np.random.default_rng(seed).standard_normal((2, 30))
    assert pearson(a * x + a * b, c * y - c * b).r == pytest.approx(pearson(x, y).r, abs=1e-12)


def test_pearson_ci_coverage():
    rng = np.random.default_rng(11)
    L = np.linalg.cholesky([[1, 0.7], [0.7, 1]])
    hits = 0
    for _ in range(10_000):
        c = pearson(*(L @ rng.standard_normal((2, 37))))
        hits += c.ci_low <= 0.7 <= c.ci_high
    assert abs(hits / 10_000 - 0.95) <= 0.015


def test_pearson_errors():
    with pytest.raises(DegenerateSampleError):
        pearson([1.0, 1.0, 1.0, 1.0], [1.0, 2.0, 3.0, 4.0])
    with pytest.raises(SampleSizeError):
        pearson([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])


# --- regression -------------------------------------------------------------------------


def test_fit_exact_line():
    f = linear_fit([0.0, 1.0, 2.0, 5.0], [1.0, 3.0, 5.0, 11.0])
    assert (f.slope, f.intercept, f.adj_r2) == pytest.approx((2.0, 1.0, 1.0))


def test_fit_hand_ols():
    f = linear_fit([0.0, 1.0, 2.0], [0.0, 1.0, 1.0])
    assert f.slope == pytest.approx(0.5) and f.intercept == pytest.approx(1 / 6)


def test_fit_adjusted_r2_published():
    x, y = correlated_pair(0.717, 37, 4)
    f = linear_fit(x, y)
    assert f.adj_r2 == pytest.approx(0.500, abs=0.005)
    assert f.adj_r2 <= f.r2 <= 1
    ref = sps.linregress(x, y)
    assert f.slope_p == pytest.approx(ref.pvalue, rel=1e-8)


def test_fit_constant_x():
    with pytest.raises(DegenerateSampleError):
        linear_fit([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


# --- Q-Q -------------------------------------------------------------------------------


def test_qq_single_point():
    assert qq_points(np.array([3.0]))[0, 0] == 0.0


def test_qq_plotting_positions():
    pts = qq_points([4.0, 1.0, 3.0, 2.0])
    expected = norm_ppf(np.array([0.625, 1.625, 2.625, 3.625]) / 4.25)
    np.testing.assert_allclose(pts[:, 0], expected, rtol=1e-12)
    np.testing.assert_allclose(pts[:, 1], [1, 2, 3, 4])
    np.testing.assert_allclose(norm_ppf([0.147, 0.382, 0.618, 0.853]), pts[:, 0], atol=2e-3)


def test_qq_identity_after_standardization():
    s = blom_scores(37)
    s = (s - s.mean()) / s.std(ddof=1)
    pts = qq_points(s, standardize=True)
    np.testing.assert_allclose(pts[:, 1], (pts[:, 0] - pts[:, 0].mean()) / pts[:, 0].std(ddof=1), atol=1e-6)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60))
def test_qq_monotone(values):
    pts = qq_points(values)
    assert np.all(np.diff(pts[:, 0]) > 0) and np.all(np.diff(pts[:, 1]) >= 0)
