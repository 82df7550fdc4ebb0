"""
Statistical checks on annual PD/LGD series.

Shapiro-Wilk follows Royston's approximation (AS R94): polynomial corrections
for the two extreme weights, normalized Blom scores for the rest, and a
log-normal transform of 1 - W for the p-value (3 <= n <= 5000).  The
bivariate composite test is Royston's H statistic, which turns each marginal
W into a chi-square(1) contribution and pools them with an equivalent number
of degrees of freedom accounting for the correlation between margins.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np
from scipy import stats as sps

from .exceptions import DegenerateSampleError, DomainError, SampleSizeError, ValidationError
from .normal import norm_cdf, norm_ppf

CI_Z = 1.96
SW_MIN_N = 3
SW_MAX_N = 5000

# AS R94 polynomial coefficients in u = 1/sqrt(n)
_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
# p-value transform, n in [4, 11]: polynomials in n
_G_SMALL = (-2.273, 0.459)
_M_SMALL = (0.5440, -0.39978, 0.025054, -6.714e-4)
_S_SMALL = (1.3822, -0.77857, 0.062767, -0.0020322)
# p-value transform, n >= 12: polynomials in log(n)
_M_LARGE = (-1.5861, -0.31082, -0.083751, 0.0038915)
_S_LARGE = (-0.4803, -0.082676, 0.0030302)


def _poly(coef, x):
    return sum(c * x ** i for i, c in enumerate(coef))


@dataclass(frozen=True)
class SampleSeries:
    """An ordered series of annual observations."""

    label: str
    values: np.ndarray
    years: tuple | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size < SW_MIN_N:
            raise SampleSizeError(f"{self.label}: need at least {SW_MIN_N} observations, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValidationError(f"{self.label}: values must be finite")
        if self.years is not None and len(self.years) != v.size:
            raise ValidationError(f"{self.label}: years and values differ in length")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class NormalityTestResult:
    """Outcome of a univariate or composite normality test.

    For the composite test ``w_stat`` is the smaller marginal W and the pooled
    statistic sits in ``h_stat`` with ``edf`` degrees of freedom.
    """

    w_stat: float
    p_value: float
    n: int
    kind: str
    h_stat: float | None = None
    edf: float | None = None
    marginal_w: tuple = field(default=())


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    ci_low: float
    ci_high: float
    p_value: float
    n: int


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r2: float
    adj_r2: float
    slope_p: float
    n: int


def _values(series):
    if isinstance(series, SampleSeries):
        return series.values
    return np.asarray(series, dtype=float).ravel()


def describe(series) -> dict:
    """min, max, mean, median and sample (n-1) standard deviation."""
    x = _values(series)
    if x.size == 0:
        raise ValidationError("empty series")
    return {
        "min": float(x.min()),
        "max": float(x.max()),
        "mean": float(x.mean()),
        "median": float(np.median(x)),
        "std": float(x.std(ddof=1)) if x.size > 1 else 0.0,
    }


def probit_transform(probabilities):
    """Default points k = Phi^-1(PD), element-wise."""
    return norm_ppf(np.asarray(probabilities, dtype=float))


@lru_cache(maxsize=64)
def _sw_weights(n):
    """Antisymmetric Shapiro-Wilk weights, ascending with the order statistics."""
    if n == 3:
        return np.array([-math.sqrt(0.5), 0.0, math.sqrt(0.5)])
    i = np.arange(1, n + 1)
    m = norm_ppf((i - 0.375) / (n + 0.25))
    summ2 = float(np.dot(m, m))
    u = 1.0 / math.sqrt(n)
    a = np.empty(n)
    an = m[-1] / math.sqrt(summ2) + _poly(_C1, u)
    if n > 5:
        an1 = m[-2] / math.sqrt(summ2) + _poly(_C2, u)
        phi = (summ2 - 2 * m[-1] ** 2 - 2 * m[-2] ** 2) / (1 - 2 * an ** 2 - 2 * an1 ** 2)
        a[:] = m / math.sqrt(phi)
        a[-1], a[-2], a[0], a[1] = an, an1, -an, -an1
    else:
        phi = (summ2 - 2 * m[-1] ** 2) / (1 - 2 * an ** 2)
        a[:] = m / math.sqrt(phi)
        a[-1], a[0] = an, -an
    return a


def _sw_w(x):
    x = np.sort(x)
    centered = x - x.mean()
    ss = float(np.dot(centered, centered))
    if ss <= 0.0 or x[-1] - x[0] <= 1e-12 * max(abs(x[0]), abs(x[-1]), 1e-300):
        raise DegenerateSampleError("Shapiro-Wilk needs a sample with positive variance")
    w = float(np.dot(_sw_weights(x.size), centered)) ** 2 / ss
    return min(w, 1.0)


def _sw_z(w, n):
    """Royston's normalizing transform: W -> approximately standard normal z."""
    if n <= 11:
        gamma = _poly(_G_SMALL, n)
        if w >= 1.0:
            return -math.inf
        y = math.log(1.0 - w)
        if y >= gamma:
            return math.inf
        return (-math.log(gamma - y) - _poly(_M_SMALL, n)) / math.exp(_poly(_S_SMALL, n))
    ln = math.log(n)
    if w >= 1.0:
        return -math.inf
    return (math.log(1.0 - w) - _poly(_M_LARGE, ln)) / math.exp(_poly(_S_LARGE, ln))


def _sw_p(w, n):
    if n == 3:
        p = 6.0 / math.pi * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        return min(max(p, 0.0), 1.0)
    return 1.0 - norm_cdf(_sw_z(w, n))


def shapiro_wilk(series) -> NormalityTestResult:
    """Shapiro-Wilk test of univariate normality."""
    x = _values(series)
    n = x.size
    if not SW_MIN_N <= n <= SW_MAX_N:
        raise SampleSizeError(f"Shapiro-Wilk supports {SW_MIN_N} <= n <= {SW_MAX_N}, got {n}")
    w = _sw_w(x)
    return NormalityTestResult(w, _sw_p(w, n), n, "univariate", marginal_w=(w,))


def royston_bivariate(a, b) -> NormalityTestResult:
    """Royston's H test of bivariate normality on two paired series."""
    x, y = _values(a), _values(b)
    if x.size != y.size:
        raise ValidationError("series must have equal length")
    n = x.size
    if not SW_MIN_N <= n <= SW_MAX_N:
        raise SampleSizeError(f"Royston test supports {SW_MIN_N} <= n <= {SW_MAX_N}, got {n}")
    ws = (_sw_w(x), _sw_w(y))
    if n == 3:
        # AS R94's z transform starts at n = 4; map the exact p-value back to z
        zs = [norm_ppf(min(max(1.0 - _sw_p(w, n), 1e-16), 1 - 1e-16)) for w in ws]
    else:
        zs = [_sw_z(w, n) for w in ws]
    contrib = [norm_ppf(max(0.5 * norm_cdf(-z), 1e-300)) ** 2 for z in zs]

    r = float(np.corrcoef(x, y)[0, 1])
    ln = math.log(n)
    mu, lam = 0.715, 5.0
    nu = 0.21364 + 0.015124 * ln ** 2 - 0.0018034 * ln ** 3
    c = math.copysign(abs(r) ** lam, r) * (1.0 - mu / nu * (1.0 - r) ** mu)
    p_dim = 2
    edf = p_dim / (1.0 + (p_dim - 1) * c)
    h = edf * sum(contrib) / p_dim
    p = float(sps.chi2.sf(h, edf))
    return NormalityTestResult(min(ws), p, n, "bivariate_composite", h_stat=h, edf=edf, marginal_w=ws)


def fisher_ci(r: float, n: int, z: float = CI_Z):
    """Fisher z confidence interval tanh(atanh(r) +- z / sqrt(n - 3))."""
    if n < 4:
        raise SampleSizeError("Fisher interval needs n >= 4")
    if not -1.0 <= r <= 1.0:
        raise DomainError(f"correlation must lie in [-1, 1], got {r!r}")
    if abs(r) == 1.0:
        return r, r
    zr = math.atanh(r)
    half = z / math.sqrt(n - 3)
    return math.tanh(zr - half), math.tanh(zr + half)


def correlation_p_value(r: float, n: int) -> float:
    """Two-sided t-test p-value of zero correlation."""
    if abs(r) >= 1.0:
        return 0.0
    t = r * math.sqrt(n - 2) / math.sqrt(1.0 - r * r)
    return float(2.0 * sps.t.sf(abs(t), n - 2))


def correlation_from_r(r: float, n: int) -> CorrelationResult:
    lo, hi = fisher_ci(r, n)
    return CorrelationResult(r, lo, hi, correlation_p_value(r, n), n)


def pearson(a, b) -> CorrelationResult:
    """Pearson correlation with 95% Fisher interval and t-test p-value."""
    x, y = _values(a), _values(b)
    if x.size != y.size:
        raise ValidationError("series must have equal length")
    if x.size < 4:
        raise SampleSizeError("pearson needs n >= 4")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(np.dot(dx, dx)), float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateSampleError("pearson needs non-constant series")
    r = float(np.clip(np.dot(dx, dy) / math.sqrt(sxx * syy), -1.0, 1.0))
    return correlation_from_r(r, x.size)


def linear_fit(x, y) -> RegressionResult:
    """Ordinary least squares of y on x."""
    xv, yv = _values(x), _values(y)
    if xv.size != yv.size:
        raise ValidationError("series must have equal length")
    n = xv.size
    if n < 3:
        raise SampleSizeError("linear_fit needs n >= 3")
    dx = xv - xv.mean()
    sxx = float(np.dot(dx, dx))
    if sxx == 0.0:
        raise DegenerateSampleError("linear_fit needs non-constant x")
    dy = yv - yv.mean()
    slope = float(np.dot(dx, dy)) / sxx
    intercept = float(yv.mean() - slope * xv.mean())
    resid = dy - slope * dx
    sse, syy = float(np.dot(resid, resid)), float(np.dot(dy, dy))
    r2 = 1.0 - sse / syy if syy > 0 else 1.0
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - 2)
    if sse == 0.0:
        slope_p = 0.0 if slope != 0.0 else 1.0
    else:
        se = math.sqrt(sse / (n - 2) / sxx)
        slope_p = float(2.0 * sps.t.sf(abs(slope / se), n - 2))
    return RegressionResult(slope, intercept, r2, adj, slope_p, n)


def qq_points(series, standardize: bool = False) -> np.ndarray:
    """Normal Q-Q coordinates with Blom plotting positions.

    Returns an ``(n, 2)`` array of (theoretical quantile, sorted sample value);
    ``standardize`` rescales the sample by its mean and (n-1) std.
    """
    x = np.sort(_values(series))
    n = x.size
    if n == 0:
        raise ValidationError("empty series")
    theo = norm_ppf((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    theo = np.atleast_1d(theo)
    if standardize:
        if n < 2 or x.std(ddof=1) == 0.0:
            raise DegenerateSampleError("cannot standardize a constant series")
        x = (x - x.mean()) / x.std(ddof=1)
    return np.column_stack([theo, x])
