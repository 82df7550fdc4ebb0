"""Gaussian model of estimation noise on the default point k and on LGD."""

from dataclasses import dataclass, replace
from functools import lru_cache
import math

import numpy as np
from scipy import optimize

from .exceptions import DomainError, RootBracketError
from .normal import SQRT_2PI, norm_cdf, norm_ppf

GH_NODES = 128
K_HAT_METHODS = ("quadrature", "taylor3")
_XTOL = 1e-12


@dataclass(frozen=True)
class UncertaintyModel:
    """Bivariate normal law of (k, LGD).

    Attributes
    ----------
    k_hat, sigma_k : mean and standard deviation of the default point.
    lgd_hat, sigma_lgd : mean and standard deviation of LGD.
    rho_lgd_k : Pearson correlation between LGD and k.
    """

    k_hat: float
    sigma_k: float
    lgd_hat: float
    sigma_lgd: float
    rho_lgd_k: float = 0.0

    def __post_init__(self):
        for name in ("k_hat", "sigma_k", "lgd_hat", "sigma_lgd", "rho_lgd_k"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.sigma_k < 0 or self.sigma_lgd < 0:
            raise DomainError("standard deviations must be non-negative")
        if abs(self.rho_lgd_k) > 1:
            raise DomainError("rho_lgd_k must lie in [-1, 1]")
        eig = np.linalg.eigvalsh(self.covariance)
        assert eig.min() >= -1e-12 * max(1.0, eig.max()), "covariance not PSD"

    @property
    def covariance(self) -> np.ndarray:
        """Covariance matrix of (k, LGD)."""
        c = self.rho_lgd_k * self.sigma_k * self.sigma_lgd
        return np.array([[self.sigma_k ** 2, c], [c, self.sigma_lgd ** 2]])

    @property
    def pd_hat(self) -> float:
        """Mean default probability implied by the k law."""
        return expected_pd(self.k_hat, self.sigma_k)

    def with_(self, **changes) -> "UncertaintyModel":
        return replace(self, **changes)


@lru_cache(maxsize=8)
def _hermite_e(n):
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return x, w / SQRT_2PI


def expected_pd(k_hat: float, sigma_k: float, nodes: int = GH_NODES) -> float:
    """E[Phi(k)] for k ~ N(k_hat, sigma_k^2), by Gauss-Hermite quadrature."""
    if not (math.isfinite(k_hat) and math.isfinite(sigma_k)):
        raise DomainError("k_hat and sigma_k must be finite")
    if sigma_k < 0:
        raise DomainError("sigma_k must be non-negative")
    if sigma_k == 0:
        return norm_cdf(k_hat)
    x, w = _hermite_e(nodes)
    return float(np.dot(w, norm_cdf(k_hat + sigma_k * x)))


def _taylor3_pd(k, sigma_k):
    return norm_cdf(k) - 0.5 * sigma_k ** 2 * k / SQRT_2PI * math.exp(-0.5 * k * k)


def infer_k_hat(pd_hat: float, sigma_k: float, method: str = "quadrature") -> float:
    """Mean default point consistent with a mean PD under k noise of size ``sigma_k``.

    ``quadrature`` inverts :func:`expected_pd`; ``taylor3`` inverts its
    third-order expansion in ``sigma_k``.  Both use Brent's method on
    ``[Phi^-1(pd_hat) - 5 sigma_k - 1, Phi^-1(pd_hat) + 5 sigma_k + 1]``.
    """
    if method not in K_HAT_METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {K_HAT_METHODS}")
    if not (math.isfinite(pd_hat) and 0.0 < pd_hat < 1.0):
        raise DomainError(f"pd_hat must lie in (0, 1), got {pd_hat!r}")
    if not (math.isfinite(sigma_k) and sigma_k >= 0):
        raise DomainError(f"sigma_k must be non-negative, got {sigma_k!r}")
    k0 = norm_ppf(pd_hat)
    if sigma_k == 0:
        return k0

    if method == "quadrature":
        def f(k):
            return expected_pd(k, sigma_k) - pd_hat
    else:
        def f(k):
            return _taylor3_pd(k, sigma_k) - pd_hat

    lo, hi = k0 - 5 * sigma_k - 1, k0 + 5 * sigma_k + 1
    f_lo, f_hi = f(lo), f(hi)
    if not (f_lo < 0 < f_hi):
        raise RootBracketError(
            f"no root for pd_hat={pd_hat} sigma_k={sigma_k} ({method}) in [{lo:.4f}, {hi:.4f}]: "
            f"f(lo)={f_lo:.3e}, f(hi)={f_hi:.3e}"
        )
    return float(optimize.brentq(f, lo, hi, xtol=_XTOL, rtol=4 * np.finfo(float).eps))


def cholesky_2x2(sigma_a, sigma_b, rho):
    """Lower Cholesky factor of a 2x2 covariance; valid also when |rho| = 1."""
    return np.array([
        [sigma_a, 0.0],
        [rho * sigma_b, sigma_b * math.sqrt(max(0.0, 1.0 - rho * rho))],
    ])


def sample_parameters(model: UncertaintyModel, stream: np.random.Generator, count: int,
                      lgd_clamp: bool = False):
    """Draw ``count`` correlated (k, lgd) pairs.

    Returns two float arrays.  With ``lgd_clamp`` pairs whose LGD falls outside
    [0, 1] are redrawn until none are left, which samples the truncated law.
    """
    if count < 1:
        raise ValueError("count must be positive")
    chol = cholesky_2x2(model.sigma_k, model.sigma_lgd, model.rho_lgd_k)
    z = stream.standard_normal((2, count))
    k = model.k_hat + chol[0, 0] * z[0]
    lgd = model.lgd_hat + chol[1, 0] * z[0] + chol[1, 1] * z[1]
    if lgd_clamp:
        if not 0.0 <= model.lgd_hat <= 1.0 and model.sigma_lgd == 0:
            raise DomainError("lgd_hat outside [0, 1] with zero sigma_lgd cannot be clamped")
        bad = np.flatnonzero((lgd < 0.0) | (lgd > 1.0))
        while bad.size:
            z = stream.standard_normal((2, bad.size))
            k[bad] = model.k_hat + chol[0, 0] * z[0]
            lgd[bad] = model.lgd_hat + chol[1, 0] * z[0] + chol[1, 1] * z[1]
            bad = bad[(lgd[bad] < 0.0) | (lgd[bad] > 1.0)]
    return k, lgd
