"""
Closed-form ASRF mathematics.

Basel corporate asset correlation, the loss rate of an asymptotic homogeneous
portfolio conditional on the common factor, and the IRB capital formula that
treats PD and LGD as known.  Maturity adjustment is fixed at one.
"""

from dataclasses import dataclass
import math

import numpy as np

from .exceptions import DomainError
from .normal import norm_cdf, norm_ppf

DEFAULT_ALPHA = 0.999

_RHO_LOW = 0.12
_RHO_HIGH = 0.24
_RHO_DECAY = 50.0
_RHO_NORM = -math.expm1(-_RHO_DECAY)  # 1 - e^-50


@dataclass(frozen=True)
class PointEstimates:
    """Central PD and LGD fed to the naive capital formula."""

    pd_hat: float
    lgd_hat: float

    def __post_init__(self):
        if not (math.isfinite(self.pd_hat) and 0.0 < self.pd_hat < 1.0):
            raise DomainError(f"pd_hat must lie in (0, 1), got {self.pd_hat!r}")
        if not (math.isfinite(self.lgd_hat) and 0.0 <= self.lgd_hat <= 1.0):
            raise DomainError(f"lgd_hat must lie in [0, 1], got {self.lgd_hat!r}")

    @property
    def el_naive(self) -> float:
        return self.lgd_hat * self.pd_hat


@dataclass(frozen=True)
class CapitalResult:
    """VaR, expected loss and regulatory capital per unit exposure.

    ``var_se`` and ``el_se`` are Monte Carlo standard errors; they are zero for
    closed-form results.
    """

    var: float
    expected_loss: float
    rc: float
    alpha: float
    var_se: float = 0.0
    el_se: float = 0.0

    @classmethod
    def from_var(cls, var, expected_loss, alpha, var_se=0.0, el_se=0.0):
        return cls(float(var), float(expected_loss), float(var - expected_loss),
                   float(alpha), float(var_se), float(el_se))


def _check_alpha(alpha):
    if not (math.isfinite(alpha) and 0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")


def basel_correlation(pd):
    """Basel asset correlation for corporate, sovereign and bank exposures.

    Accepts a scalar or an array of default probabilities in [0, 1].  The
    result moves from 0.24 at ``pd = 0`` down to 0.12 at ``pd = 1``.
    """
    arr = np.asarray(pd, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError("pd must lie in [0, 1]")
    weight = -np.expm1(-_RHO_DECAY * arr) / _RHO_NORM
    out = _RHO_LOW * weight + _RHO_HIGH * (1.0 - weight)
    return float(out) if out.ndim == 0 else out


def conditional_expected_loss(m, k, lgd, rho):
    """Loss rate of an asymptotic portfolio given the common factor ``m``.

    ``lgd * Phi((k - sqrt(rho) * m) / sqrt(1 - rho))``; broadcasts over arrays.
    """
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(~(rho_arr > 0.0)) or np.any(~(rho_arr < 1.0)):
        raise DomainError("rho must lie in (0, 1)")
    z = (np.asarray(k, dtype=float) - np.sqrt(rho_arr) * np.asarray(m, dtype=float)) / np.sqrt(1.0 - rho_arr)
    out = np.asarray(lgd, dtype=float) * norm_cdf(z)
    return float(out) if np.ndim(out) == 0 else out


def naive_capital(pe: PointEstimates, alpha: float = DEFAULT_ALPHA) -> CapitalResult:
    """IRB capital with PD and LGD taken at their point estimates."""
    _check_alpha(alpha)
    rho = basel_correlation(pe.pd_hat)
    var = conditional_expected_loss(norm_ppf(1.0 - alpha), norm_ppf(pe.pd_hat), pe.lgd_hat, rho)
    return CapitalResult.from_var(var, pe.el_naive, alpha)
