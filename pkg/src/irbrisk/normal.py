"""Standard normal CDF and quantile function.

Both are thin wrappers over ``scipy.special``: ``ndtr`` is evaluated through
``erfc`` and ``ndtri`` is Cephes' rational-approximation quantile, which keeps
absolute error below 1e-12 on (1e-10, 1 - 1e-10).
"""

import numpy as np
from scipy import special

from .exceptions import DomainError

SQRT_2PI = float(np.sqrt(2.0 * np.pi))


def norm_cdf(x):
    """Standard normal CDF; scalar in, float out, array in, array out."""
    out = special.ndtr(x)
    return float(out) if np.ndim(out) == 0 else out


def norm_pdf(x):
    out = np.exp(-0.5 * np.square(x)) / SQRT_2PI
    return float(out) if np.ndim(out) == 0 else out


def norm_ppf(p):
    """Standard normal quantile. Raises :class:`DomainError` outside (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError("normal quantile requires probabilities strictly inside (0, 1)")
    out = special.ndtri(arr)
    return float(out) if out.ndim == 0 else out
