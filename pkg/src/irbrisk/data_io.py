"""
Annual rate panels, run configuration files and synthetic fixtures.

CSV schema (UTF-8, header required)::

    year,lgd_rate,pd_all_ratings,pd_speculative

Rates are decimals (``0.5526``) or percents (``55.26%``).  A PD column may be
left empty when only the other grade is analysed.
"""

from dataclasses import dataclass, fields, replace
import csv
import logging
import math
import warnings

import numpy as np

from .exceptions import ValidationError
from .normal import norm_cdf, norm_ppf

log = logging.getLogger(__name__)

COLUMNS = ("year", "lgd_rate", "pd_all_ratings", "pd_speculative")
GRADES = {"ar": "pd_all_ratings", "sg": "pd_speculative"}
GRADE_ALIASES = {"ar": "ar", "all_ratings": "ar", "sg": "sg", "speculative": "sg"}

# Published moments of the 1983-2019 Moody's series (37 annual observations).
PUBLISHED = {
    "ar": {"pd_hat": 0.0159, "lgd_hat": 0.5526, "sigma_lgd": 0.1025,
           "k_hat": -2.208, "sigma_k": 0.237, "rho_lgd_k": 0.717, "n": 37},
    "sg": {"pd_hat": 0.0430, "lgd_hat": 0.5526, "sigma_lgd": 0.1025,
           "k_hat": -1.778, "sigma_k": 0.268, "rho_lgd_k": 0.599, "n": 37},
}


class PanelWarning(UserWarning):
    pass


def normalize_grade(grade: str) -> str:
    try:
        return GRADE_ALIASES[grade.lower()]
    except (KeyError, AttributeError):
        raise ValidationError(f"unknown grade {grade!r}; expected 'ar' or 'sg'") from None


@dataclass(frozen=True)
class RatePanel:
    """Annual LGD and default rates.  Missing PD entries are NaN."""

    years: np.ndarray
    lgd_rate: np.ndarray
    pd_all_ratings: np.ndarray
    pd_speculative: np.ndarray
    source_label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "years", np.asarray(self.years, dtype=np.int64))
        for name in COLUMNS[1:]:
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        _validate(self)

    def __len__(self):
        return self.years.size

    def pd(self, grade: str) -> np.ndarray:
        return getattr(self, GRADES[normalize_grade(grade)])

    def grade_arrays(self, grade: str):
        """(years, lgd, pd) restricted to rows where the grade's PD is present."""
        pd = self.pd(grade)
        ok = ~np.isnan(pd)
        if not ok.any():
            raise ValidationError(f"panel has no {normalize_grade(grade).upper()} default rates")
        return self.years[ok], self.lgd_rate[ok], pd[ok]


def _validate(panel):
    n = panel.years.size
    if n == 0:
        raise ValidationError("empty panel")
    if any(getattr(panel, c).shape != (n,) for c in COLUMNS[1:]):
        raise ValidationError("panel columns must be one-dimensional and of equal length")
    uniq, counts = np.unique(panel.years, return_counts=True)
    if (counts > 1).any():
        dups = uniq[counts > 1].tolist()
        raise ValidationError(f"duplicate years: {dups}")
    if np.any(np.diff(panel.years) <= 0):
        raise ValidationError("years must be strictly increasing")
    bad = []
    for name in COLUMNS[1:]:
        v = getattr(panel, name)
        present = ~np.isnan(v) if name != "lgd_rate" else np.ones(n, bool)
        off = present & ~((v >= 0.0) & (v <= 1.0))
        bad += [f"year {panel.years[i]}: {name}={float(v[i])!r}" for i in np.flatnonzero(off)]
    if bad:
        raise ValidationError("rates outside [0, 1]: " + "; ".join(bad))
    gaps = np.flatnonzero(np.diff(panel.years) > 1)
    if gaps.size:
        warnings.warn(f"gaps in years after {panel.years[gaps].tolist()}", PanelWarning, stacklevel=3)
    both = ~np.isnan(panel.pd_all_ratings) & ~np.isnan(panel.pd_speculative)
    inverted = np.flatnonzero(both & (panel.pd_speculative < panel.pd_all_ratings))
    if inverted.size:
        warnings.warn(f"speculative PD below all-ratings PD in years {panel.years[inverted].tolist()}",
                      PanelWarning, stacklevel=3)


def parse_rate(text: str) -> float:
    """Decimal or percent string to a decimal; empty string is NaN."""
    s = text.strip()
    if not s:
        return math.nan
    if s.endswith("%"):
        return float(s[:-1]) / 100.0
    return float(s)


def load_panel(path) -> RatePanel:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValidationError(f"{path}: missing header")
        header = [h.strip() for h in header]
        if tuple(header) != COLUMNS:
            raise ValidationError(f"{path}: header must be {','.join(COLUMNS)}, got {','.join(header)}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(COLUMNS):
                raise ValidationError(f"{path}:{lineno}: expected {len(COLUMNS)} fields, got {len(rec)}")
            try:
                year = int(rec[0])
                lgd = parse_rate(rec[1])
                vals = [parse_rate(c) for c in rec[2:]]
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            if math.isnan(lgd):
                raise ValidationError(f"{path}:{lineno}: lgd_rate is required")
            rows.append((year, lgd, *vals))
    if not rows:
        raise ValidationError(f"{path}: empty panel")
    cols = list(zip(*rows))
    return RatePanel(np.array(cols[0]), np.array(cols[1]), np.array(cols[2]), np.array(cols[3]),
                     source_label=str(path))


def write_panel(panel: RatePanel, path) -> None:
    """Write a panel; ``repr`` keeps every float bit-exact on reload."""
    def cell(v):
        return "" if math.isnan(v) else repr(float(v))

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for i in range(len(panel)):
            w.writerow([int(panel.years[i]), cell(panel.lgd_rate[i]),
                        cell(panel.pd_all_ratings[i]), cell(panel.pd_speculative[i])])


def _exact_gaussian(rng, n, corr, method="normal_scores"):
    """n rows whose sample mean is 0 and sample covariance (ddof=1) equals ``corr``.

    ``normal_scores`` reorders Blom scores by the ranks of a correlated
    Gaussian draw (Iman-Conover), so every margin starts as an ideal normal
    sample; ``random`` uses the raw draw.  Both are then re-standardized.
    """
    d = corr.shape[0]
    z = rng.standard_normal((n, d)) @ np.linalg.cholesky(corr).T
    if method == "normal_scores":
        scores = norm_ppf((np.arange(1, n + 1) - 0.375) / (n + 0.25))
        z = scores[np.argsort(np.argsort(z, axis=0), axis=0)]
    elif method != "random":
        raise ValidationError(f"unknown method {method!r}; expected 'normal_scores' or 'random'")
    z = z - z.mean(axis=0)
    cov = z.T @ z / (n - 1)
    z = z @ np.linalg.inv(np.linalg.cholesky(cov)).T
    return z @ np.linalg.cholesky(corr).T


def synthesize_panel(target_moments: dict | None = None, correlation: dict | None = None,
                     seed: int = 0, n: int = 37, start_year: int = 1983,
                     method: str = "normal_scores") -> RatePanel:
    """Panel whose LGD and k = Phi^-1(PD) have exactly the requested sample moments.

    ``target_moments`` maps ``lgd``, ``k_ar`` and ``k_sg`` to ``(mean, std)``;
    ``correlation`` maps ``lgd_k_ar``, ``lgd_k_sg`` and ``k_ar_k_sg`` to sample
    Pearson correlations.  Defaults are the published moments.  ``method``
    is passed to the Gaussian generator (see :func:`_exact_gaussian`).
    """
    tm = {
        "lgd": (PUBLISHED["ar"]["lgd_hat"], PUBLISHED["ar"]["sigma_lgd"]),
        "k_ar": (PUBLISHED["ar"]["k_hat"], PUBLISHED["ar"]["sigma_k"]),
        "k_sg": (PUBLISHED["sg"]["k_hat"], PUBLISHED["sg"]["sigma_k"]),
    }
    tm.update(target_moments or {})
    cm = {"lgd_k_ar": PUBLISHED["ar"]["rho_lgd_k"], "lgd_k_sg": PUBLISHED["sg"]["rho_lgd_k"],
          "k_ar_k_sg": 0.9}
    cm.update(correlation or {})

    for key, (mean, std) in tm.items():
        if not (math.isfinite(mean) and math.isfinite(std) and std > 0):
            raise ValidationError(f"infeasible target for {key}: std must be positive and finite")
    for key, r in cm.items():
        if not abs(r) < 1:
            raise ValidationError(f"infeasible correlation {key}={r}: need |r| < 1")
    corr = np.array([
        [1.0, cm["lgd_k_ar"], cm["lgd_k_sg"]],
        [cm["lgd_k_ar"], 1.0, cm["k_ar_k_sg"]],
        [cm["lgd_k_sg"], cm["k_ar_k_sg"], 1.0],
    ])
    if np.linalg.eigvalsh(corr).min() <= 0:
        raise ValidationError("infeasible correlation structure: matrix is not positive definite")
    if n < 4:
        raise ValidationError("need n >= 4 to pin sample moments")

    z = _exact_gaussian(np.random.default_rng(seed), n, corr, method)
    lgd = tm["lgd"][0] + tm["lgd"][1] * z[:, 0]
    k_ar = tm["k_ar"][0] + tm["k_ar"][1] * z[:, 1]
    k_sg = tm["k_sg"][0] + tm["k_sg"][1] * z[:, 2]
    if np.any((lgd < 0) | (lgd > 1)):
        raise ValidationError("synthesized LGD falls outside [0, 1]; try another seed")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PanelWarning)
        return RatePanel(np.arange(start_year, start_year + n), lgd, norm_cdf(k_ar), norm_cdf(k_sg),
                         source_label=f"synthetic(seed={seed})")


@dataclass
class RunConfig:
    """Settings shared by every CLI subcommand."""

    alpha: float = 0.999
    n_sim: int = 10_000_000
    seed: int = 0
    grade: str = "ar"
    scenarios: tuple = ("lgd_only", "k_only", "independent", "correlated")
    lgd_clamp: bool = False
    rho_mode: str = "of_realized_pd"
    obligors: int | None = None
    threads: int = 1
    input: str | None = None
    out: str | None = None
    format: str = "table"

    def __post_init__(self):
        self.grade = normalize_grade(self.grade)
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.alpha not in (0.99, 0.999):
            warnings.warn(f"alpha={self.alpha} is outside the usual {{0.99, 0.999}}", UserWarning, stacklevel=2)

    def updated(self, **overrides):
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


def _coerce(name, raw):
    kinds = {f.name: f.type for f in fields(RunConfig)}
    if name not in kinds:
        raise ValidationError(f"unknown config key {name!r}")
    raw = raw.strip()
    if name in ("alpha",):
        return float(raw)
    if name in ("n_sim", "seed", "threads"):
        return int(float(raw)) if "e" in raw.lower() else int(raw)
    if name == "obligors":
        return None if raw.lower() in ("", "asymptotic", "none") else int(raw)
    if name == "lgd_clamp":
        if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ValidationError(f"lgd_clamp must be a boolean, got {raw!r}")
        return raw.lower() in ("true", "1", "yes")
    if name == "scenarios":
        return tuple(s.strip() for s in raw.split(",") if s.strip())
    return raw or None


def load_config(path) -> dict:
    """Read a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            try:
                out[key] = _coerce(key, value)
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return out
