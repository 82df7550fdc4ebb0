"""
Monte Carlo engine for capital under parameter uncertainty.

Paths are split into fixed-size blocks.  Block ``b`` of scenario ``s`` draws
from a Philox stream keyed by ``SeedSequence(seed, spawn_key=(s, b))``, so the
loss sample depends only on the model and the configuration, never on how
blocks are scheduled across worker threads.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
import csv
import logging
import math

import numpy as np
from scipy import special

from .asrf import DEFAULT_ALPHA, CapitalResult, PointEstimates, basel_correlation, naive_capital
from .exceptions import DomainError, ResourceError, ValidationError
from .normal import norm_ppf
from .uncertainty import UncertaintyModel, sample_parameters

log = logging.getLogger(__name__)

RHO_MODES = ("of_realized_pd", "of_mean_pd")
SCENARIOS = ("lgd_only", "k_only", "independent", "correlated")
MIN_N_SIM = 1000
_HIST_BINS = 1 << 16


@dataclass(frozen=True)
class SimulationConfig:
    """Monte Carlo controls.

    ``obligors=None`` is the asymptotic portfolio; an integer selects a finite
    homogeneous portfolio of that many obligors.  ``n_workers`` and
    ``block_size`` affect speed only; results are identical for any
    ``n_workers``.
    """

    n_sim: int = 10_000_000
    seed: int = 0
    alpha: float = DEFAULT_ALPHA
    obligors: int | None = None
    lgd_clamp: bool = False
    rho_mode: str = "of_realized_pd"
    n_workers: int = 1
    block_size: int = 1 << 18
    memory_budget: int = 1 << 30

    def __post_init__(self):
        if int(self.n_sim) != self.n_sim or self.n_sim < MIN_N_SIM:
            raise ValidationError(f"n_sim must be an integer >= {MIN_N_SIM}, got {self.n_sim!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise ValidationError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not (math.isfinite(self.alpha) and 0.0 < self.alpha < 1.0):
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.obligors is not None and (int(self.obligors) != self.obligors or self.obligors < 1):
            raise ValidationError(f"obligors must be a positive integer, got {self.obligors!r}")
        if self.rho_mode not in RHO_MODES:
            raise ValidationError(f"rho_mode must be one of {RHO_MODES}, got {self.rho_mode!r}")
        if self.n_workers < 1 or self.block_size < 1:
            raise ValidationError("n_workers and block_size must be positive")

    @property
    def granularity(self) -> str:
        return "asymptotic" if self.obligors is None else f"finite({self.obligors})"

    @property
    def n_blocks(self) -> int:
        return -(-self.n_sim // self.block_size)

    def block_len(self, b: int) -> int:
        return min(self.block_size, self.n_sim - b * self.block_size)


@dataclass
class LossSample:
    """Summary of a simulated loss-rate distribution.

    ``losses`` holds every path loss in path order when it fits the memory
    budget, otherwise ``None`` (the quantile was found by streaming selection).
    """

    n: int
    mean: float
    std: float
    alpha: float
    var: float
    var_se: float
    losses: np.ndarray | None = field(default=None, repr=False)

    @property
    def mean_se(self) -> float:
        return self.std / math.sqrt(self.n)


@dataclass(frozen=True)
class AddOnReport:
    """Capital add-on of one uncertainty scenario over the naive baseline."""

    scenario: str
    rc_naive: float
    rc_correct: float
    el_naive: float
    el_correct: float
    add_on: float
    excess_el: float
    var_se: float = 0.0
    el_se: float = 0.0

    @property
    def add_on_se(self) -> float:
        """Standard error of ``add_on``; the EL terms cancel so only VaR noise enters."""
        return self.var_se / self.rc_naive


def block_stream(seed: int, scenario_id: int, block: int) -> np.random.Generator:
    """Counter-based sub-stream for one block of one scenario."""
    ss = np.random.SeedSequence(seed, spawn_key=(scenario_id, block))
    return np.random.Generator(np.random.Philox(ss))


def _order_index(alpha, n):
    """1-based rank ceil(alpha * n), computed on the decimal literal of alpha."""
    j = int((Decimal(repr(float(alpha))) * n).to_integral_value(rounding="ROUND_CEILING"))
    return min(max(j, 1), n)


def _quantile_ranks(alpha, n):
    j = _order_index(alpha, n)
    d = max(1, math.ceil(math.sqrt(n * alpha * (1.0 - alpha))))
    return max(1, j - d), j, min(n, j + d)


def var_quantile(losses, alpha: float) -> float:
    """Empirical alpha-quantile: the order statistic of rank ceil(alpha * n).

    The sample need not be sorted.
    """
    x = np.asarray(losses, dtype=float).ravel()
    if x.size == 0:
        raise ValidationError("empty loss sample")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    j = _order_index(alpha, x.size) - 1
    return float(np.partition(x, j)[j])


def _quantile_with_se(x, alpha):
    lo, j, hi = _quantile_ranks(alpha, x.size)
    kth = sorted({lo - 1, j - 1, hi - 1})
    part = np.partition(x, kth)
    # distribution-free interval of +-1 binomial standard deviation in rank
    return float(part[j - 1]), float(part[hi - 1] - part[lo - 1]) / 2.0


def _path_losses(model, config, rng, size, pd_hat, sampler):
    k, lgd = sampler(model, rng, size, config.lgd_clamp)
    m = rng.standard_normal(size)
    if config.rho_mode == "of_realized_pd":
        rho = basel_correlation(special.ndtr(k))
    else:
        rho = basel_correlation(pd_hat)
    p = special.ndtr((k - np.sqrt(rho) * m) / np.sqrt(1.0 - rho))
    if config.obligors is None:
        return lgd * p
    defaults = rng.binomial(config.obligors, p)
    return lgd * (defaults / config.obligors)


def _default_sampler(model, rng, size, lgd_clamp):
    return sample_parameters(model, rng, size, lgd_clamp=lgd_clamp)


class _Runner:
    def __init__(self, model, config, scenario_id, sampler):
        self.model = model
        self.config = config
        self.scenario_id = scenario_id
        self.sampler = sampler or _default_sampler
        self.pd_hat = model.pd_hat if config.rho_mode == "of_mean_pd" else None

    def block(self, b):
        c = self.config
        rng = block_stream(c.seed, self.scenario_id, b)
        return _path_losses(self.model, c, rng, c.block_len(b), self.pd_hat, self.sampler)

    def map_blocks(self, fn):
        """Apply ``fn(b, losses)`` to every block; results come back in block order."""
        blocks = range(self.config.n_blocks)
        if self.config.n_workers == 1:
            return [fn(b, self.block(b)) for b in blocks]
        with ThreadPoolExecutor(max_workers=self.config.n_workers) as pool:
            return list(pool.map(lambda b: fn(b, self.block(b)), blocks))


def _moments(n, sums, sumsqs):
    mean = math.fsum(sums) / n
    var = max(0.0, (math.fsum(sumsqs) - n * mean * mean) / max(n - 1, 1))
    return mean, math.sqrt(var)


def _streaming_select(runner, ranks, lo, hi):
    """Exact order statistics by histogram refinement over regenerated blocks."""
    if lo == hi:
        return {r: lo for r in ranks}
    edges = np.linspace(lo, hi, _HIST_BINS + 1)

    def bin_of(x):
        return np.clip(np.searchsorted(edges, x, side="right") - 1, 0, _HIST_BINS - 1)

    counts = np.sum(runner.map_blocks(lambda b, x: np.bincount(bin_of(x), minlength=_HIST_BINS)), axis=0)
    cum = np.cumsum(counts)
    target_bins = {r: int(np.searchsorted(cum, r)) for r in ranks}
    wanted = np.array(sorted(set(target_bins.values())))
    n_wanted = int(counts[wanted].sum())
    if n_wanted * 8 > runner.config.memory_budget:
        raise ResourceError(f"streaming selection needs {n_wanted} values in core; raise memory_budget")

    def gather(b, x):
        ix = bin_of(x)
        keep = np.isin(ix, wanted)
        return ix[keep], x[keep]

    parts = runner.map_blocks(gather)
    all_bins = np.concatenate([p[0] for p in parts])
    all_vals = np.concatenate([p[1] for p in parts])
    out = {}
    for r, tb in target_bins.items():
        before = int(cum[tb - 1]) if tb > 0 else 0
        vals = np.sort(all_vals[all_bins == tb])
        out[r] = float(vals[r - before - 1])
    return out


def simulate_losses(model: UncertaintyModel, config: SimulationConfig, scenario_id: int = 0,
                    sampler=None) -> LossSample:
    """Simulate ``config.n_sim`` portfolio loss rates.

    Each path draws (k, lgd) from ``model`` and an independent common factor
    M.  The asymptotic portfolio loses ``lgd * p`` with
    ``p = Phi((k - sqrt(rho) M) / sqrt(1 - rho))``; a finite portfolio of n
    obligors loses ``lgd * D / n`` with ``D ~ Binomial(n, p)``.  ``rho`` is
    ``rho(Phi(k))`` per path or ``rho(PD_hat)`` depending on
    ``config.rho_mode``.

    ``sampler(model, rng, size, lgd_clamp) -> (k, lgd)`` replaces the Gaussian
    parameter draw, which is how test oracles plug in discrete laws.
    """
    runner = _Runner(model, config, scenario_id, sampler)
    n = config.n_sim
    if n * 8 <= config.memory_budget:
        losses = np.empty(n)

        def store(b, x):
            start = b * config.block_size
            losses[start:start + x.size] = x
            return float(np.sum(x)), float(np.dot(x, x))

        stats = runner.map_blocks(store)
        mean, std = _moments(n, [s[0] for s in stats], [s[1] for s in stats])
        var, var_se = _quantile_with_se(losses, config.alpha)
        return LossSample(n, mean, std, config.alpha, var, var_se, losses)

    log.info("n_sim=%d exceeds memory budget; using streaming selection", n)
    stats = runner.map_blocks(lambda b, x: (float(np.sum(x)), float(np.dot(x, x)), float(x.min()), float(x.max())))
    mean, std = _moments(n, [s[0] for s in stats], [s[1] for s in stats])
    ranks = _quantile_ranks(config.alpha, n)
    sel = _streaming_select(runner, ranks, min(s[2] for s in stats), max(s[3] for s in stats))
    lo, j, hi = ranks
    return LossSample(n, mean, std, config.alpha, sel[j], (sel[hi] - sel[lo]) / 2.0, None)


def correct_capital(model: UncertaintyModel, config: SimulationConfig, scenario_id: int = 0,
                    sampler=None) -> CapitalResult:
    """Capital as alpha-quantile minus mean of the simulated loss distribution."""
    s = simulate_losses(model, config, scenario_id, sampler)
    return CapitalResult.from_var(s.var, s.mean, config.alpha, s.var_se, s.mean_se)


def add_on(correct: CapitalResult, naive: CapitalResult, scenario: str = "correlated") -> AddOnReport:
    """Excess loss reserve, expected-loss correction included, relative to naive RC."""
    if not naive.rc > 0:
        raise DomainError(f"naive RC must be positive to form an add-on, got {naive.rc!r}")
    excess_el = correct.expected_loss - naive.expected_loss
    ratio = ((correct.rc - naive.rc) + excess_el) / naive.rc
    return AddOnReport(scenario, naive.rc, correct.rc, naive.expected_loss, correct.expected_loss,
                       ratio, excess_el, correct.var_se, correct.el_se)


def scenario_models(model: UncertaintyModel, pe: PointEstimates) -> dict:
    """The four uncertainty scenarios derived from a full model.

    Switching off k noise puts the default point back at ``Phi^-1(pd_hat)``
    so every scenario keeps the same mean PD.
    """
    return {
        "lgd_only": model.with_(sigma_k=0.0, k_hat=norm_ppf(pe.pd_hat)),
        "k_only": model.with_(sigma_lgd=0.0),
        "independent": model.with_(rho_lgd_k=0.0),
        "correlated": model,
    }


def scenario_addons(model: UncertaintyModel, pe: PointEstimates, config: SimulationConfig,
                    scenarios=SCENARIOS, on_sample=None) -> dict:
    """Add-on reports for the uncertainty scenarios against a common naive baseline.

    Scenario ``i`` of :data:`SCENARIOS` always uses sub-streams keyed by ``i``,
    so a subset run reproduces the matching entries of a full run.
    ``on_sample(name, LossSample)`` is called after each simulation.
    """
    unknown = set(scenarios) - set(SCENARIOS)
    if unknown:
        raise ValidationError(f"unknown scenarios {sorted(unknown)}; expected a subset of {SCENARIOS}")
    naive = naive_capital(pe, config.alpha)
    models = scenario_models(model, pe)
    out = {}
    for sid, name in enumerate(SCENARIOS):
        if name not in scenarios:
            continue
        s = simulate_losses(models[name], config, scenario_id=sid)
        if on_sample is not None:
            on_sample(name, s)
        correct = CapitalResult.from_var(s.var, s.mean, config.alpha, s.var_se, s.mean_se)
        out[name] = add_on(correct, naive, name)
    return out


def loss_histogram(losses, bins: int = 100):
    """Histogram of a retained loss sample: ``(edges, counts)``."""
    if losses is None:
        raise ResourceError("loss sample was not retained; rerun within the memory budget")
    counts, edges = np.histogram(np.asarray(losses), bins=bins)
    return edges, counts


def write_histogram_csv(path, edges, counts):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_left", "bin_right", "count"])
        for left, right, c in zip(edges[:-1], edges[1:], counts):
            w.writerow([repr(float(left)), repr(float(right)), int(c)])
