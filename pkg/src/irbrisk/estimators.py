"""scikit-learn style estimators over (LGD, PD) samples.

Both estimators take ``X`` with two columns, annual LGD rates and annual
default rates, one row per year.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .asrf import DEFAULT_ALPHA, PointEstimates, naive_capital
from .engine import SimulationConfig, scenario_addons
from .exceptions import DomainError
from .stats import pearson, probit_transform
from .uncertainty import UncertaintyModel, infer_k_hat


def _check_rates(X, ensure_min_samples=1):
    X = check_array(X, dtype=np.float64, ensure_min_samples=ensure_min_samples)
    if X.shape[1] != 2:
        raise ValueError(f"X must have 2 columns (lgd, pd), got {X.shape[1]}")
    pd = X[:, 1]
    if np.any(pd <= 0) or np.any(pd >= 1):
        raise DomainError("default rates must lie strictly inside (0, 1)")
    return X


class ParameterUncertaintyEstimator(TransformerMixin, BaseEstimator):
    """Fit the bivariate Gaussian law of (k, LGD) to annual rates.

    Parameters
    ----------
    k_method : {"quadrature", "taylor3"}
        How the mean default point is recovered from the mean default rate.

    Attributes
    ----------
    pd_hat_, lgd_hat_ : sample means of PD and LGD.
    sigma_k_, sigma_lgd_ : sample (n-1) standard deviations of k = Phi^-1(PD) and LGD.
    k_hat_ : mean default point consistent with ``pd_hat_`` and ``sigma_k_``.
    k_mean_ : plain sample mean of k, for comparison with ``k_hat_``.
    rho_lgd_k_ : Pearson correlation of LGD with k.
    correlation_ : the full :class:`~irbrisk.stats.CorrelationResult`.
    """

    def __init__(self, k_method="quadrature"):
        self.k_method = k_method

    def fit(self, X, y=None):
        X = _check_rates(X, ensure_min_samples=4)
        lgd, k = X[:, 0], probit_transform(X[:, 1])
        self.n_features_in_ = 2
        self.n_samples_ = X.shape[0]
        self.pd_hat_ = float(X[:, 1].mean())
        self.lgd_hat_ = float(lgd.mean())
        self.sigma_lgd_ = float(lgd.std(ddof=1))
        self.sigma_k_ = float(k.std(ddof=1))
        self.k_mean_ = float(k.mean())
        self.k_hat_ = infer_k_hat(self.pd_hat_, self.sigma_k_, self.k_method)
        self.correlation_ = pearson(lgd, k)
        self.rho_lgd_k_ = self.correlation_.r
        return self

    def transform(self, X):
        """Map (LGD, PD) rows to (LGD, k)."""
        check_is_fitted(self, "k_hat_")
        X = _check_rates(X)
        return np.column_stack([X[:, 0], probit_transform(X[:, 1])])

    def uncertainty_model(self) -> UncertaintyModel:
        check_is_fitted(self, "k_hat_")
        return UncertaintyModel(self.k_hat_, self.sigma_k_, self.lgd_hat_, self.sigma_lgd_, self.rho_lgd_k_)

    def point_estimates(self) -> PointEstimates:
        check_is_fitted(self, "k_hat_")
        return PointEstimates(self.pd_hat_, self.lgd_hat_)


class CapitalAddOnEstimator(BaseEstimator):
    """Naive and uncertainty-aware IRB capital with the four-scenario add-on table.

    ``fit`` estimates the parameter law from data; :meth:`fit_model` starts
    from a given law instead.  After fitting, ``naive_`` holds the naive
    :class:`~irbrisk.asrf.CapitalResult`, ``reports_`` maps scenario names
    to :class:`~irbrisk.engine.AddOnReport` and ``add_on_`` is the correlated
    scenario's add-on.
    """

    def __init__(self, alpha=DEFAULT_ALPHA, n_sim=1_000_000, seed=0, obligors=None,
                 rho_mode="of_realized_pd", lgd_clamp=False, n_workers=1, k_method="quadrature"):
        self.alpha = alpha
        self.n_sim = n_sim
        self.seed = seed
        self.obligors = obligors
        self.rho_mode = rho_mode
        self.lgd_clamp = lgd_clamp
        self.n_workers = n_workers
        self.k_method = k_method

    def _config(self):
        return SimulationConfig(n_sim=self.n_sim, seed=self.seed, alpha=self.alpha, obligors=self.obligors,
                                lgd_clamp=self.lgd_clamp, rho_mode=self.rho_mode, n_workers=self.n_workers)

    def fit(self, X, y=None):
        self.parameters_ = ParameterUncertaintyEstimator(k_method=self.k_method).fit(X)
        self.n_features_in_ = 2
        return self.fit_model(self.parameters_.uncertainty_model(), self.parameters_.point_estimates())

    def fit_model(self, model: UncertaintyModel, pe: PointEstimates):
        config = self._config()
        self.model_ = model
        self.point_estimates_ = pe
        self.naive_ = naive_capital(pe, config.alpha)
        self.reports_ = scenario_addons(model, pe, config)
        self.add_on_ = self.reports_["correlated"].add_on
        return self
