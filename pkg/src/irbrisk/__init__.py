"""Model risk in Basel IRB credit capital requirements.

Naive and parameter-uncertainty-aware regulatory capital under the asymptotic
single risk factor model, the capital add-on from PD/LGD estimation noise and
dependency, and normality checks on annual PD/LGD series.
"""

__version__ = "0.1.0"

from .asrf import CapitalResult, PointEstimates, basel_correlation, conditional_expected_loss, naive_capital
from .engine import (
    AddOnReport,
    LossSample,
    SimulationConfig,
    add_on,
    correct_capital,
    scenario_addons,
    simulate_losses,
    var_quantile,
)
from .estimators import CapitalAddOnEstimator, ParameterUncertaintyEstimator
from .uncertainty import UncertaintyModel, expected_pd, infer_k_hat, sample_parameters

__all__ = [
    "AddOnReport",
    "CapitalAddOnEstimator",
    "CapitalResult",
    "LossSample",
    "ParameterUncertaintyEstimator",
    "PointEstimates",
    "SimulationConfig",
    "UncertaintyModel",
    "add_on",
    "basel_correlation",
    "conditional_expected_loss",
    "correct_capital",
    "expected_pd",
    "infer_k_hat",
    "naive_capital",
    "sample_parameters",
    "scenario_addons",
    "simulate_losses",
    "var_quantile",
]
