"""
pfvar: online asymptotic-variance estimation for bootstrap particle filters
using fixed-lag (Enoch-index) genealogy tracing.
"""

from .errors import PfvarError
from .fk_model import ModelSpec, TestFunction, custom, identity, indicator, state_indicator
from .helpers import LAG_INF
from .smc_engine import FilterState, init_filter, reweight, step
from .variance_estimators import (
    VarianceEstimate,
    cle_filter_variance,
    cle_predictor_variance,
    fixed_lag_filter_variance,
    fixed_lag_predictor_variance,
)

__version__ = "0.1.0"
