"""
Asymptotic-variance estimators read off a single filter run.

All estimators share one shape: group the centred per-particle terms by an
ancestor index row, sum within groups, and add up the squared group sums.

  fixed-lag predictor   (1/N) sum_i ( sum_{j: E^j = i} {h(xi^j) - eta^N h} )^2
  CLE predictor         same, with Eve indices in place of the Enoch row
  fixed-lag filter      N sum_i ( sum_{j: E^j = i} (w^j / W) {h(xi^j) - phi^N h} )^2
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy import stats

from .errors import InvalidLevel
from .fk_model import TestFunction
from .helpers import LAG_INF, Lag, parse_lag
from .smc_engine import FilterState, enoch_row

PREDICTOR = "predictor"
FILTER = "filter"
FIXED_LAG = "fixed_lag"
CLE = "cle"


@dataclass(frozen=True)
class VarianceEstimate:
    value: float
    time_n: int
    lag: Lag
    flow: str
    estimator: str
    unique_ancestors: int = 0

    def __float__(self) -> float:
        return self.value


def grouped_sum_of_squares(terms: np.ndarray, row: np.ndarray, N: int) -> float:
    """sum_i ( sum_{j: row[j] = i} terms[j] )^2, accumulated in ascending j."""
    group_sums = np.bincount(row, weights=terms, minlength=N)
    return float(np.dot(group_sums, group_sums))


def predictor_variance_from_values(values: np.ndarray, row: np.ndarray) -> float:
    """Predictor-flow estimator for per-particle values f(xi^j) and an ancestor row."""
    values = np.asarray(values, dtype=np.float64)
    N = values.size
    centred = values - np.mean(values)
    return grouped_sum_of_squares(centred, row, N) / N


def _estimate(value, state, lag, flow, estimator, row) -> VarianceEstimate:
    unique = int(np.unique(row).size)
    # a single ancestral group sums the centred terms to zero
    value = 0.0 if unique == 1 else max(float(value), 0.0)
    return VarianceEstimate(
        value=value,
        time_n=state.n,
        lag=lag,
        flow=flow,
        estimator=estimator,
        unique_ancestors=unique,
    )


# =====================================================================
# Predictor flow
# =====================================================================

def fixed_lag_predictor_variance(
    state: FilterState, h: TestFunction, lag: Optional[Lag] = None
) -> VarianceEstimate:
    lag = state.lag if lag is None else parse_lag(lag)
    row = enoch_row(state, lag)
    value = predictor_variance_from_values(h(state.positions), row)
    return _estimate(value, state, lag, PREDICTOR, FIXED_LAG, row)


def cle_predictor_variance(state: FilterState, h: TestFunction) -> VarianceEstimate:
    value = predictor_variance_from_values(h(state.positions), state.eve)
    return _estimate(value, state, LAG_INF, PREDICTOR, CLE, state.eve)


# =====================================================================
# Filter (updated) flow
# =====================================================================

def _filter_value(state: FilterState, h: TestFunction, row: np.ndarray, form: str) -> float:
    w = state.normalized_weights()
    values = h(state.positions)
    phi = float(np.dot(w, values))

    if form == "weighted":
        return state.N * grouped_sum_of_squares(w * (values - phi), row, state.N)
    if form == "ratio":
        # V(g {h - phi h}) / (eta^N g)^2; any constant factor in g cancels
        g = state.weights
        numerator = predictor_variance_from_values(g * (values - phi), row)
        return numerator / float(np.mean(g)) ** 2
    raise ValueError(f"form must be 'weighted' or 'ratio', got {form!r}")


def fixed_lag_filter_variance(
    state: FilterState,
    h: TestFunction,
    lag: Optional[Lag] = None,
    form: str = "weighted",
) -> VarianceEstimate:
    """Needs the particles weighted at the current observation (see smc_engine.reweight)."""
    lag = state.lag if lag is None else parse_lag(lag)
    row = enoch_row(state, lag)
    return _estimate(_filter_value(state, h, row, form), state, lag, FILTER, FIXED_LAG, row)


def cle_filter_variance(state: FilterState, h: TestFunction, form: str = "weighted") -> VarianceEstimate:
    row = state.eve
    return _estimate(_filter_value(state, h, row, form), state, LAG_INF, FILTER, CLE, row)


# =====================================================================
# Confidence intervals
# =====================================================================

def gaussian_quantile(level: float, df: Optional[float] = None) -> float:
    """
    Two-sided quantile magnitude q with P(|Z| <= q) = level.
    scipy evaluates the Gaussian inverse CDF through Cephes' ndtri rational
    approximations (relative error near machine precision); df switches to
    a Student-t with df degrees of freedom.
    """
    if not 0.0 < level < 1.0:
        raise InvalidLevel(f"level must lie in (0, 1), got {level!r}", field="level")
    p = 0.5 + level / 2.0
    if df is None:
        return float(stats.norm.ppf(p))
    if df <= 0:
        raise InvalidLevel(f"degrees of freedom must be positive, got {df!r}", field="student_t_df")
    return float(stats.t.ppf(p, df))


def interval_half_width(variance, N: int, level: float = 0.95, df: Optional[float] = None):
    """q * sqrt(variance / N), elementwise; an infinite variance gives an infinite half-width."""
    q = gaussian_quantile(level, df)
    variance = np.asarray(variance, dtype=np.float64)
    if np.any(np.isnan(variance)) or np.any(variance < 0):
        raise ValueError(f"variance estimate must be >= 0, got {variance!r}")
    half = q * np.sqrt(variance) / math.sqrt(N)
    return float(half) if half.ndim == 0 else half


def confidence_interval(
    mean: float,
    var_est: Union[VarianceEstimate, float],
    N: int,
    level: float = 0.95,
    df: Optional[float] = None,
) -> Tuple[float, float]:
    """mean +/- q * sqrt(variance) / sqrt(N)."""
    half = interval_half_width(float(var_est), N, level, df)
    if math.isinf(half):
        return -math.inf, math.inf
    return mean - half, mean + half
