import math
from collections import defaultdict
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
import statsmodels.api as sm
from statsmodels.stats.proportion import proportion_confint

from .helpers import format_lag


def summarize_estimates(values: Sequence[float]) -> Dict[str, float]:
    """
    Given replicate estimates, compute:
      - mean
      - standard deviation (sample)
      - 95% confidence interval for the mean
    """
    x = np.asarray(values, dtype=np.float64)
    n = x.size

    if n == 0:
        return {"n": 0, "mean": math.nan, "sd": math.nan, "ci_low": math.nan, "ci_high": math.nan}

    mean = float(np.mean(x))

    if n > 1:
        sd = float(np.std(x, ddof=1))
        margin = 1.96 * sd / math.sqrt(n)
        ci_low, ci_high = mean - margin, mean + margin
    else:
        sd = math.nan
        ci_low = math.nan
        ci_high = math.nan

    return {"n": n, "mean": mean, "sd": sd, "ci_low": ci_low, "ci_high": ci_high}


def summarize_sweep_rows(rows: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """
    Long rows {"lag", "replicate", "estimate"} -> one summary row per lag,
    in order of first appearance.
    """
    grouped = defaultdict(list)
    for r in rows:
        grouped[r["lag"]].append(float(r["estimate"]))

    out = []
    for lag, values in grouped.items():
        stats = summarize_estimates(values)
        out.append({"lag": format_lag(lag), **stats})
    return out


def scaled_sample_variance(values: Sequence[float], N: int) -> float:
    """N x unbiased sample variance: the brute-force asymptotic-variance reference."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2:
        return math.nan
    return float(N * np.var(x, ddof=1))


def jackknife_se(values: Sequence[float], N: int = 1) -> float:
    """Leave-one-out jackknife standard error of scaled_sample_variance."""
    x = np.asarray(values, dtype=np.float64)
    r = x.size
    if r < 3:
        return math.nan
    total = x.sum()
    total_sq = np.dot(x, x)
    # leave-one-out sample variances in closed form
    loo_mean = (total - x) / (r - 1)
    loo_var = (total_sq - x * x - (r - 1) * loo_mean ** 2) / (r - 2)
    loo = N * loo_var
    return float(math.sqrt((r - 1) / r * np.sum((loo - loo.mean()) ** 2)))


def fit_geometric_decay(lags: Sequence[float], values: Sequence[float]) -> Dict[str, float]:
    """
    OLS fit of log(value) = log C + lag log(rho) over strictly positive values.
    Returns C, rho and the R^2 of the log-linear fit.
    """
    x = np.asarray(lags, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    keep = y > 0
    if keep.sum() < 2:
        raise ValueError("need at least two positive values to fit a decay rate")

    design = sm.add_constant(x[keep])
    fit = sm.OLS(np.log(y[keep]), design).fit()
    intercept, slope = fit.params
    return {"C": float(math.exp(intercept)), "rho": float(math.exp(slope)), "r2": float(fit.rsquared)}


def geometric_envelope(lags: Sequence[float], values: Sequence[float]) -> Tuple[float, float]:
    """(C, rho) with values <= C rho^lag at every point; rho from the log-linear fit."""
    rho = fit_geometric_decay(lags, values)["rho"]
    x = np.asarray(lags, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    C = float(np.max(y / rho ** x))
    return C, rho


def failure_rate_interval(failures: int, trials: int, alpha: float = 0.05) -> Tuple[float, float]:
    """Wilson interval for a failure proportion."""
    if trials == 0:
        return math.nan, math.nan
    low, high = proportion_confint(failures, trials, alpha=alpha, method="wilson")
    return float(low), float(high)
