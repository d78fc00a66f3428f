"""
Experimental protocols at configurable scale:

  - replicate_variance_reference  brute-force N x sample variance over replicates
  - lag_sweep                     every lag from one filter pass per replicate
  - long_run                      fixed-lag estimate, CLE and genealogy counts along one run
  - ci_failure_rates              coverage of Gaussian intervals against Kalman truth

Replicates on the same observation record run on a thread pool; results are
reduced in replicate order, so outputs do not depend on scheduling.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .config import ExperimentConfig
from .errors import ConfigError, ModelNotTractable
from .exact_oracle import DiscreteModel
from .fk_model import ModelSpec, TestFunction
from .helpers import LAG_INF, Lag, derive_seed, format_lag, lag_root, make_rng
from .io_utils import read_observations
from .models import LinearGaussianParams, kalman_predict, simulate
from .smc_engine import (
    FilterState,
    filter_estimate,
    init_filter,
    predictor_estimate,
    reweight,
    step,
    unique_ancestor_count,
)
from .stats_utils import (
    failure_rate_interval,
    jackknife_se,
    scaled_sample_variance,
    summarize_estimates,
)
from .variance_estimators import (
    cle_filter_variance,
    cle_predictor_variance,
    fixed_lag_filter_variance,
    fixed_lag_predictor_variance,
    confidence_interval,
    interval_half_width,
)

logger = logging.getLogger(__name__)


@dataclass
class SweepResult:
    lag: Lag
    mean: float
    sd: float
    estimates: np.ndarray
    reference: float = math.nan
    unique_ancestors: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))


# =====================================================================
# Shared plumbing
# =====================================================================

def observation_record(cfg: ExperimentConfig) -> np.ndarray:
    """
    y_0 .. y_n: read from observations_path, taken from a discrete model
    document, or simulated from the model on the 'observations' stream.
    """
    discrete = cfg.model_kind == "discrete"
    if cfg.observations_path:
        y = read_observations(cfg.observations_path, symbolic=discrete)
        if discrete:
            known = cfg.model_params().potentials
            unknown = sorted({str(z) for z in y} - set(known))
            if unknown:
                raise ConfigError(f"no potential for observation symbols {unknown}", field="observations_path")
    elif discrete:
        y = np.asarray(cfg.model_params().observations, dtype=object)
        if y.size == 0:
            raise ConfigError("discrete model has no observation record", field="model.observations")
    else:
        _, y = simulate(cfg.model_params(), cfg.n + 1, derive_seed(cfg.seed, "observations"))

    if len(y) < cfg.n:
        raise ConfigError(f"record has {len(y)} values, n={cfg.n} needs at least {cfg.n}", field="n")
    return y


def _require_filter_obs(y: Sequence, n: int) -> None:
    if len(y) < n + 1:
        raise ConfigError(f"filter flow at time {n} needs {n + 1} observations, record has {len(y)}", field="n")


def _map_replicates(fn: Callable[[int], object], replicates: int, threads: int) -> List[object]:
    if threads <= 1 or replicates <= 1:
        return [fn(r) for r in range(replicates)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(replicates)))


def run_to(model: ModelSpec, y: Sequence, N: int, lag: Lag, seed: int, n: int, flow: str,
           on_time: Optional[Callable[[FilterState, int], None]] = None) -> FilterState:
    """
    Drive one filter from time 0 to time n on y. With flow='filter' the state
    handed to on_time (and returned) is weighted at y_m.
    """
    state = init_filter(model, N, lag, rng=make_rng(seed))
    for m in range(n + 1):
        if flow == "filter":
            state = reweight(state, y[m])
        if on_time is not None:
            on_time(state, m)
        if m < n:
            state = step(state, y[m])
    return state


def _point_estimate(state: FilterState, h: TestFunction, flow: str) -> float:
    return filter_estimate(state, h) if flow == "filter" else predictor_estimate(state, h)


def _variance_estimate(state: FilterState, h: TestFunction, flow: str, lag: Lag):
    if math.isinf(lag):
        return cle_filter_variance(state, h) if flow == "filter" else cle_predictor_variance(state, h)
    if flow == "filter":
        return fixed_lag_filter_variance(state, h, lag)
    return fixed_lag_predictor_variance(state, h, lag)


def _prepare(cfg: ExperimentConfig, y):
    y = observation_record(cfg) if y is None else y
    if cfg.flow == "filter":
        _require_filter_obs(y, cfg.n)
    return cfg.build_model(), cfg.build_test_function(), y


# =====================================================================
# Brute-force reference
# =====================================================================

def replicate_terminal_estimates(cfg: ExperimentConfig, y=None, replicates: Optional[int] = None,
                                 stream: str = "reference") -> np.ndarray:
    """Terminal particle estimates of h from independent runs on one record."""
    model, h, y = _prepare(cfg, y)
    replicates = cfg.replicates if replicates is None else replicates

    def one(r: int) -> float:
        state = run_to(model, y, cfg.N, 0, derive_seed(cfg.seed, stream, r), cfg.n, cfg.flow)
        return _point_estimate(state, h, cfg.flow)

    return np.asarray(_map_replicates(one, replicates, cfg.threads), dtype=np.float64)


def replicate_variance_reference(cfg: ExperimentConfig, y=None, replicates: Optional[int] = None) -> float:
    """N x sample variance of the terminal estimate over independent replicates."""
    replicates = cfg.replicates if replicates is None else replicates
    if replicates < 2:
        raise ConfigError("the brute-force reference needs at least 2 replicates", field="replicates")
    if replicates < 10:
        logger.warning("reference from only %d replicates", replicates)
    logger.info("reference: %s N=%d n=%d replicates=%d", cfg.model_kind, cfg.N, cfg.n, replicates)
    estimates = replicate_terminal_estimates(cfg, y, replicates)
    return scaled_sample_variance(estimates, cfg.N)


def replicate_reference_summary(cfg: ExperimentConfig, y=None) -> Dict[str, float]:
    if cfg.replicates < 2:
        raise ConfigError("the brute-force reference needs at least 2 replicates", field="replicates")
    estimates = replicate_terminal_estimates(cfg, y)
    return {
        "reference": scaled_sample_variance(estimates, cfg.N),
        "jackknife_se": jackknife_se(estimates, cfg.N),
        "mean_estimate": float(np.mean(estimates)),
        "replicates": int(estimates.size),
    }


def replicate_variance_track(cfg: ExperimentConfig, y=None, replicates: Optional[int] = None) -> pd.DataFrame:
    """Per-time brute-force reference N x Var(eta^N h) at the thinned times."""
    model, h, y = _prepare(cfg, y)
    replicates = cfg.reference_replicates if replicates is None else replicates
    if replicates < 2:
        raise ConfigError("the reference track needs at least 2 replicates", field="reference_replicates")
    times = list(range(0, cfg.n + 1, cfg.thin))

    def one(r: int) -> np.ndarray:
        out = np.empty(len(times))

        def record(state: FilterState, m: int) -> None:
            if m % cfg.thin == 0:
                out[m // cfg.thin] = _point_estimate(state, h, cfg.flow)

        run_to(model, y, cfg.N, 0, derive_seed(cfg.seed, "reference", r), cfg.n, cfg.flow, record)
        return out

    paths = np.vstack(_map_replicates(one, replicates, cfg.threads))
    reference = cfg.N * np.var(paths, axis=0, ddof=1)
    return pd.DataFrame({"n": times, "reference": reference})


# =====================================================================
# Lag sweep
# =====================================================================

def lag_sweep(cfg: ExperimentConfig, y=None) -> Dict[Lag, SweepResult]:
    """
    One pass per replicate with a window of the largest finite lag; smaller
    lags read sub-rows of that window and infinite lags use the Eve indices.
    """
    model, h, y = _prepare(cfg, y)
    lags = list(dict.fromkeys(cfg.lags))
    logger.info(
        "lag sweep: %s N=%d n=%d replicates=%d lags=%s",
        cfg.model_kind, cfg.N, cfg.n, cfg.replicates, [format_lag(l) for l in lags],
    )

    def one(r: int):
        state = run_to(model, y, cfg.N, cfg.tracked_lag, derive_seed(cfg.seed, "sweep", r), cfg.n, cfg.flow)
        estimates = [_variance_estimate(state, h, cfg.flow, lag) for lag in lags]
        logger.debug("replicate %d done", r)
        return [e.value for e in estimates], [e.unique_ancestors for e in estimates]

    outcomes = _map_replicates(one, cfg.replicates, cfg.threads)
    values = np.array([o[0] for o in outcomes], dtype=np.float64).reshape(cfg.replicates, len(lags))
    counts = np.array([o[1] for o in outcomes], dtype=int).reshape(cfg.replicates, len(lags))

    reference = math.nan
    if cfg.reference_replicates > 0:
        reference = replicate_variance_reference(cfg, y, cfg.reference_replicates)

    results = {}
    for k, lag in enumerate(lags):
        stats = summarize_estimates(values[:, k])
        results[lag] = SweepResult(
            lag=lag,
            mean=stats["mean"],
            sd=stats["sd"],
            estimates=values[:, k],
            reference=reference,
            unique_ancestors=counts[:, k],
        )
    return results


def sweep_rows(results: Dict[Lag, SweepResult]) -> List[Dict[str, object]]:
    rows = []
    for lag, res in results.items():
        for r, value in enumerate(res.estimates):
            rows.append({"lag": lag, "replicate": r, "estimate": float(value)})
    return rows


# =====================================================================
# Long run
# =====================================================================

def long_run(cfg: ExperimentConfig, y=None) -> pd.DataFrame:
    """Thinned track of (n, fixed_lag, cle, eve_count, enoch_count) along a single pass."""
    finite = cfg.finite_lags
    if len(cfg.lags) != 1 or not finite:
        raise ConfigError("long-run needs exactly one finite lag", field="lags")
    lag = finite[0]
    model, h, y = _prepare(cfg, y)
    logger.info("long run: %s N=%d n=%d lag=%d", cfg.model_kind, cfg.N, cfg.n, lag)

    rows = []
    collapsed = {"at": None}

    def record(state: FilterState, m: int) -> None:
        eve_count = unique_ancestor_count(state)
        if eve_count == 1 and collapsed["at"] is None:
            collapsed["at"] = m
            logger.info("Eve indices collapsed to a single ancestor at n=%d", m)
        if m % cfg.thin:
            return
        rows.append({
            "n": m,
            "fixed_lag": _variance_estimate(state, h, cfg.flow, lag).value,
            "cle": _variance_estimate(state, h, cfg.flow, LAG_INF).value,
            "eve_count": eve_count,
            "enoch_count": unique_ancestor_count(state, lag_root(m, lag)),
        })

    run_to(model, y, cfg.N, lag, derive_seed(cfg.seed, "long_run"), cfg.n, cfg.flow, record)
    return pd.DataFrame(rows, columns=["n", "fixed_lag", "cle", "eve_count", "enoch_count"])


# =====================================================================
# Confidence-interval calibration
# =====================================================================

def coverage_failures(means, variances, truth, N: int, level: float = 0.95,
                      df: Optional[float] = None) -> np.ndarray:
    """True where |mean - truth| exceeds q sqrt(variance / N)."""
    means = np.asarray(means, dtype=np.float64)
    half = interval_half_width(variances, N, level, df)
    return np.abs(means - np.asarray(truth, dtype=np.float64)) > half


def ci_runs(cfg: ExperimentConfig, y=None):
    """Per-run predictor means and fixed-lag variance estimates at times 0..n."""
    params = cfg.model_params()
    if not isinstance(params, LinearGaussianParams):
        raise ModelNotTractable(
            f"confidence-interval calibration needs Kalman truth (linear_gaussian model), got {cfg.model_kind}"
        )
    finite = cfg.finite_lags
    if not finite:
        raise ConfigError("ci-failure needs a finite lag", field="lags")
    lag = finite[0]
    model, h, y = _prepare(cfg.model_copy(update={"flow": "predictor"}), y)
    truth = kalman_predict(params, y[: cfg.n]).means

    def one(r: int):
        means = np.empty(cfg.n + 1)
        variances = np.empty(cfg.n + 1)

        def record(state: FilterState, m: int) -> None:
            means[m] = predictor_estimate(state, h)
            variances[m] = fixed_lag_predictor_variance(state, h, lag).value

        run_to(model, y, cfg.N, lag, derive_seed(cfg.seed, "ci", r), cfg.n, "predictor", record)
        return means, variances

    logger.info("ci calibration: N=%d n=%d runs=%d lag=%d", cfg.N, cfg.n, cfg.replicates, lag)
    outcomes = _map_replicates(one, cfg.replicates, cfg.threads)
    means = np.vstack([o[0] for o in outcomes])
    variances = np.vstack([o[1] for o in outcomes])
    return means, variances, truth


def ci_failure_rates(cfg: ExperimentConfig, y=None) -> pd.DataFrame:
    """Fraction of runs whose interval misses the Kalman predictor mean, per reported time."""
    means, variances, truth = ci_runs(cfg, y)
    failures = coverage_failures(means, variances, truth, cfg.N, cfg.level, cfg.student_t_df)
    times = np.arange(0, cfg.n + 1, cfg.thin)
    return pd.DataFrame({"n": times, "failure_rate": failures.mean(axis=0)[times]})


def failure_summary(rates: pd.DataFrame, replicates: int) -> Dict[str, float]:
    """Time-averaged failure rate with a Wilson interval over all run x time trials."""
    trials = int(len(rates) * replicates)
    failures = int(round(float(rates["failure_rate"].sum()) * replicates))
    low, high = failure_rate_interval(failures, trials)
    return {
        "average_failure_rate": float(rates["failure_rate"].mean()) if len(rates) else math.nan,
        "wilson_low": low,
        "wilson_high": high,
        "trials": trials,
    }


# =====================================================================
# Single run
# =====================================================================

def single_run(cfg: ExperimentConfig, y=None) -> pd.DataFrame:
    """Per-time predictor/filter means, variance estimates and genealogy counts for one pass."""
    model, h, y = _prepare(cfg, y)
    lag = cfg.lags[0]
    rows = []

    def record(state: FilterState, m: int) -> None:
        if m % cfg.thin:
            return
        mean = predictor_estimate(state, h)
        fixed_lag = _variance_estimate(state, h, "predictor", lag).value
        ci_low, ci_high = confidence_interval(mean, fixed_lag, cfg.N, cfg.level, cfg.student_t_df)
        row = {
            "n": m,
            "predictor_mean": mean,
            "fixed_lag": fixed_lag,
            "ci_low": ci_low,
            "ci_high": ci_high,
            "cle": cle_predictor_variance(state, h).value,
            "filter_mean": math.nan,
            "filter_fixed_lag": math.nan,
            "eve_count": unique_ancestor_count(state),
            "enoch_count": unique_ancestor_count(state, lag_root(m, lag)) if not math.isinf(lag)
            else unique_ancestor_count(state),
        }
        if m < len(y):
            weighted = state if state.has_weights else reweight(state, y[m])
            row["filter_mean"] = filter_estimate(weighted, h)
            row["filter_fixed_lag"] = _variance_estimate(weighted, h, "filter", lag).value
        rows.append(row)

    run_to(model, y, cfg.N, lag, derive_seed(cfg.seed, "run"), cfg.n, cfg.flow, record)
    return pd.DataFrame(rows)


def discrete_h_vector(cfg: ExperimentConfig, dm: DiscreteModel) -> np.ndarray:
    """Values of the configured test function on the states 0..S-1."""
    return cfg.build_test_function()(np.arange(dm.S, dtype=np.float64))
