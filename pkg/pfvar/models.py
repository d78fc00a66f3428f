"""
The two experimental state-space models and their closed-form companions.

  linear Gaussian         X_{k+1} = phi X_k + sigma_u U,   Y_k = X_k + sigma_v V
  stochastic volatility   X_{k+1} = phi X_k + sigma U,     Y_k = beta exp(X_k / 2) V

Both start from the stationary law N(0, s^2 / (1 - phi^2)). Gaussian draws use
numpy's ziggurat sampler on the generator owned by the caller.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Tuple, Union

import numpy as np
from scipy import stats

from .errors import InvalidParams
from .fk_model import ModelSpec
from .helpers import make_rng

logger = logging.getLogger(__name__)


def _check_phi(phi: float) -> None:
    if not (math.isfinite(phi) and abs(phi) < 1.0):
        raise InvalidParams(f"|phi| must be < 1 for a stationary start, got {phi!r}", field="phi")


@dataclass(frozen=True)
class LinearGaussianParams:
    phi: float
    sigma_u: float
    sigma_v: float

    def __post_init__(self):
        _check_phi(self.phi)
        if not self.sigma_u > 0:
            raise InvalidParams(f"sigma_u must be > 0, got {self.sigma_u!r}", field="sigma_u")
        if not self.sigma_v > 0:
            raise InvalidParams(f"sigma_v must be > 0, got {self.sigma_v!r}", field="sigma_v")

    @property
    def stationary_variance(self) -> float:
        return self.sigma_u ** 2 / (1.0 - self.phi ** 2)


@dataclass(frozen=True)
class StochasticVolatilityParams:
    beta: float
    phi: float
    sigma: float

    def __post_init__(self):
        _check_phi(self.phi)
        if not self.beta > 0:
            raise InvalidParams(f"beta must be > 0, got {self.beta!r}", field="beta")
        if not self.sigma >= 0:
            raise InvalidParams(f"sigma must be >= 0, got {self.sigma!r}", field="sigma")

    @property
    def stationary_variance(self) -> float:
        return self.sigma ** 2 / (1.0 - self.phi ** 2)


ModelParams = Union[LinearGaussianParams, StochasticVolatilityParams]

# Parameterisations used in the reference experiments
REFERENCE_LG = LinearGaussianParams(phi=0.98, sigma_u=0.2, sigma_v=1.0)
REFERENCE_SV = StochasticVolatilityParams(beta=0.641, phi=0.975, sigma=0.165)


@dataclass(frozen=True)
class KalmanTrack:
    """Predictor means and variances at times 0..n."""

    means: np.ndarray
    variances: np.ndarray


# =====================================================================
# ModelSpec constructors
# =====================================================================

def _ar1_samplers(phi: float, sigma: float, stationary_sd: float):
    def initial_sampler(rng, size):
        return rng.normal(0.0, stationary_sd, size=size)

    def transition_sampler(rng, x):
        return phi * x + rng.normal(0.0, sigma, size=np.shape(x))

    return initial_sampler, transition_sampler


def make_linear_gaussian(p: LinearGaussianParams) -> ModelSpec:
    initial_sampler, transition_sampler = _ar1_samplers(
        p.phi, p.sigma_u, math.sqrt(p.stationary_variance)
    )

    def log_potential(y, x):
        return stats.norm.logpdf(y, loc=x, scale=p.sigma_v)

    return ModelSpec(
        initial_sampler=initial_sampler,
        transition_sampler=transition_sampler,
        log_potential=log_potential,
        name="linear_gaussian",
        params=asdict(p),
    )


def make_stochastic_volatility(p: StochasticVolatilityParams) -> ModelSpec:
    initial_sampler, transition_sampler = _ar1_samplers(
        p.phi, p.sigma, math.sqrt(p.stationary_variance)
    )

    def log_potential(y, x):
        return stats.norm.logpdf(y, loc=0.0, scale=p.beta * np.exp(np.asarray(x) / 2.0))

    return ModelSpec(
        initial_sampler=initial_sampler,
        transition_sampler=transition_sampler,
        log_potential=log_potential,
        name="stochastic_volatility",
        params=asdict(p),
    )


def make_model(p: ModelParams) -> ModelSpec:
    if isinstance(p, LinearGaussianParams):
        return make_linear_gaussian(p)
    if isinstance(p, StochasticVolatilityParams):
        return make_stochastic_volatility(p)
    raise InvalidParams(f"no constructor for {type(p).__name__}", field="model")


def sv_potential_sup(y: float) -> float:
    """sup_x g<y>(x) = (|y| sqrt(2 pi))^{-1} e^{-1/2} for y != 0 (independent of beta)."""
    if y == 0:
        return math.inf
    return math.exp(-0.5) / (abs(y) * math.sqrt(2.0 * math.pi))


# =====================================================================
# Simulation and Kalman prediction
# =====================================================================

def simulate(p: ModelParams, n: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """States and observations at times 0..n-1 from the stationary start."""
    if n < 1:
        raise InvalidParams(f"record length must be >= 1, got {n}", field="n")
    rng = make_rng(seed)

    if isinstance(p, LinearGaussianParams):
        sigma = p.sigma_u
    elif isinstance(p, StochasticVolatilityParams):
        sigma = p.sigma
    else:
        raise InvalidParams(f"cannot simulate {type(p).__name__}", field="model")
    logger.debug("simulating %s record of length %d (seed %d)", type(p).__name__, n, seed)

    state_noise = rng.standard_normal(n)
    obs_noise = rng.standard_normal(n)

    states = np.empty(n)
    states[0] = math.sqrt(p.stationary_variance) * state_noise[0]
    for k in range(1, n):
        states[k] = p.phi * states[k - 1] + sigma * state_noise[k]

    if isinstance(p, LinearGaussianParams):
        observations = states + p.sigma_v * obs_noise
    else:
        observations = p.beta * np.exp(states / 2.0) * obs_noise
    return states, observations


def kalman_predict(p: LinearGaussianParams, y_seq) -> KalmanTrack:
    """
    Scalar Kalman prediction from the stationary prior (0, s~^2):

        k_m       = P_m / (P_m + sigma_v^2)
        mean_{m+1} = phi (mean_m + k_m (y_m - mean_m))
        P_{m+1}    = phi^2 (1 - k_m) P_m + sigma_u^2
    """
    if not isinstance(p, LinearGaussianParams):
        raise InvalidParams("Kalman prediction needs linear Gaussian parameters", field="model")
    y = np.asarray(y_seq, dtype=np.float64)
    n = y.size
    means = np.empty(n + 1)
    variances = np.empty(n + 1)
    means[0] = 0.0
    variances[0] = p.stationary_variance
    noise = p.sigma_v ** 2

    for m in range(n):
        gain = variances[m] / (variances[m] + noise)
        means[m + 1] = p.phi * (means[m] + gain * (y[m] - means[m]))
        variances[m + 1] = p.phi ** 2 * (1.0 - gain) * variances[m] + p.sigma_u ** 2
    return KalmanTrack(means=means, variances=variances)
