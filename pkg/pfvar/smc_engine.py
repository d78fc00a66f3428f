"""
Bootstrap particle filter with multinomial selection at every step, plus
online genealogy tracking:

  - Eve indices     eve[i]           time-0 ancestor of particle i
  - Enoch window    window[k, i]     ancestor of particle i at time root + k,
                                     root = (n - lag) v 0

Indices are 0-based. The window never holds more than lag + 1 rows.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Hashable, Optional

import numpy as np

from .errors import DegenerateWeights, InvalidConfig, RowNotInWindow, WeightsUnset
from .fk_model import ModelSpec, TestFunction, log_weights, shifted_weights
from .helpers import LAG_INF, Lag, lag_root, make_rng, parse_lag

logger = logging.getLogger(__name__)

ESS_WARN_FRACTION = 0.01


@dataclass(frozen=True)
class AncestorDraw:
    """Selection indices I_{n+1}: new particle i descends from old particle indices[i]."""

    indices: np.ndarray


@dataclass(eq=False)
class FilterState:
    model: ModelSpec
    n: int
    N: int
    lag: Lag
    positions: np.ndarray
    enoch_window: np.ndarray
    eve: np.ndarray
    rng: np.random.Generator
    weights: Optional[np.ndarray] = None
    weight_sum: Optional[float] = None
    observation: Optional[Hashable] = None
    ancestors: Optional[AncestorDraw] = None

    @property
    def window_root(self) -> int:
        """Time of the oldest stored Enoch row."""
        return self.n - self.enoch_window.shape[0] + 1

    @property
    def has_weights(self) -> bool:
        return self.weights is not None

    def normalized_weights(self) -> np.ndarray:
        if self.weights is None:
            raise WeightsUnset(f"particles at time {self.n} have not been weighted")
        return self.weights / self.weight_sum


# =====================================================================
# Initialisation and selection
# =====================================================================

def init_filter(
    model: ModelSpec,
    N: int,
    lag: Lag = LAG_INF,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> FilterState:
    """Draw N particles from chi and set the window and Eve indices to the identity."""
    if isinstance(N, bool) or int(N) != N or N < 1:
        raise InvalidConfig(f"particle count must be >= 1, got {N!r}", field="N")
    try:
        lag = parse_lag(lag)
    except (TypeError, ValueError) as e:
        raise InvalidConfig(str(e), field="lag") from e
    if rng is None:
        rng = make_rng(0 if seed is None else seed)

    N = int(N)
    positions = np.asarray(model.initial_sampler(rng, N), dtype=np.float64)
    identity = np.arange(N, dtype=np.intp)

    return FilterState(
        model=model,
        n=0,
        N=N,
        lag=lag,
        positions=positions,
        enoch_window=identity[None, :].copy(),
        eve=identity.copy(),
        rng=rng,
    )


def resample_categorical(weights, count: int, rng: np.random.Generator) -> np.ndarray:
    """
    count i.i.d. draws from Cat(weights / sum(weights)) by inverse CDF:
    the smallest index whose cumulative weight is >= u, u uniform on (0, total].
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise DegenerateWeights("weights must be a nonempty vector")
    if np.any(np.isnan(w)) or np.any(w < 0) or np.any(np.isinf(w)):
        raise DegenerateWeights("weights must be finite and nonnegative")

    cumulative = np.cumsum(w)
    total = cumulative[-1]
    if not total > 0:
        raise DegenerateWeights("all weights are zero")

    # 1 - U lies in (0, 1], so a zero-weight index is never selected
    u = (1.0 - rng.random(count)) * total
    idx = np.searchsorted(cumulative, u, side="left")
    return np.minimum(idx, w.size - 1).astype(np.intp)


def effective_sample_size(state: FilterState) -> float:
    w = state.normalized_weights()
    return float(1.0 / np.sum(w * w))


# =====================================================================
# Update
# =====================================================================

def reweight(state: FilterState, z) -> FilterState:
    """Weight the current particles by g<z> (max-shifted log domain)."""
    logw = log_weights(state.model, z, state.positions)
    weights = shifted_weights(logw)
    new = replace(state, weights=weights, weight_sum=float(np.sum(weights)), observation=z)

    ess = effective_sample_size(new)
    if ess < ESS_WARN_FRACTION * state.N:
        logger.warning("ESS %.1f below %.0f%% of N=%d at n=%d", ess, 100 * ESS_WARN_FRACTION, state.N, state.n)
    return new


def _weighted_at(state: FilterState, z) -> bool:
    if not state.has_weights:
        return False
    try:
        return bool(state.observation == z)
    except (TypeError, ValueError):
        return False


def step(state: FilterState, z) -> FilterState:
    """
    One iteration n -> n+1: weight by g<z_n>, select ancestors, mutate through M,
    and permute the genealogy: E_{m,n+1}^i = E_{m,n}^{I^i}, eve_{n+1}^i = eve_n^{I^i}.

    The generator is moved into the returned state; do not step `state` again.
    """
    weighted = state if _weighted_at(state, z) else reweight(state, z)
    ancestors = resample_categorical(weighted.weights, state.N, state.rng)

    parents = state.positions[ancestors]
    positions = np.asarray(state.model.transition_sampler(state.rng, parents), dtype=np.float64)

    window = state.enoch_window[:, ancestors]
    if lag_root(state.n + 1, state.lag) > state.window_root:
        window = window[1:]
    identity = np.arange(state.N, dtype=np.intp)
    window = np.vstack([window, identity[None, :]])

    return replace(
        state,
        n=state.n + 1,
        positions=positions,
        enoch_window=window,
        eve=state.eve[ancestors],
        weights=None,
        weight_sum=None,
        observation=None,
        ancestors=AncestorDraw(ancestors),
    )


# =====================================================================
# Particle estimates and genealogy queries
# =====================================================================

def predictor_estimate(state: FilterState, h: TestFunction) -> float:
    """(1/N) sum_i h(xi_n^i)."""
    return float(np.mean(h(state.positions)))


def filter_estimate(state: FilterState, h: TestFunction) -> float:
    """sum_i (w_n^i / W_n) h(xi_n^i)."""
    return float(np.dot(state.normalized_weights(), h(state.positions)))


def enoch_row(state: FilterState, lag: Optional[Lag] = None) -> np.ndarray:
    """
    Enoch indices at the root (n - lag) v 0 for any lag up to the state's own.
    Infinite lag on a finite window falls back to the Eve indices.
    """
    lag = state.lag if lag is None else parse_lag(lag)
    if lag > state.lag:
        raise RowNotInWindow(f"lag {lag} exceeds the tracked lag {state.lag}")
    root = lag_root(state.n, lag)
    if root < state.window_root:
        if root == 0:
            return state.eve
        raise RowNotInWindow(f"row {root} is not in the window [{state.window_root}, {state.n}]")
    return state.enoch_window[root - state.window_root]


def unique_ancestor_count(state: FilterState, m: Optional[int] = None) -> int:
    """
    Number of distinct ancestors at time m (a window row), or at the Eve
    level when m is None (or m == 0 and row 0 has left the window).
    """
    if m is None:
        return int(np.unique(state.eve).size)
    if state.window_root <= m <= state.n:
        return int(np.unique(state.enoch_window[m - state.window_root]).size)
    if m == 0:
        return int(np.unique(state.eve).size)
    raise RowNotInWindow(f"row {m} is not in the window [{state.window_root}, {state.n}]")


def genealogy_slots(state: FilterState) -> int:
    """Index slots currently held for genealogy (window plus Eve indices)."""
    return int(state.enoch_window.size + state.eve.size)


def window_capacity(lag: Lag, N: int) -> float:
    return math.inf if math.isinf(lag) else (int(lag) + 1) * N
