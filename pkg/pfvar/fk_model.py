"""
Perturbed Feynman-Kac model: initial distribution chi, Markov kernel M and a
family of positive potentials g<z>, indexed by a perturbation z (in every
bundled model, the observation).

Samplers and potentials are vectorized over the particle axis: positions are
arrays whose first axis runs over particles (shape (N,) when state_dim == 1).
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Hashable

import numpy as np

from .errors import DegenerateWeights, NonFinitePotential

Perturbation = Hashable
InitialSampler = Callable[[np.random.Generator, int], np.ndarray]
TransitionSampler = Callable[[np.random.Generator, np.ndarray], np.ndarray]
LogPotential = Callable[[Any, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ModelSpec:
    """
    Immutable model triple (chi, M, g). Both samplers must draw only from
    the generator they are handed, so equal generator states give equal draws.
    """

    initial_sampler: InitialSampler
    transition_sampler: TransitionSampler
    log_potential: LogPotential
    state_dim: int = 1
    name: str = "custom"
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.state_dim < 1:
            raise ValueError("state_dim must be a positive integer")


@dataclass(frozen=True)
class TestFunction:
    """Bounded test function h, vectorized over particles."""

    __test__ = False  # not a pytest class

    kind: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    params: Dict[str, Any] = field(default_factory=dict)

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(x)), dtype=np.float64)


def identity() -> TestFunction:
    return TestFunction("identity", lambda x: np.asarray(x, dtype=np.float64))


def indicator(a: float, b: float) -> TestFunction:
    """1 on [a, b], 0 elsewhere."""
    if b < a:
        raise ValueError(f"indicator needs a <= b, got ({a}, {b})")
    return TestFunction(
        "indicator",
        lambda x: ((x >= a) & (x <= b)).astype(np.float64),
        {"a": a, "b": b},
    )


def state_indicator(state: int) -> TestFunction:
    """Indicator of one state of a finite-state model."""
    return TestFunction(
        "state",
        lambda x: (np.asarray(x) == state).astype(np.float64),
        {"state": int(state)},
    )


def custom(fn: Callable[[np.ndarray], np.ndarray], **params) -> TestFunction:
    return TestFunction("custom", fn, dict(params))


# =====================================================================
# Potentials
# =====================================================================

def potential(model: ModelSpec, z, x):
    """
    g<z>(x) = exp(log_potential(z, x)).
    Raises NonFinitePotential unless the log-potential is finite everywhere.
    """
    logg = np.asarray(model.log_potential(z, x), dtype=np.float64)
    if not np.all(np.isfinite(logg)):
        raise NonFinitePotential(f"log-potential is not finite at z={z!r}")
    value = np.exp(logg)
    return float(value) if value.ndim == 0 else value


def log_weights(model: ModelSpec, z, positions: np.ndarray) -> np.ndarray:
    """
    Log-potentials of a particle cloud. Individual -inf entries (zero weight)
    are allowed; NaN or +inf is not, and neither is a cloud with no mass.
    """
    logw = np.asarray(model.log_potential(z, positions), dtype=np.float64)
    if logw.shape != (len(positions),):
        logw = np.broadcast_to(logw, (len(positions),)).astype(np.float64)
    if np.any(np.isnan(logw)) or np.any(logw == np.inf):
        raise NonFinitePotential(f"log-potential is NaN or +inf at z={z!r}")
    if not np.any(np.isfinite(logw)):
        raise DegenerateWeights(f"every particle has zero potential at z={z!r}")
    return logw


def shifted_weights(logw: np.ndarray) -> np.ndarray:
    """exp(logw - max logw): largest weight is exactly 1, the rest are ratios."""
    return np.exp(logw - np.max(logw))
