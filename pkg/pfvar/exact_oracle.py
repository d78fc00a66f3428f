"""
Exact Feynman-Kac quantities for finite-state models by dense matrix algebra.

With Q<z> = diag(g<z>) M:

  predictor   eta_n  propto  chi Q<z_0> ... Q<z_{n-1}>
  filter      phi_n  propto  eta_n * g<z_n>
  variance    sigma^2<l>(h) = sum_{m=l}^{n} eta_m (Q_{m:n-1} f)^2 / (eta_m Q_{m:n-1} 1)^2,
              f = h - eta_n h

Every chain is renormalised at each step; only scale-free ratios leave this module.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .errors import IndexOutOfRange, InvalidParams, NumericalUnderflow
from .fk_model import ModelSpec
from .helpers import Lag, lag_root
from .smc_engine import resample_categorical
from .stats_utils import fit_geometric_decay, geometric_envelope

logger = logging.getLogger(__name__)

PROB_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteModel:
    chi: np.ndarray
    M: np.ndarray
    potentials: Dict[str, np.ndarray]
    observations: List[str] = field(default_factory=list)

    def __post_init__(self):
        chi = np.asarray(self.chi, dtype=np.float64)
        M = np.asarray(self.M, dtype=np.float64)
        S = chi.size
        if chi.ndim != 1 or S < 2:
            raise InvalidParams("chi must be a probability vector with at least 2 states", field="chi")
        if np.any(chi < 0) or abs(chi.sum() - 1.0) > PROB_TOL:
            raise InvalidParams(f"chi must be nonnegative and sum to 1, sums to {chi.sum()!r}", field="chi")
        if M.shape != (S, S):
            raise InvalidParams(f"M must be {S}x{S}, got {M.shape}", field="M")
        if np.any(M < 0) or np.any(np.abs(M.sum(axis=1) - 1.0) > PROB_TOL):
            raise InvalidParams("every row of M must be nonnegative and sum to 1", field="M")
        if not self.potentials:
            raise InvalidParams("potential table is empty", field="potentials")

        table = {}
        for symbol, g in self.potentials.items():
            g = np.asarray(g, dtype=np.float64)
            if g.shape != (S,) or not np.all(np.isfinite(g)) or np.any(g <= 0):
                raise InvalidParams(f"g<{symbol}> must be {S} positive finite values", field="potentials")
            table[str(symbol)] = g

        observations = [str(z) for z in self.observations]
        unknown = sorted(set(observations) - set(table))
        if unknown:
            raise InvalidParams(f"observations without a potential: {unknown}", field="observations")

        object.__setattr__(self, "chi", chi)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "potentials", table)
        object.__setattr__(self, "observations", observations)

    @property
    def S(self) -> int:
        return self.chi.size

    def g(self, z) -> np.ndarray:
        try:
            return self.potentials[str(z)]
        except KeyError:
            raise InvalidParams(f"no potential for observation {z!r}", field="potentials") from None

    # ---------- JSON ----------

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DiscreteModel":
        unknown = set(data) - {"chi", "M", "potentials", "observations"}
        if unknown:
            raise InvalidParams(f"unknown keys {sorted(unknown)}", field="model")
        for key in ("chi", "M", "potentials"):
            if key not in data:
                raise InvalidParams("missing", field=key)
        return cls(
            chi=np.asarray(data["chi"], dtype=np.float64),
            M=np.asarray(data["M"], dtype=np.float64),
            potentials=dict(data["potentials"]),
            observations=list(data.get("observations", [])),
        )

    @classmethod
    def from_json(cls, path) -> "DiscreteModel":
        with Path(path).open("r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "chi": self.chi.tolist(),
            "M": self.M.tolist(),
            "potentials": {k: v.tolist() for k, v in sorted(self.potentials.items())},
            "observations": list(self.observations),
        }

    def to_json(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
        return path


@dataclass(frozen=True)
class ExactVariance:
    value: float
    ell: int
    terms: np.ndarray


# =====================================================================
# Distribution flow
# =====================================================================

def _normalize(v: np.ndarray, what: str) -> np.ndarray:
    total = float(v.sum())
    if not np.isfinite(total) or total <= 0.0:
        raise NumericalUnderflow(f"{what}: unnormalised mass vanished")
    return v / total


def exact_predictor_flow(dm: DiscreteModel, z_seq: Sequence) -> np.ndarray:
    """Rows eta_0 = chi, eta_1, ..., eta_n for z_seq = z_0 .. z_{n-1}."""
    etas = np.empty((len(z_seq) + 1, dm.S))
    etas[0] = dm.chi
    for k, z in enumerate(z_seq):
        etas[k + 1] = _normalize((etas[k] * dm.g(z)) @ dm.M, f"predictor at time {k + 1}")
    return etas


def exact_log_likelihood(dm: DiscreteModel, z_seq: Sequence) -> float:
    """log chi Q<z_0> ... Q<z_{n-1}> 1, accumulated from per-step normalisers."""
    eta = dm.chi
    total = 0.0
    for z in z_seq:
        weighted = eta * dm.g(z)
        mass = float(weighted.sum())
        if mass <= 0.0:
            raise NumericalUnderflow("likelihood mass vanished")
        total += np.log(mass)
        eta = (weighted / mass) @ dm.M
    return float(total)


def exact_predictor(dm: DiscreteModel, z_seq: Sequence) -> np.ndarray:
    return exact_predictor_flow(dm, z_seq)[-1]


def exact_filter(dm: DiscreteModel, z_seq: Sequence) -> np.ndarray:
    """phi_n for z_seq = z_0 .. z_n (at least one perturbation)."""
    if len(z_seq) == 0:
        raise IndexOutOfRange("the filter needs at least one perturbation")
    eta = exact_predictor(dm, z_seq[:-1])
    return _normalize(eta * dm.g(z_seq[-1]), f"filter at time {len(z_seq) - 1}")


# =====================================================================
# Asymptotic variance
# =====================================================================

def exact_variance_terms(dm: DiscreteModel, z_seq: Sequence, h) -> np.ndarray:
    """The n + 1 summands of sigma^2<0>(h), indexed by m = 0..n."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (dm.S,):
        raise InvalidParams(f"h must have {dm.S} entries", field="h")

    n = len(z_seq)
    etas = exact_predictor_flow(dm, z_seq)
    v = h - float(etas[n] @ h)
    u = np.ones(dm.S)

    terms = np.empty(n + 1)
    for m in range(n, -1, -1):
        terms[m] = float(etas[m] @ (v * v)) / float(etas[m] @ u) ** 2
        if m == 0:
            break
        g = dm.g(z_seq[m - 1])
        v = g * (dm.M @ v)
        u = g * (dm.M @ u)
        scale = float(np.max(u))
        if not np.isfinite(scale) or scale <= 0.0:
            raise NumericalUnderflow(f"kernel chain vanished at m={m - 1}")
        v /= scale
        u /= scale
    return terms


def exact_asymptotic_variance(dm: DiscreteModel, z_seq: Sequence, h, ell: int) -> ExactVariance:
    n = len(z_seq)
    if not 0 <= ell <= n:
        raise IndexOutOfRange(f"ell must lie in [0, {n}], got {ell}")
    terms = exact_variance_terms(dm, z_seq, h)[ell:]
    return ExactVariance(value=float(terms.sum()), ell=int(ell), terms=terms)


def exact_filter_variance(dm: DiscreteModel, z_seq: Sequence, h, ell: int) -> ExactVariance:
    """sigma~^2<l>(h) = sigma^2<l>(g<z_n>{h - phi_n h}) / (eta_n g<z_n>)^2 for z_seq = z_0 .. z_n."""
    if len(z_seq) == 0:
        raise IndexOutOfRange("the filter variance needs at least one perturbation")
    h = np.asarray(h, dtype=np.float64)
    head = z_seq[:-1]
    g = dm.g(z_seq[-1])
    eta = exact_predictor(dm, head)
    phi = _normalize(eta * g, "filter")

    # g only matters up to a constant: rescale to max 1
    g = g / np.max(g)
    f = g * (h - float(phi @ h))
    inner = exact_asymptotic_variance(dm, head, f, ell)
    scale = float(eta @ g) ** 2
    terms = inner.terms / scale
    return ExactVariance(value=float(terms.sum()), ell=inner.ell, terms=terms)


def exact_bias(dm: DiscreteModel, z_seq: Sequence, h, lag: Lag) -> float:
    """sigma^2<0> - sigma^2<(n - lag) v 0>: the summands dropped by truncation."""
    terms = exact_variance_terms(dm, z_seq, h)
    return float(terms[: lag_root(len(z_seq), lag)].sum())


# =====================================================================
# Particle-filter adapter
# =====================================================================

def discrete_model_spec(dm: DiscreteModel) -> ModelSpec:
    """ModelSpec on the states 0..S-1 (stored as floats in the particle array)."""
    cum_M = np.cumsum(dm.M, axis=1)
    log_g = {z: np.log(g) for z, g in dm.potentials.items()}

    def initial_sampler(rng, size):
        return resample_categorical(dm.chi, size, rng).astype(np.float64)

    def transition_sampler(rng, x):
        rows = cum_M[np.asarray(x, dtype=np.intp)]
        u = (1.0 - rng.random(rows.shape[0]))[:, None] * rows[:, -1:]
        nxt = np.sum(rows < u, axis=1)
        return np.minimum(nxt, dm.S - 1).astype(np.float64)

    def log_potential(z, x):
        return log_g[str(z)][np.asarray(x, dtype=np.intp)]

    return ModelSpec(
        initial_sampler=initial_sampler,
        transition_sampler=transition_sampler,
        log_potential=log_potential,
        name="discrete",
        params={"S": dm.S},
    )


def bias_decay(bias_by_lag: Dict[str, float]) -> Optional[Dict[str, float]]:
    """
    Geometric envelope C rho^lag of the truncation bias, with the R^2 of the
    log-linear fit. None when fewer than two lags carry a positive bias.
    """
    lags = [int(lag) for lag in bias_by_lag]
    values = list(bias_by_lag.values())
    if sum(v > 0 for v in values) < 2:
        return None
    r2 = fit_geometric_decay(lags, values)["r2"]
    C, rho = geometric_envelope(lags, values)
    return {"C": C, "rho": rho, "r2": r2}


def exact_tables(dm: DiscreteModel, z_seq: Sequence, h) -> Dict[str, Any]:
    """sigma^2<l> for every l and the bias for every lag, as plain lists."""
    n = len(z_seq)
    logger.debug("exact tables: S=%d n=%d", dm.S, n)
    terms = exact_variance_terms(dm, z_seq, h)
    tails = np.cumsum(terms[::-1])[::-1]
    table: Dict[str, Any] = {
        "n": n,
        "terms": terms.tolist(),
        "variance_by_ell": {str(ell): float(tails[ell]) for ell in range(n + 1)},
        "bias_by_lag": {str(lag): float(terms[: lag_root(n, lag)].sum()) for lag in range(n + 1)},
        "predictor_mean": float(exact_predictor(dm, z_seq) @ np.asarray(h, dtype=np.float64)),
        "log_likelihood": exact_log_likelihood(dm, z_seq),
    }
    table["bias_decay"] = bias_decay(table["bias_by_lag"])
    if n >= 1:
        head_var = {
            str(ell): exact_filter_variance(dm, z_seq, h, ell).value for ell in range(n)
        }
        table["filter_time"] = n - 1
        table["filter_variance_by_ell"] = head_var
        table["filter_mean"] = float(exact_filter(dm, z_seq) @ np.asarray(h, dtype=np.float64))
    return table
