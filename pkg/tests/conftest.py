import json

import numpy as np
import pytest

from pfvar.exact_oracle import DiscreteModel
from pfvar.models import REFERENCE_LG, REFERENCE_SV, make_linear_gaussian, make_stochastic_volatility

ALTERNATING = ["a", "b"] * 8


@pytest.fixture
def two_state():
    """Strongly mixing two-state chain with mirrored potentials."""
    return DiscreteModel(
        chi=np.array([0.5, 0.5]),
        M=np.array([[0.8, 0.2], [0.3, 0.7]]),
        potentials={"a": np.array([1.0, 2.0]), "b": np.array([2.0, 1.0])},
        observations=list(ALTERNATING),
    )


@pytest.fixture
def three_state():
    return DiscreteModel(
        chi=np.array([0.2, 0.5, 0.3]),
        M=np.array([[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.25, 0.25, 0.5]]),
        potentials={
            "x": np.array([0.5, 1.5, 3.0]),
            "y": np.array([2.0, 0.7, 1.1]),
        },
        observations=["x", "y", "y", "x", "x", "y"],
    )



@pytest.fixture
def lg_model():
    return make_linear_gaussian(REFERENCE_LG)


@pytest.fixture
def sv_model():
    return make_stochastic_volatility(REFERENCE_SV)


@pytest.fixture
def write_config(tmp_path):
    """Write a config document into tmp_path and return its path."""

    def _write(data, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def lg_config():
    """Factory for a small linear Gaussian experiment config."""

    def _make(**overrides):
        data = {
            "model": {"kind": "linear_gaussian", "phi": 0.98, "sigma_u": 0.2, "sigma_v": 1.0},
            "N": 50,
            "n": 12,
            "lags": [2, 5, "inf"],
            "replicates": 4,
            "seed": 11,
        }
        data.update(overrides)
        return data

    return _make


@pytest.fixture
def discrete_config():
    """Factory for an experiment config embedding a DiscreteModel inline."""

    def _make(dm, **overrides):
        data = {
            "model": {"kind": "discrete", **dm.to_dict()},
            "N": 200,
            "n": 6,
            "lags": [0, 3, "inf"],
            "replicates": 4,
            "seed": 5,
            "test_function": {"kind": "state", "state": 1},
        }
        data.update(overrides)
        return data

    return _make
