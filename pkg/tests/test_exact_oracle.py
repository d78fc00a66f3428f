import itertools

import numpy as np
import pytest

from pfvar.errors import IndexOutOfRange, InvalidParams
from pfvar.exact_oracle import (
    DiscreteModel,
    bias_decay,
    discrete_model_spec,
    exact_asymptotic_variance,
    exact_bias,
    exact_filter,
    exact_filter_variance,
    exact_log_likelihood,
    exact_predictor,
    exact_predictor_flow,
    exact_tables,
    exact_variance_terms,
)
from pfvar.helpers import make_rng


def _path_marginal(dm, z_seq):
    """Unnormalised eta_n by summing over every state path x_0..x_n."""
    n = len(z_seq)
    out = np.zeros(dm.S)
    for path in itertools.product(range(dm.S), repeat=n + 1):
        weight = dm.chi[path[0]]
        for k in range(n):
            weight *= dm.g(z_seq[k])[path[k]] * dm.M[path[k], path[k + 1]]
        out[path[-1]] += weight
    return out


def _dense_terms(dm, z_seq, h):
    """Variance summands from explicit products Q_m ... Q_{n-1}, no rescaling."""
    n = len(z_seq)
    etas = exact_predictor_flow(dm, z_seq)
    f = h - etas[n] @ h
    terms = []
    for m in range(n + 1):
        Q = np.eye(dm.S)
        for k in range(m, n):
            Q = Q @ (np.diag(dm.g(z_seq[k])) @ dm.M)
        terms.append(etas[m] @ (Q @ f) ** 2 / (etas[m] @ Q.sum(axis=1)) ** 2)
    return np.array(terms)


# ---------- model validation ----------

@pytest.mark.parametrize(
    "changes",
    [
        {"chi": [0.6, 0.6]},
        {"chi": [1.0]},
        {"M": [[0.5, 0.5], [0.9, 0.2]]},
        {"M": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]},
        {"potentials": {"a": [1.0, 0.0]}},
        {"potentials": {}},
        {"observations": ["a", "zzz"]},
    ],
)
def test_invalid_models_are_rejected(two_state, changes):
    data = {**two_state.to_dict(), **changes}
    with pytest.raises(InvalidParams):
        DiscreteModel.from_dict(data)


def test_from_dict_rejects_unknown_keys(two_state):
    with pytest.raises(InvalidParams):
        DiscreteModel.from_dict({**two_state.to_dict(), "extra": 1})


def test_json_document(tmp_path, three_state):
    path = three_state.to_json(tmp_path / "model.json")
    loaded = DiscreteModel.from_json(path)
    np.testing.assert_array_equal(loaded.M, three_state.M)
    assert loaded.observations == three_state.observations


def test_unknown_symbol_lookup(two_state):
    with pytest.raises(InvalidParams):
        two_state.g("c")


# ---------- flow ----------

def test_predictor_matches_path_enumeration(three_state):
    z = three_state.observations[:4]
    brute = _path_marginal(three_state, z)
    np.testing.assert_allclose(exact_predictor(three_state, z), brute / brute.sum(), rtol=1e-12)


def test_log_likelihood_matches_path_enumeration(three_state):
    z = three_state.observations[:4]
    brute = 0.0
    for path in itertools.product(range(3), repeat=len(z)):
        weight = three_state.chi[path[0]]
        for k in range(len(z)):
            weight *= three_state.g(z[k])[path[k]]
            if k + 1 < len(z):
                weight *= three_state.M[path[k], path[k + 1]]
        brute += weight
    assert exact_log_likelihood(three_state, z) == pytest.approx(np.log(brute), rel=1e-12)


def test_filter_reweights_predictor(two_state):
    z = two_state.observations[:5]
    eta = exact_predictor(two_state, z[:-1])
    phi = eta * two_state.g(z[-1])
    np.testing.assert_allclose(exact_filter(two_state, z), phi / phi.sum())
    with pytest.raises(IndexOutOfRange):
        exact_filter(two_state, [])


# ---------- variance ----------

def test_variance_terms_match_dense_products(three_state):
    h = np.array([0.0, 1.0, 3.0])
    z = three_state.observations
    np.testing.assert_allclose(
        exact_variance_terms(three_state, z, h), _dense_terms(three_state, z, h), rtol=1e-10
    )


def test_time_zero_variance_is_chi_variance(three_state):
    h = np.array([1.0, -1.0, 2.0])
    mean = three_state.chi @ h
    expected = three_state.chi @ (h - mean) ** 2
    assert exact_asymptotic_variance(three_state, [], h, 0).value == pytest.approx(expected)


def test_truncation_and_bias(two_state):
    z = two_state.observations[:8]
    h = np.array([0.0, 1.0])
    full = exact_asymptotic_variance(two_state, z, h, 0).value
    for lag in range(9):
        root = max(8 - lag, 0)
        truncated = exact_asymptotic_variance(two_state, z, h, root).value
        bias = exact_bias(two_state, z, h, lag)
        assert bias >= 0.0
        assert bias == pytest.approx(full - truncated, abs=1e-14)
    assert exact_bias(two_state, z, h, 8) == 0.0
    assert exact_bias(two_state, z, h, float("inf")) == 0.0


def test_ell_out_of_range(two_state):
    with pytest.raises(IndexOutOfRange):
        exact_asymptotic_variance(two_state, ["a", "b"], np.array([0.0, 1.0]), 3)


def test_h_shape_is_checked(two_state):
    with pytest.raises(InvalidParams):
        exact_variance_terms(two_state, ["a"], np.array([1.0, 2.0, 3.0]))


def test_filter_variance_is_scale_free(three_state):
    z = three_state.observations[:5]
    h = np.array([0.0, 1.0, 0.0])
    g = three_state.g(z[-1])
    eta = exact_predictor(three_state, z[:-1])
    phi = exact_filter(three_state, z)
    direct = exact_asymptotic_variance(three_state, z[:-1], g * (h - phi @ h), 1).value / (eta @ g) ** 2
    assert exact_filter_variance(three_state, z, h, 1).value == pytest.approx(direct, rel=1e-10)


def test_tables(two_state):
    z = two_state.observations[:6]
    h = np.array([0.0, 1.0])
    tables = exact_tables(two_state, z, h)
    assert tables["n"] == 6
    assert tables["variance_by_ell"]["0"] == pytest.approx(sum(tables["terms"]))
    assert tables["bias_by_lag"]["6"] == 0.0
    assert tables["filter_time"] == 5
    assert set(tables["filter_variance_by_ell"]) == {str(l) for l in range(6)}
    assert tables["predictor_mean"] == pytest.approx(exact_predictor(two_state, z)[1])
    decay = tables["bias_decay"]
    assert 0.0 < decay["rho"] <= 1.0
    for lag, bias in tables["bias_by_lag"].items():
        assert bias <= decay["C"] * decay["rho"] ** int(lag) * (1 + 1e-12)


def test_bias_decay_of_a_geometric_sequence():
    decay = bias_decay({"0": 4.0, "1": 2.0, "2": 1.0, "3": 0.0})
    assert decay["rho"] == pytest.approx(0.5)
    assert decay["C"] == pytest.approx(4.0)
    assert decay["r2"] == pytest.approx(1.0)
    assert bias_decay({"0": 1.0, "1": 0.0}) is None


# ---------- particle adapter ----------

def test_discrete_spec_sampling(two_state):
    spec = discrete_model_spec(two_state)
    rng = make_rng(17)
    start = spec.initial_sampler(rng, 20000)
    assert set(np.unique(start)) <= {0.0, 1.0}
    assert abs(np.mean(start == 1.0) - 0.5) < 0.02
    moved = spec.transition_sampler(rng, np.zeros(20000))
    assert abs(np.mean(moved == 1.0) - 0.2) < 0.02
    np.testing.assert_allclose(spec.log_potential("a", np.array([0.0, 1.0])), np.log([1.0, 2.0]))
