"""
End-to-end statistical checks of the estimators against exact and brute-force
references. The long ones carry the `slow` marker.
"""

import numpy as np
import pytest

from pfvar.config import config_from_dict
from pfvar.exact_oracle import (
    DiscreteModel,
    discrete_model_spec,
    exact_asymptotic_variance,
    exact_bias,
)
from pfvar.experiments import ci_failure_rates, lag_sweep, long_run, replicate_variance_reference, run_to
from pfvar.fk_model import identity, state_indicator
from pfvar.helpers import LAG_INF, derive_seed, make_rng
from pfvar.models import REFERENCE_LG, make_linear_gaussian
from pfvar.smc_engine import genealogy_slots, init_filter, reweight, step, unique_ancestor_count
from pfvar.variance_estimators import (
    cle_predictor_variance,
    fixed_lag_filter_variance,
    fixed_lag_predictor_variance,
)

SV = {"kind": "stochastic_volatility", "beta": 0.641, "phi": 0.975, "sigma": 0.165}
LG = {"kind": "linear_gaussian", "phi": 0.98, "sigma_u": 0.2, "sigma_v": 1.0}


def _random_discrete_model(rng, S=3, symbols=("u", "v", "w")):
    chi = rng.dirichlet(np.ones(S))
    M = rng.dirichlet(np.ones(S), size=S)
    potentials = {s: rng.uniform(0.1, 2.0, size=S) for s in symbols}
    return DiscreteModel(chi=chi, M=M, potentials=potentials)


def _close(a, b, rel):
    return abs(a - b) <= rel * max(abs(a), abs(b)) + 1e-300


@pytest.mark.slow
def test_fixed_lag_estimate_converges_to_exact_variance(two_state):
    n, lag, replicates = 6, 3, 200
    z = two_state.observations[:n]
    h = state_indicator(1)
    exact = exact_asymptotic_variance(two_state, z, np.array([0.0, 1.0]), n - lag).value
    spec = discrete_model_spec(two_state)

    errors = {}
    for N in (1_000, 10_000, 100_000):
        estimates = [
            fixed_lag_predictor_variance(
                run_to(spec, z, N, lag, derive_seed(2024, "sweep", r), n, "predictor"), h
            ).value
            for r in range(replicates)
        ]
        errors[N] = abs(np.mean(estimates) - exact) / exact

    assert errors[100_000] < 0.05
    assert errors[100_000] <= errors[1_000] + 0.01


def test_fixed_lag_equals_cle_when_lag_covers_the_run():
    rng = np.random.default_rng(101)
    model = make_linear_gaussian(REFERENCE_LG)
    for case in range(50):
        N = int(rng.integers(2, 60))
        n = int(rng.integers(0, 15))
        lag = n + int(rng.integers(0, 4))
        state = init_filter(model, N, lag=lag, seed=case)
        for y in rng.normal(size=n):
            state = step(state, float(y))
        fixed = fixed_lag_predictor_variance(state, identity()).value
        cle = cle_predictor_variance(state, identity()).value
        assert _close(fixed, cle, 1e-12), (case, fixed, cle)


def test_filter_weighted_and_ratio_forms_agree():
    rng = np.random.default_rng(202)
    for case in range(50):
        dm = _random_discrete_model(rng)
        spec = discrete_model_spec(dm)
        N = int(rng.integers(2, 80))
        n = int(rng.integers(0, 10))
        lag = int(rng.integers(0, 6))
        z = list(rng.choice(["u", "v", "w"], size=n + 1))
        state = init_filter(spec, N, lag=lag, seed=case)
        for m in range(n):
            state = step(state, z[m])
        state = reweight(state, z[n])
        h = state_indicator(int(rng.integers(0, 3)))
        a = fixed_lag_filter_variance(state, h, form="weighted").value
        b = fixed_lag_filter_variance(state, h, form="ratio").value
        assert _close(a, b, 1e-9), (case, a, b)


def test_exact_bias_decays_geometrically(two_state):
    h = np.array([0.0, 1.0])
    z = two_state.observations[:14]
    for lag in range(9):
        assert exact_bias(two_state, z, h, lag + 2) <= 0.9 * exact_bias(two_state, z, h, lag)

    worst = [
        max(exact_bias(two_state, two_state.observations[:n], h, lag) for n in range(15))
        for lag in range(9)
    ]
    assert all(later <= earlier * (1 + 1e-12) for earlier, later in zip(worst, worst[1:]))
    assert worst[-1] < worst[0]


@pytest.mark.slow
def test_sv_lag_sweep_pattern():
    cfg = config_from_dict(
        {"model": SV, "N": 1000, "n": 150, "lags": [2, 10, 20, "inf"], "replicates": 50, "seed": 1}
    )
    results = lag_sweep(cfg)
    assert results[2].mean < 0.6 * results[20].mean
    reference = replicate_variance_reference(cfg, replicates=300)
    assert abs(results[20].mean - reference) <= 0.25 * reference


@pytest.mark.slow
def test_lg_interval_calibration():
    cfg = config_from_dict({"model": LG, "N": 1000, "n": 200, "lags": [15], "replicates": 200, "seed": 3})
    rates = ci_failure_rates(cfg)
    assert 0.02 <= rates["failure_rate"].mean() <= 0.10


@pytest.mark.slow
def test_long_run_collapse_and_fixed_lag_stability():
    cfg = config_from_dict({"model": SV, "N": 500, "n": 2000, "lags": [20], "replicates": 1, "seed": 7})
    df = long_run(cfg)
    collapsed = df.index[df["eve_count"] == 1]
    assert len(collapsed) > 0
    first = collapsed[0]
    assert (df.loc[first:, "cle"] == 0.0).all()
    assert (df["fixed_lag"] > 0).mean() >= 0.99


def test_genealogy_storage_stays_within_lag_window():
    model = make_linear_gaussian(REFERENCE_LG)
    N, lag = 16, 12
    rng = make_rng(5)
    state = init_filter(model, N, lag=lag, seed=9)
    bound = (lag + 1) * N + N
    for y in rng.normal(size=10_000):
        state = step(state, float(y))
        assert genealogy_slots(state) <= bound


def test_genealogy_properties_on_random_runs():
    rng = np.random.default_rng(303)
    dm = _random_discrete_model(rng)
    spec = discrete_model_spec(dm)
    checked = 0
    while checked < 10_000:
        N = int(rng.integers(1, 17))
        n = int(rng.integers(0, 33))
        lag = LAG_INF if rng.random() < 0.2 else int(rng.integers(0, n + 3))
        state = init_filter(spec, N, lag=lag, seed=int(rng.integers(2 ** 32)))
        eve_count = unique_ancestor_count(state)
        for z in rng.choice(["u", "v", "w"], size=n):
            old_window = state.enoch_window
            old_root = state.window_root
            old_eve = state.eve
            state = step(state, z)
            anc = state.ancestors.indices
            window = state.enoch_window

            # identity top row
            np.testing.assert_array_equal(window[-1], np.arange(N))
            # Enoch recursion on every row that survived
            kept = old_window[state.window_root - old_root:]
            np.testing.assert_array_equal(window[:-1], kept[:, anc])
            np.testing.assert_array_equal(state.eve, old_eve[anc])
            # each row partitions the particles into ancestral groups
            for row in window:
                assert row.min() >= 0 and row.max() < N
                assert np.bincount(row, minlength=N).sum() == N
            # older rows never have more distinct ancestors
            counts = [np.unique(row).size for row in window]
            assert counts == sorted(counts)
            new_eve_count = unique_ancestor_count(state)
            assert new_eve_count <= eve_count
            assert new_eve_count <= counts[0]
            eve_count = new_eve_count
            checked += 1
