import math
from dataclasses import replace

import numpy as np
import pytest

from pfvar.errors import DegenerateWeights, NonFinitePotential
from pfvar.experiments import run_to
from pfvar.fk_model import (
    ModelSpec,
    custom,
    identity,
    indicator,
    log_weights,
    potential,
    shifted_weights,
    state_indicator,
)
from pfvar.smc_engine import filter_estimate, predictor_estimate
from pfvar.variance_estimators import fixed_lag_filter_variance, fixed_lag_predictor_variance


def _model(log_potential):
    return ModelSpec(
        initial_sampler=lambda rng, size: rng.standard_normal(size),
        transition_sampler=lambda rng, x: x,
        log_potential=log_potential,
    )


def test_potential_is_exp_of_log_potential(lg_model):
    x = np.array([-1.0, 0.0, 2.5])
    g = potential(lg_model, 0.3, x)
    expected = np.exp(-0.5 * (0.3 - x) ** 2) / math.sqrt(2 * math.pi)
    np.testing.assert_allclose(g, expected, rtol=1e-12)


def test_potential_rejects_non_finite_log():
    model = _model(lambda z, x: np.where(x > 0, -np.inf, 0.0))
    with pytest.raises(NonFinitePotential):
        potential(model, 0.0, np.array([-1.0, 1.0]))


def test_log_weights_allows_some_zero_weights():
    model = _model(lambda z, x: np.where(x > 0, -np.inf, 0.0))
    logw = log_weights(model, 0.0, np.array([-1.0, 1.0]))
    assert logw[0] == 0.0 and logw[1] == -np.inf


def test_log_weights_all_zero_is_degenerate():
    model = _model(lambda z, x: np.full(np.shape(x), -np.inf))
    with pytest.raises(DegenerateWeights):
        log_weights(model, 0.0, np.zeros(3))


def test_log_weights_rejects_nan():
    model = _model(lambda z, x: np.full(np.shape(x), np.nan))
    with pytest.raises(NonFinitePotential):
        log_weights(model, 0.0, np.zeros(3))


def test_log_weights_broadcasts_constant_potential():
    model = _model(lambda z, x: 0.0)
    assert log_weights(model, 1.0, np.zeros(4)).shape == (4,)


def test_shifted_weights_peak_at_one():
    w = shifted_weights(np.array([-1000.0, -1001.0, -999.5]))
    assert w.max() == 1.0
    np.testing.assert_allclose(w, np.exp([-0.5, -1.5, 0.0]))


def test_test_functions():
    x = np.array([-1.0, 0.0, 0.5, 2.0])
    np.testing.assert_array_equal(identity()(x), x)
    np.testing.assert_array_equal(indicator(0.0, 1.0)(x), [0.0, 1.0, 1.0, 0.0])
    np.testing.assert_array_equal(state_indicator(2)(np.array([0.0, 2.0, 1.0])), [0.0, 1.0, 0.0])
    squared = custom(lambda v: v ** 2, power=2)
    assert squared.params == {"power": 2}
    np.testing.assert_array_equal(squared(x), x ** 2)


def test_indicator_needs_ordered_bounds():
    with pytest.raises(ValueError):
        indicator(1.0, 0.0)


def test_model_spec_rejects_zero_dimension():
    with pytest.raises(ValueError):
        ModelSpec(lambda r, s: None, lambda r, x: x, lambda z, x: x, state_dim=0)


def test_constant_offset_in_log_potential_changes_nothing(lg_model):
    shifted = replace(lg_model, log_potential=lambda z, x: lg_model.log_potential(z, x) + 40.0 + 3.0 * z)
    ys = [0.5, -0.2, 0.8, 0.1, -0.7, 0.3]
    runs = [run_to(model, ys, 60, 2, 23, 5, "filter") for model in (lg_model, shifted)]
    for read in (
        lambda s: predictor_estimate(s, identity()),
        lambda s: filter_estimate(s, identity()),
        lambda s: fixed_lag_predictor_variance(s, identity()).value,
        lambda s: fixed_lag_filter_variance(s, identity()).value,
    ):
        assert read(runs[1]) == pytest.approx(read(runs[0]), rel=1e-10)
