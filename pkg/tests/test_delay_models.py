import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aoimdp.delay_models import (
    DelayModel,
    empirical_quantile_edges,
    matched_mean,
    model_moments,
    sample_delay,
)
from aoimdp.errors import ConfigError, DomainError, UnsupportedOperation

PARAMETRIC = [
    DelayModel.constant(1.5),
    DelayModel.exponential(0.5),
    DelayModel.poisson(4.0, 0.25),
    DelayModel.geometric(0.25, 0.5),
    DelayModel.two_point(0.1, 10.0, 0.1),
]


def test_two_point_moments():
    mean, var = model_moments(DelayModel.two_point(0.1, 10.0, 0.1))
    assert mean == pytest.approx(1.09, abs=1e-12)
    # q(1-q)(y_hi-y_lo)^2 = 0.09 * 9.9^2
    assert var == pytest.approx(8.8209, abs=1e-12)


@pytest.mark.parametrize("model", PARAMETRIC, ids=lambda m: m.kind)
def test_sample_moments_match_closed_form(model):
    rng = np.random.default_rng(42)
    draws = np.array([model.sample(rng) for _ in range(40000)])
    mean, var = model_moments(model)
    se = np.sqrt(var / draws.size) if var else 0.0
    assert abs(draws.mean() - mean) <= 5 * se + 1e-12
    assert draws.var() == pytest.approx(var, rel=0.1, abs=1e-12)
    assert np.all(draws >= 0)


@pytest.mark.parametrize("model", PARAMETRIC, ids=lambda m: m.kind)
def test_sampling_is_seed_deterministic(model):
    a = [sample_delay(model, np.random.default_rng(5)) for _ in range(3)]
    b = [sample_delay(model, np.random.default_rng(5)) for _ in range(3)]
    assert a == b


def test_counting_kinds_land_on_the_unit_lattice():
    rng = np.random.default_rng(0)
    for m in (DelayModel.poisson(3.0, 0.5), DelayModel.geometric(0.3, 0.5)):
        draws = np.array([m.sample(rng) for _ in range(500)])
        np.testing.assert_allclose(draws / 0.5, np.round(draws / 0.5))
    assert min(DelayModel.geometric(0.3, 1.0).sample(rng) for _ in range(500)) >= 1.0


@pytest.mark.parametrize(
    "kind,params,key",
    [
        ("exponential", {}, "delay.rate"),
        ("exponential", {"rate": 0.0}, "delay.rate"),
        ("poisson", {"mean": -1.0, "time_unit": 1.0}, "delay.mean"),
        ("geometric", {"p": 1.5, "time_unit": 1.0}, "delay.p"),
        ("two_point", {"y_lo": 2.0, "y_hi": 1.0, "q": 0.5}, "delay.y_hi"),
        ("two_point", {"y_lo": 0.0, "y_hi": 1.0, "q": 2.0}, "delay.q"),
        ("ssp", {"sound_speed": 0.0}, "delay.sound_speed"),
        ("gamma", {}, "delay.kind"),
    ],
)
def test_invalid_parameters_name_the_key(kind, params, key):
    with pytest.raises(ConfigError, match=key):
        DelayModel(kind, params)


def test_params_are_read_only():
    m = DelayModel.exponential(1.0)
    with pytest.raises(TypeError):
        m.params["rate"] = 2.0


def test_ssp_has_no_closed_form_moments():
    with pytest.raises(UnsupportedOperation):
        model_moments(DelayModel.ssp())


def test_ssp_delay_tracks_round_trip_time():
    m = DelayModel.ssp(snr_db=30.0)
    rng = np.random.default_rng(1)
    for d in (0.0, 15.0, 75.0, 140.0):
        y = m.sample(rng, d)
        assert y == pytest.approx(2 * d / 1500.0, abs=1 / 2000.0)


def test_ssp_needs_a_distance_inside_range():
    m = DelayModel.ssp(max_range=100.0)
    rng = np.random.default_rng(0)
    assert m.needs_distance
    with pytest.raises(DomainError):
        m.sample(rng)
    with pytest.raises(DomainError):
        m.sample(rng, 150.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 50.0), st.sampled_from(["exponential", "poisson", "geometric", "constant"]))
def test_matched_mean_hits_the_target(mean, kind):
    got, _ = model_moments(matched_mean(kind, mean))
    assert got == pytest.approx(mean, rel=1e-12)


def test_quantile_edges():
    rng = np.random.default_rng(0)
    edges = empirical_quantile_edges(DelayModel.exponential(1.0), 4, rng, n_draws=20000)
    np.testing.assert_allclose(edges, -np.log(1 - np.array([0.25, 0.5, 0.75])), atol=0.05)
    assert empirical_quantile_edges(DelayModel.constant(1.0), 1, rng).size == 0
    with pytest.raises(DomainError):
        empirical_quantile_edges(DelayModel.ssp(), 3, rng)
