import logging
import math
import pickle

import numpy as np
import pytest
from pydantic import ValidationError

from mcloc.errors import DomainError, InvalidParameterError
from mcloc.medium import (Arena, gateway_gain, hit_probability, marker_mean_count, mean_count,
                          mean_function, observation_time, peak_time)


def test_hit_probability_at_center_distance():
    """
    GIVEN the default channel and an abnormality at the center of a 1 cm area
    WHEN the hit probability is evaluated at the peak time 12500 s
    THEN it equals V_F / (4 pi D t) exp(-1), about 2.6e-4
    """
    # Arrange
    d = 1e-2 * math.sqrt(2) / 2
    expected = 1.11e-7 / (math.pi * 5e-5) * math.exp(-1)
    # Act
    prob = hit_probability(d, 12500, 1.11e-7, 1e-9, 2)
    # Assert
    assert prob == pytest.approx(expected, rel=1e-12)
    assert prob == pytest.approx(2.6e-4, rel=1e-3)


def test_hit_probability_at_zero_distance():
    assert hit_probability(0.0, 12500, 1.11e-7, 1e-9) == pytest.approx(
        1.11e-7 / (4 * math.pi * 1e-9 * 12500))


def test_hit_probability_vanishes_far_away():
    assert hit_probability(1.0, 12500, 1.11e-7, 1e-9) == pytest.approx(0.0, abs=1e-300)


def test_hit_probability_accepts_arrays():
    d = np.array([0.0, 1e-3, 5e-3])
    probs = hit_probability(d, 12500, 1.11e-7, 1e-9)
    assert probs.shape == (3,)
    assert np.all(np.diff(probs) < 0)


def test_hit_probability_rejects_bad_arguments():
    with pytest.raises(InvalidParameterError):
        hit_probability(1e-3, 0.0, 1.11e-7, 1e-9)
    with pytest.raises(DomainError):
        hit_probability(-1e-3, 100.0, 1.11e-7, 1e-9)


def test_hit_probability_is_clipped_with_a_warning(caplog):
    """
    GIVEN a receiver volume far larger than the spread of the molecules
    WHEN the hit probability is evaluated at zero distance
    THEN it is clipped to 1 and a warning is logged
    """
    with caplog.at_level(logging.WARNING, logger="mcloc.medium"):
        prob = hit_probability(0.0, 1.0, 1.0, 1e-9)
    assert prob == 1.0
    assert "clipped" in caplog.text


def test_peak_time_values():
    """
    GIVEN the distance from an FC to the center of a 1 cm area
    WHEN the peak time is computed
    THEN it is 12500 s and scales with the square of the distance
    """
    d = 1e-2 * math.sqrt(2) / 2
    assert peak_time(d, 1e-9) == pytest.approx(12500)
    assert peak_time(2 * d, 1e-9) == pytest.approx(4 * peak_time(d, 1e-9))


def test_peak_time_maximises_hit_probability():
    d = 3e-3
    t_star = peak_time(d, 1e-9)
    peak = hit_probability(d, t_star, 1.11e-7, 1e-9)
    assert peak > hit_probability(d, 0.99 * t_star, 1.11e-7, 1e-9)
    assert peak > hit_probability(d, 1.01 * t_star, 1.11e-7, 1e-9)


def test_peak_time_rejects_non_positive_distance():
    with pytest.raises(InvalidParameterError):
        peak_time(0.0, 1e-9)


def test_observation_time_is_center_peak_time(arena, params):
    assert observation_time(arena, params) == pytest.approx(12500)


def test_mean_count_at_center(arena, params):
    """
    GIVEN 1e6 released molecules of each type
    WHEN the mean count at the center distance is computed
    THEN it is about 260 molecules
    """
    assert mean_count(arena.center_distance, arena, params) == pytest.approx(259.96, rel=1e-4)


def test_mean_count_is_decreasing(arena, params):
    d = np.linspace(0.0, arena.w * math.sqrt(2), 50)
    assert np.all(np.diff(mean_count(d, arena, params)) < 0)


def test_mean_count_ratio_depends_only_on_squared_distances(arena, params):
    """
    GIVEN two distances d1 and d2
    WHEN the ratio of their mean counts is taken
    THEN it equals exp((d2^2 - d1^2) / (4 D T_obs))
    """
    d1, d2 = 3e-3, 8e-3
    ratio = mean_count(d1, arena, params) / mean_count(d2, arena, params)
    expected = math.exp((d2 ** 2 - d1 ** 2) / (4 * params.D * observation_time(arena, params)))
    assert ratio == pytest.approx(expected, rel=1e-12)


def test_mean_count_with_no_release(arena, params):
    assert mean_count(5e-3, arena, params, released=0.0) == 0.0


def test_mean_count_rejects_negative_release(arena, params):
    with pytest.raises(InvalidParameterError):
        mean_count(5e-3, arena, params, released=-1.0)


def test_marker_mean_count_is_linear(arena, params):
    """
    GIVEN FC counts 0, 260 and 520
    WHEN the gateway marker means are computed
    THEN they are alpha mu_tilde times the counts
    """
    t_gateway = arena.d_fg ** 2 / (4 * params.D2)
    mu_tilde = params.V_G / (4 * math.pi * params.D2 * t_gateway) * math.exp(-1)
    assert marker_mean_count(0, arena, params) == 0.0
    assert marker_mean_count(260, arena, params) == pytest.approx(1000 * mu_tilde * 260,
                                                                  rel=1e-12)
    assert marker_mean_count(520, arena, params) == pytest.approx(
        2 * marker_mean_count(260, arena, params))


def test_gateway_gain_default_scenario(arena, params):
    assert gateway_gain(arena, params) == pytest.approx(1000 * 8.3376e-5, rel=1e-3)


def test_marker_mean_count_rejects_negative_counts(arena, params):
    with pytest.raises(InvalidParameterError):
        marker_mean_count(-1, arena, params)


def test_mean_function_noisy_with_unit_gain_is_ideal(arena, params):
    d = np.linspace(1e-3, 1.2e-2, 7)
    ideal = mean_function(arena, params, "ideal")
    noisy = mean_function(arena, params, "noisy", gain=1.0)
    assert np.array_equal(ideal(d), noisy(d))


def test_mean_function_noisy_scales_by_gateway_gain(arena, params):
    d = 4e-3
    noisy = mean_function(arena, params, "noisy")
    assert noisy(d) == pytest.approx(gateway_gain(arena, params) * mean_count(d, arena, params))


def test_mean_function_is_picklable(arena, params):
    fn = mean_function(arena, params, "noisy")
    assert pickle.loads(pickle.dumps(fn))(5e-3) == fn(5e-3)


def test_mean_function_rejects_unknown_channel(arena, params):
    with pytest.raises(InvalidParameterError):
        mean_function(arena, params, "optical")


def test_fc_distances(arena):
    distances = arena.fc_distances([[0.0, 0.0], [arena.w, arena.w]], n_fc=3)
    assert distances.shape == (2, 3)
    assert distances[0] == pytest.approx([arena.w, 0.0, arena.w])
    assert distances[1] == pytest.approx([arena.w, arena.w * math.sqrt(2), arena.w])


def test_arena_rejects_non_positive_side():
    with pytest.raises(ValidationError):
        Arena(w=0.0, d_fg=1.0)
