import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from pydantic import ValidationError

from mcloc.errors import InvalidParameterError, QuorumTimeoutError
from mcloc.options import Strategy
from mcloc.sensors import SensorParams, next_slot, reflect, walk_until_release


@given(st.lists(st.floats(min_value=-5.0, max_value=6.0), min_size=1, max_size=50))
def test_reflect_keeps_positions_inside(positions):
    """
    GIVEN positions anywhere within a few widths of a unit area
    WHEN they are reflected at the boundaries
    THEN every position ends up in [0, 1]
    """
    folded = reflect(np.asarray(positions), 1.0)
    assert np.all(folded >= 0.0)
    assert np.all(folded <= 1.0)


def test_reflect_mirrors_at_each_wall():
    folded = reflect(np.array([0.3, 1.2, -0.2, 2.5]), 1.0)
    assert folded == pytest.approx([0.3, 0.8, 0.2, 0.5])


def test_next_slot_boundaries():
    assert next_slot(0.0, 1.0) == 1
    assert next_slot(1.0, 1.0) == 1
    assert next_slot(1.0001, 1.0) == 2
    assert next_slot(2.5, 1.0) == 3


def test_sensor_params_rejects_quorum_above_population():
    with pytest.raises(ValidationError):
        SensorParams(n_sensors=3, D_s=0.01, dt=0.1, capture_radius=0.1, slot=1.0, n_th=4,
                     t_th=10.0, M=1.0)


def test_sensor_params_rejects_timeout_off_the_step_grid():
    with pytest.raises(ValidationError):
        SensorParams(n_sensors=3, D_s=0.01, dt=0.1, capture_radius=0.1, slot=1.0, n_th=2,
                     t_th=10.05, M=1.0)


def test_collaborative_release_at_first_slot_when_injected_on_the_abnormality(
        unit_arena, walk_params):
    """
    GIVEN an abnormality at the injection point, so every sensor activates at once
    WHEN collaborative sensors walk until release
    THEN exactly N_th sensors release at the first slot boundary T
    """
    # Act
    event = walk_until_release(walk_params, unit_arena, unit_arena.center,
                               Strategy.COLLABORATIVE, rng_seed=1)
    # Assert
    assert event.n_released == walk_params.n_th
    assert event.trigger_time == 0.0
    assert event.release_time == pytest.approx(walk_params.slot)
    assert event.slot_index == 1


def test_collaborative_release_follows_the_quorum(unit_arena, walk_params):
    """
    GIVEN an abnormality 0.2 m from the injection point
    WHEN collaborative sensors walk until release for several seeds
    THEN the release is at the first slot boundary after the quorum time, with N_th sensors
    """
    for seed in range(5):
        # Act
        event = walk_until_release(walk_params, unit_arena, (0.7, 0.5), Strategy.COLLABORATIVE,
                                   rng_seed=seed)
        # Assert
        assert event.n_released == walk_params.n_th
        assert event.trigger_time <= event.release_time
        assert event.release_time - event.trigger_time < walk_params.slot + 1e-9
        assert event.release_time == pytest.approx(event.slot_index * walk_params.slot)


def test_collaborative_walk_times_out(unit_arena):
    """
    GIVEN sensors that barely move and a far-away abnormality
    WHEN collaborative sensors walk with a short horizon
    THEN QuorumTimeoutError is raised
    """
    slow = SensorParams(n_sensors=5, D_s=1e-8, dt=0.1, capture_radius=0.01, slot=1.0, n_th=2,
                        t_th=10.0, M=1.0)
    with pytest.raises(QuorumTimeoutError):
        walk_until_release(slow, unit_arena, (0.0, 0.0), Strategy.COLLABORATIVE, rng_seed=0,
                           max_horizon=5.0)


def test_noncollaborative_release_at_timeout(unit_arena, walk_params):
    """
    GIVEN an abnormality at the injection point
    WHEN non-collaborative sensors walk without conditioning
    THEN all sensors release at the slot boundary after T_th
    """
    event = walk_until_release(walk_params, unit_arena, unit_arena.center,
                               Strategy.NONCOLLABORATIVE, rng_seed=3)
    assert event.n_released == walk_params.n_sensors
    assert event.trigger_time == pytest.approx(walk_params.t_th)
    assert event.release_time == pytest.approx(10.0)


def test_noncollaborative_conditioning_gives_up(unit_arena, walk_params):
    with pytest.raises(QuorumTimeoutError):
        walk_until_release(walk_params, unit_arena, unit_arena.center,
                           Strategy.NONCOLLABORATIVE, rng_seed=3, condition_to_quorum=True,
                           max_attempts=3)


def test_noncollaborative_conditioning_accepts_matching_walks(unit_arena):
    params = SensorParams(n_sensors=4, D_s=0.01, dt=0.1, capture_radius=0.1, slot=1.0, n_th=4,
                          t_th=10.0, M=1.0)
    event = walk_until_release(params, unit_arena, unit_arena.center,
                               Strategy.NONCOLLABORATIVE, rng_seed=0, condition_to_quorum=True)
    assert event.n_released == params.n_th


def test_walk_is_reproducible(unit_arena, walk_params):
    first = walk_until_release(walk_params, unit_arena, (0.3, 0.6), Strategy.COLLABORATIVE,
                               rng_seed=[4, 2])
    second = walk_until_release(walk_params, unit_arena, (0.3, 0.6), Strategy.COLLABORATIVE,
                                rng_seed=[4, 2])
    assert first == second


def test_walk_rejects_abnormality_outside(unit_arena, walk_params):
    with pytest.raises(InvalidParameterError):
        walk_until_release(walk_params, unit_arena, (1.5, 0.5), Strategy.COLLABORATIVE,
                           rng_seed=0)
