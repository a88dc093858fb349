""" Shared fixtures: the default scenario geometry and channel, and schemes built on it """
import math

import pytest

from mcloc.clustering import build_grid, build_radial
from mcloc.medium import Arena, DiffusionParams, mean_function
from mcloc.sensors import SensorParams


@pytest.fixture
def arena():
    """ 1 cm square with the gateway 5 w from every FC """
    return Arena(w=1e-2, d_fg=5e-2)


@pytest.fixture
def params():
    return DiffusionParams(D=1e-9, D2=1e-10, V_F=1.11e-7, V_G=1.78e-6, K=2, released=1e6,
                           alpha=1000)


@pytest.fixture
def mean_fn(arena, params):
    return mean_function(arena, params, "ideal")


@pytest.fixture
def radial_scheme(arena):
    return build_radial(arena, 3, resolution=400)


@pytest.fixture
def grid_scheme(arena):
    return build_grid(arena, 3)


@pytest.fixture
def unit_arena():
    """ 1 m square used by the sensor walk tests, where walks should be quick to simulate """
    return Arena(w=1.0, d_fg=5.0)


@pytest.fixture
def walk_params():
    return SensorParams(n_sensors=10, D_s=0.01, dt=0.1, capture_radius=0.1, slot=1.0, n_th=3,
                        t_th=10.0, M=1e5)


@pytest.fixture
def center_distance(arena):
    return arena.w * math.sqrt(2) / 2
