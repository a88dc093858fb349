""" Mobile sensor simulation: random walks, activation at the abnormality and release timing.

Sensors are injected at the center of the area and walk with independent Gaussian increments,
reflecting at the boundaries. A sensor that comes within the capture radius of the abnormality
activates and stops. Activated sensors release their molecules at the start of the next time slot:

- collaborative sensors once N_th of them have activated (quorum), so the count is fixed and the
  time is random;
- non-collaborative sensors when their energy runs out at T_th, so the time is fixed and the
  count is random.
"""
import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from mcloc.errors import InvalidParameterError, QuorumTimeoutError
from mcloc.medium import Arena
from mcloc.options import Strategy

logger = logging.getLogger(__name__)


class SensorParams(BaseModel):
    """ Parameters of the sensor walk and release.

    Attributes:
        n_sensors (int): Number of injected sensors, N_s.
        D_s (float): Sensor diffusion coefficient (m^2/s).
        dt (float): Walk time step (s).
        capture_radius (float): Distance at which a sensor senses the abnormality (m).
        slot (float): Slot duration T (s).
        n_th (int): Quorum threshold N_th.
        t_th (float): Energy timeout T_th of non-collaborative sensors (s).
        M (float): Molecules of each type stored by one sensor.
    """
    model_config = ConfigDict(frozen=True)

    n_sensors: int = Field(ge=1)
    D_s: float = Field(gt=0)
    dt: float = Field(gt=0)
    capture_radius: float = Field(gt=0)
    slot: float = Field(gt=0)
    n_th: int = Field(ge=1)
    t_th: float = Field(gt=0)
    M: float = Field(gt=0)

    @model_validator(mode="after")
    def check_consistency(self):
        if self.n_th > self.n_sensors:
            raise ValueError(f"n_th={self.n_th} exceeds n_sensors={self.n_sensors}")
        steps = self.t_th / self.dt
        if abs(steps - round(steps)) > 1e-9 * steps:
            raise ValueError(f"t_th={self.t_th} is not a multiple of dt={self.dt}")
        return self

    @property
    def step_std(self) -> float:
        """ Per-axis standard deviation of one walk increment, sqrt(2 D_s dt) """
        return math.sqrt(2 * self.D_s * self.dt)


class ReleaseEvent(BaseModel):
    """ Outcome of phases 1 and 2: when and how many sensors release at the abnormality.

    Attributes:
        release_time (float): Slot boundary n T at which molecules are released.
        slot_index (int): n, the index of that boundary.
        n_released (int): Number of releasing sensors, N_r.
        location (tuple[float, float]): Abnormality coordinates.
        trigger_time (float): Quorum time t_r (collaborative) or T_th (non-collaborative).
    """
    model_config = ConfigDict(frozen=True)

    release_time: float = Field(gt=0)
    slot_index: int = Field(ge=1)
    n_released: int = Field(ge=0)
    location: tuple[float, float]
    trigger_time: float = Field(ge=0)


def reflect(positions: np.ndarray, w: float) -> np.ndarray:
    """ Mirror positions back into [0, w], folding repeatedly for steps longer than w """
    folded = np.mod(positions, 2 * w)
    return np.where(folded > w, 2 * w - folded, folded)


def next_slot(trigger_time: float, slot: float) -> int:
    """ Index n >= 1 with (n - 1) T < t <= n T """
    return max(1, math.ceil(trigger_time / slot - 1e-12))


class _Walk:
    """ State of one population of walking sensors """

    def __init__(self, params: SensorParams, arena: Arena, abnormality, rng: np.random.Generator):
        self.params = params
        self.w = arena.w
        self.target = np.asarray(abnormality, dtype=float)
        self.rng = rng
        self.positions = np.tile(np.asarray(arena.center, dtype=float), (params.n_sensors, 1))
        self.active = np.zeros(params.n_sensors, dtype=bool)
        self.steps = 0
        self._capture()

    def _capture(self):
        distance = np.linalg.norm(self.positions - self.target, axis=1)
        self.active |= distance <= self.params.capture_radius

    def advance(self):
        moving = ~self.active
        increments = self.rng.normal(0.0, self.params.step_std, size=(int(moving.sum()), 2))
        self.positions[moving] = reflect(self.positions[moving] + increments, self.w)
        self.steps += 1
        self._capture()

    @property
    def time(self) -> float:
        return self.steps * self.params.dt

    @property
    def n_active(self) -> int:
        return int(self.active.sum())


def _collaborative(params: SensorParams, arena: Arena, abnormality, rng, max_horizon: float):
    walk = _Walk(params, arena, abnormality, rng)
    while walk.n_active < params.n_th:
        if walk.time >= max_horizon:
            raise QuorumTimeoutError(
                f"{walk.n_active} of {params.n_th} sensors activated within {max_horizon:g} s")
        walk.advance()
    return walk.time, params.n_th


def _noncollaborative(params: SensorParams, arena: Arena, abnormality, rng):
    walk = _Walk(params, arena, abnormality, rng)
    n_steps = round(params.t_th / params.dt)
    while walk.steps < n_steps and walk.n_active < params.n_sensors:
        walk.advance()
    return params.t_th, walk.n_active


def walk_until_release(params: SensorParams, arena: Arena, abnormality, strategy: Strategy,
                       rng_seed, max_horizon: float | None = None,
                       condition_to_quorum: bool = False, max_attempts: int = 1000) -> ReleaseEvent:
    """ Simulate the sensor walks up to the release of molecules at the abnormality.

    Args:
        params: Sensor parameters.
        arena: The observing area.
        abnormality: (x, y) location of the abnormality inside the area.
        strategy: Collaborative or non-collaborative sensors.
        rng_seed: Seed (int or sequence of ints) for the walk's generator.
        max_horizon: Collaborative runs give up after this simulated time; defaults to 200 slots.
        condition_to_quorum: Non-collaborative only; redraw walks until exactly N_th sensors are
            active at T_th.
        max_attempts: Redraw budget for ``condition_to_quorum``.

    Returns:
        The ReleaseEvent.

    Raises:
        InvalidParameterError: If the abnormality is outside the area.
        QuorumTimeoutError: If the quorum (or the conditioned count) is not reached in budget.
    """
    if not arena.contains(abnormality):
        raise InvalidParameterError(f"abnormality {abnormality} is outside the observing area")
    rng = np.random.default_rng(rng_seed)
    horizon = 200 * params.slot if max_horizon is None else max_horizon

    if strategy is Strategy.COLLABORATIVE:
        trigger, n_released = _collaborative(params, arena, abnormality, rng, horizon)
    else:
        for attempt in range(1, max_attempts + 1):
            trigger, n_released = _noncollaborative(params, arena, abnormality, rng)
            if not condition_to_quorum or n_released == params.n_th:
                break
        else:
            raise QuorumTimeoutError(
                f"no walk with exactly {params.n_th} activations in {max_attempts} attempts")
        if condition_to_quorum:
            logger.debug("Conditioned walk accepted after %d attempt(s)", attempt)

    slot_index = next_slot(trigger, params.slot)
    return ReleaseEvent(
        release_time=slot_index * params.slot,
        slot_index=slot_index,
        n_released=n_released,
        location=(float(abnormality[0]), float(abnormality[1])),
        trigger_time=trigger,
    )
