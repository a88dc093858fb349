""" Geometry of the observing area and the physics of the diffusion channel.

Both links use the same transparent-receiver hit probability: sensor molecules travelling to the
fusion centers (FCs), and FC markers travelling to the gateway. The two links differ only in
their volume, diffusion coefficient and distance.
"""
import logging
import math
from functools import partial
from typing import Callable, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from mcloc.errors import DomainError, InvalidParameterError

logger = logging.getLogger(__name__)

MeanFn = Callable[[np.ndarray | float], np.ndarray | float]


class Arena(BaseModel):
    """ The w x w observing area, its fusion centers and the common FC to gateway distance.

    Attributes:
        w (float): Side of the square area in metres.
        d_fg (float): Distance from every FC to the gateway in metres.
        dims (int): Number of spatial dimensions, fixed at 2.
    """
    model_config = ConfigDict(frozen=True)

    w: float = Field(gt=0)
    d_fg: float = Field(gt=0)
    dims: Literal[2] = 2

    @property
    def fc_positions(self) -> tuple[tuple[float, float], ...]:
        """ FC1 at [w, 0], FC2 at the origin and FC3 at [0, w] """
        return (self.w, 0.0), (0.0, 0.0), (0.0, self.w)

    @property
    def center(self) -> tuple[float, float]:
        return self.w / 2, self.w / 2

    @property
    def center_distance(self) -> float:
        """ Distance from any FC to the center of the area, w * sqrt(2) / 2 """
        return self.w * math.sqrt(2) / 2

    def contains(self, point, tol: float = 1e-12) -> bool:
        """ True if the point lies in the closed square [0, w]^2 """
        x, y = point
        slack = tol * self.w
        return -slack <= x <= self.w + slack and -slack <= y <= self.w + slack

    def fc_distances(self, points, n_fc: int = 3) -> np.ndarray:
        """ Distances from each point to the first ``n_fc`` fusion centers.

        Args:
            points: Array-like of shape (..., 2).
            n_fc: 2 for the collaborative set-up, 3 for the non-collaborative one.

        Returns:
            Array of shape (..., n_fc).
        """
        pts = np.asarray(points, dtype=float)
        fcs = np.asarray(self.fc_positions[:n_fc])
        return np.linalg.norm(pts[..., np.newaxis, :] - fcs, axis=-1)


class DiffusionParams(BaseModel):
    """ Physical parameters of the two diffusion links.

    Attributes:
        D (float): Diffusion coefficient of sensor molecules (m^2/s).
        D2 (float): Diffusion coefficient of FC markers (m^2/s).
        V_F (float): Receiver volume of each FC.
        V_G (float): Receiver volume of the gateway.
        K (int): Number of samples (molecule types) per FC.
        released (float): Molecules of each type released by all activated sensors, N_th * M.
        alpha (int): Amplification factor at the FCs.
    """
    model_config = ConfigDict(frozen=True)

    D: float = Field(gt=0)
    D2: float = Field(gt=0)
    V_F: float = Field(gt=0)
    V_G: float = Field(gt=0)
    K: int = Field(ge=1)
    released: float = Field(gt=0)
    alpha: int = Field(ge=1)


def hit_probability(d, t_obs: float, volume: float, diff_coeff: float, dims: int = 2):
    """ Probability that a molecule released at distance d is inside a receiver at time t_obs.

    Args:
        d: Distance (scalar or array) from release point to receiver, non-negative.
        t_obs: Observation time after release, positive.
        volume: Receiver volume.
        diff_coeff: Diffusion coefficient of the molecule.
        dims: Number of spatial dimensions.

    Returns:
        V / (4 pi D t)^(dims/2) * exp(-d^2 / (4 D t)), clipped to [0, 1].

    Raises:
        InvalidParameterError: If t_obs is not positive.
        DomainError: If any distance is negative.
    """
    if t_obs <= 0:
        raise InvalidParameterError(f"observation time must be positive, got {t_obs}")
    dist = np.asarray(d, dtype=float)
    if np.any(dist < 0):
        raise DomainError("distances must be non-negative")
    spread = 4 * diff_coeff * t_obs
    prob = volume / (math.pi * spread) ** (dims / 2) * np.exp(-dist ** 2 / spread)
    if np.any(prob > 1):
        logger.warning("Hit probability exceeds 1 (receiver too large for t=%g s); clipped", t_obs)
        prob = np.minimum(prob, 1.0)
    return float(prob) if prob.ndim == 0 else prob


def peak_time(d: float, diff_coeff: float, dims: int = 2) -> float:
    """ Time at which the concentration at distance d peaks, d^2 / (2 dims D) """
    if d <= 0:
        raise InvalidParameterError(f"distance must be positive, got {d}")
    return d * d / (2 * dims * diff_coeff)


def observation_time(arena: Arena, params: DiffusionParams) -> float:
    """ FC sampling time, the peak time for an abnormality at the center of the area """
    return peak_time(arena.center_distance, params.D, arena.dims)


def gateway_observation_time(arena: Arena, params: DiffusionParams) -> float:
    """ Gateway sampling time, the marker peak time over the FC to gateway distance """
    return peak_time(arena.d_fg, params.D2, arena.dims)


def mean_count(d, arena: Arena, params: DiffusionParams, released: float | None = None):
    """ Mean number of molecules of one type observed at an FC at distance d, m(d).

    The sampling time always assumes an abnormality at the center of the area, whatever the
    true distance.

    Args:
        d: Distance(s) between abnormality and FC.
        arena: The observing area.
        params: Diffusion parameters.
        released: Molecules of each type released; defaults to ``params.released``.

    Returns:
        released * hit_probability(d, w^2 / (4 N D), V_F, D, N).
    """
    n_released = params.released if released is None else released
    if n_released < 0:
        raise InvalidParameterError(f"released molecules must be non-negative, got {n_released}")
    mu = hit_probability(d, observation_time(arena, params), params.V_F, params.D, arena.dims)
    return n_released * mu


def marker_hit_probability(arena: Arena, params: DiffusionParams) -> float:
    """ Probability that a marker released by an FC is observed by the gateway """
    t_gateway = gateway_observation_time(arena, params)
    return hit_probability(arena.d_fg, t_gateway, params.V_G, params.D2, arena.dims)


def gateway_gain(arena: Arena, params: DiffusionParams) -> float:
    """ Mean markers observed at the gateway per molecule observed at an FC, alpha * mu_tilde """
    return params.alpha * marker_hit_probability(arena, params)


def marker_mean_count(y_observed, arena: Arena, params: DiffusionParams):
    """ Mean gateway marker count given the FC observed ``y_observed`` molecules.

    Raises:
        InvalidParameterError: If a count is negative.
    """
    y = np.asarray(y_observed, dtype=float)
    if np.any(y < 0):
        raise InvalidParameterError("observed counts must be non-negative")
    result = gateway_gain(arena, params) * y
    return float(result) if result.ndim == 0 else result


def _channel_mean(d, arena: Arena, params: DiffusionParams, released: float | None, gain: float):
    return gain * mean_count(d, arena, params, released)


def mean_function(arena: Arena, params: DiffusionParams, channel: str = "ideal",
                  released: float | None = None, gain: float | None = None) -> MeanFn:
    """ Build the hypothesis mean d -> m(d) used by the decision rules and the error analysis.

    For the noisy channel the mean-value approximation is used: E[m_G(d)] = alpha mu_tilde m(d).

    Args:
        arena: The observing area.
        params: Diffusion parameters.
        channel: "ideal" or "noisy".
        released: Override of the released molecules per type.
        gain: Override of the gateway gain alpha * mu_tilde (noisy channel only).

    Returns:
        A picklable callable mapping distances to mean counts.
    """
    if channel == "ideal":
        chain_gain = 1.0
    elif channel == "noisy":
        chain_gain = gateway_gain(arena, params) if gain is None else gain
    else:
        raise InvalidParameterError(f"unknown channel {channel!r}")
    return partial(_channel_mean, arena=arena, params=params, released=released, gain=chain_gain)
