""" Partition of the observing area into decision clusters and their indicator points (IPs).

Two schemes are supported:

- Radial: clusters are pairs of distance intervals [j w/L, (j+1) w/L) to FC1 and FC2, with the IP
  of interval j at radius r_j = (j + 1/2) w/L. Used with collaborative sensors.
- Grid: clusters are the L x L square cells of the area, indexed (i_x, i_y) from 1, with the IP at
  the cell center. Used with non-collaborative sensors.
"""
import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from mcloc.errors import DegenerateInputError, InvalidParameterError
from mcloc.medium import Arena
from mcloc.options import Strategy

logger = logging.getLogger(__name__)

# Slack for points on interval boundaries and for tangent circles
_EDGE_EPS = 1e-9


class RadialScheme(BaseModel):
    """ Distance-interval clustering relative to FC1 and FC2.

    Attributes:
        L (int): Cluster resolution parameter.
        w (float): Side of the area.
        radii (tuple[float, ...]): IP radii r_j, strictly increasing, all at most w * sqrt(2).
        psi (tuple[tuple[int, int], ...]): Feasible (j1, j2) radius-index pairs, the set Psi.
        ip_points (tuple[tuple[float, float], ...]): Location in the area of each IP in ``psi``.
        area_weights (tuple[float, ...]): Rasterised area share of each cluster in ``psi``.
    """
    model_config = ConfigDict(frozen=True)

    L: int = Field(ge=2)
    w: float = Field(gt=0)
    radii: tuple[float, ...]
    psi: tuple[tuple[int, int], ...]
    ip_points: tuple[tuple[float, float], ...]
    area_weights: tuple[float, ...]

    @property
    def n_p(self) -> int:
        return len(self.psi)

    def psi_radii(self) -> np.ndarray:
        """ Array of shape (N_p, 2) holding the (d1, d2) radius pair of every cluster """
        radii = np.asarray(self.radii)
        return radii[np.asarray(self.psi)]

    def index_table(self) -> np.ndarray:
        """ (n_r, n_r) array mapping (j1, j2) to its position in ``psi``, -1 if infeasible """
        n_r = len(self.radii)
        table = np.full((n_r, n_r), -1, dtype=np.int64)
        for index, (j1, j2) in enumerate(self.psi):
            table[j1, j2] = index
        return table

    def label(self, cluster: tuple[int, int]) -> str:
        return f"r{cluster[0]}-r{cluster[1]}"


class GridScheme(BaseModel):
    """ L x L square-cell clustering.

    Attributes:
        L (int): Cells per side.
        w (float): Side of the area.
    """
    model_config = ConfigDict(frozen=True)

    L: int = Field(ge=2)
    w: float = Field(gt=0)

    @property
    def axis_points(self) -> np.ndarray:
        """ IP abscissae (equally ordinates) (i - 1/2) w/L for i = 1..L """
        return (np.arange(1, self.L + 1) - 0.5) * self.w / self.L

    @property
    def ip_coordinates(self) -> np.ndarray:
        """ Array of shape (L, L, 2); entry [i_x - 1, i_y - 1] is the IP of cell (i_x, i_y) """
        xs, ys = np.meshgrid(self.axis_points, self.axis_points, indexing="ij")
        return np.stack([xs, ys], axis=-1)

    def index_of(self, s: float) -> float:
        """ Map an IP coordinate s to its index, i = s L / w + 1/2 """
        return s * self.L / self.w + 0.5

    def ip(self, i_x: int, i_y: int) -> tuple[float, float]:
        points = self.axis_points
        return float(points[i_x - 1]), float(points[i_y - 1])

    def clusters(self) -> list[tuple[int, int]]:
        return [(i_x, i_y) for i_x in range(1, self.L + 1) for i_y in range(1, self.L + 1)]

    def label(self, cluster: tuple[int, int]) -> str:
        return f"g{cluster[0]}-{cluster[1]}"


def _check_resolution(L: int):
    if L < 2:
        raise InvalidParameterError(f"cluster resolution L must be at least 2, got {L}")


def radial_ip_location(r1: float, r2: float, w: float) -> tuple[float, float] | None:
    """ Intersection in the area of the circles of radius r1 about FC1 and r2 about FC2.

    The circles are centered on the x axis, so at most one intersection has y >= 0.

    Returns:
        The (x, y) point, or None if the circles do not meet inside [0, w]^2.
    """
    x = (r2 * r2 - r1 * r1 + w * w) / (2 * w)
    y_sq = r2 * r2 - x * x
    slack = _EDGE_EPS * w
    if y_sq < -slack * w:
        return None
    y = math.sqrt(max(y_sq, 0.0))
    if x < -slack or x > w + slack or y > w + slack:
        return None
    return min(max(x, 0.0), w), min(y, w)


def _raster_cells(arena: Arena, step: float, resolution: int) -> dict[tuple[int, int], int]:
    """ Count raster points of the area falling in each (j1, j2) distance-interval cell """
    coords = (np.arange(resolution) + 0.5) * arena.w / resolution
    xs, ys = np.meshgrid(coords, coords, indexing="ij")
    d1 = np.hypot(arena.w - xs, ys)
    d2 = np.hypot(xs, ys)
    j1 = np.floor(d1 / step + _EDGE_EPS).astype(np.int64).ravel()
    j2 = np.floor(d2 / step + _EDGE_EPS).astype(np.int64).ravel()
    pairs, counts = np.unique(np.stack([j1, j2], axis=1), axis=0, return_counts=True)
    return {(int(a), int(b)): int(c) for (a, b), c in zip(pairs, counts)}


def build_radial(arena: Arena, L: int, resolution: int = 1000) -> RadialScheme:
    """ Build the radial scheme: IP radii, the feasible set Psi and cluster area shares.

    Candidate clusters are the non-empty cells of a ``resolution`` x ``resolution`` raster of the
    area. A candidate is kept only if its IP radii are inside the area's distance range and the two
    IP circles intersect inside the area.

    Args:
        arena: The observing area.
        L: Cluster resolution parameter, at least 2.
        resolution: Raster points per side.

    Returns:
        RadialScheme with Psi ordered by (r1 + r2, r1, r2).

    Raises:
        InvalidParameterError: If L < 2.
        DegenerateInputError: If no feasible cluster exists.
    """
    _check_resolution(L)
    w = arena.w
    step = w / L
    max_radius = w * math.sqrt(2) * (1 + _EDGE_EPS)
    radii = []
    j = 0
    while (j + 0.5) * step <= max_radius:
        radii.append((j + 0.5) * step)
        j += 1

    cells = _raster_cells(arena, step, resolution)
    kept = []
    for (j1, j2), count in cells.items():
        if j1 >= len(radii) or j2 >= len(radii):
            continue
        point = radial_ip_location(radii[j1], radii[j2], w)
        if point is not None:
            kept.append(((j1, j2), point, count))
    if not kept:
        raise DegenerateInputError(f"no feasible radial cluster for L={L}")

    kept.sort(key=lambda item: (radii[item[0][0]] + radii[item[0][1]], item[0][0], item[0][1]))
    total = sum(count for _, _, count in kept)
    logger.debug("Radial scheme L=%d: %d radii, N_p=%d", L, len(radii), len(kept))
    return RadialScheme(
        L=L,
        w=w,
        radii=tuple(radii),
        psi=tuple(pair for pair, _, _ in kept),
        ip_points=tuple(point for _, point, _ in kept),
        area_weights=tuple(count / total for _, _, count in kept),
    )


def build_grid(arena: Arena, L: int) -> GridScheme:
    """ Build the L x L grid scheme.

    Raises:
        InvalidParameterError: If L < 2.
    """
    _check_resolution(L)
    return GridScheme(L=L, w=arena.w)


def _interval_index(values: np.ndarray, step: float) -> np.ndarray:
    return np.floor(values / step + _EDGE_EPS).astype(np.int64)


def locate_clusters(scheme: RadialScheme | GridScheme, points) -> np.ndarray:
    """ Vectorised locate_cluster over an array of points of shape (n, 2) """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    w = scheme.w
    slack = _EDGE_EPS * w
    if np.any(pts < -slack) or np.any(pts > w + slack):
        raise InvalidParameterError("points must lie inside the observing area")
    step = w / scheme.L
    match scheme:
        case GridScheme():
            cells = np.minimum(_interval_index(pts, step), scheme.L - 1) + 1
        case RadialScheme():
            d1 = np.hypot(w - pts[:, 0], pts[:, 1])
            d2 = np.hypot(pts[:, 0], pts[:, 1])
            cells = np.stack([_interval_index(d1, step), _interval_index(d2, step)], axis=1)
        case _:
            raise InvalidParameterError(f"unknown cluster scheme {type(scheme).__name__}")
    return cells


def locate_cluster(scheme: RadialScheme | GridScheme, point) -> tuple[int, int]:
    """ Cluster containing a point of the area.

    Intervals are closed on the left and open on the right.

    Args:
        scheme: Radial or grid scheme.
        point: (x, y) inside the area.

    Returns:
        (j1, j2) zero-based distance-interval indices for the radial scheme, or one-based
        (i_x, i_y) cell indices for the grid scheme.

    Raises:
        InvalidParameterError: If the point is outside the area.
    """
    cell = locate_clusters(scheme, [point])[0]
    return int(cell[0]), int(cell[1])


def build_scheme(arena: Arena, L: int, strategy: Strategy,
                 resolution: int = 1000) -> RadialScheme | GridScheme:
    """ Radial scheme for collaborative sensors, grid scheme for non-collaborative ones """
    if strategy is Strategy.COLLABORATIVE:
        return build_radial(arena, L, resolution)
    return build_grid(arena, L)
