import math

import numpy as np
import pytest

from mcloc.clustering import (GridScheme, RadialScheme, build_grid, build_radial, build_scheme,
                              locate_cluster, locate_clusters, radial_ip_location)
from mcloc.errors import InvalidParameterError
from mcloc.options import Strategy


def test_radial_radii_for_two_clusters_per_side(arena):
    """
    GIVEN a 1 cm area and L = 2
    WHEN the radial scheme is built
    THEN the IP radii are 2.5, 7.5 and 12.5 mm
    """
    scheme = build_radial(arena, 2, resolution=400)
    assert scheme.radii == pytest.approx((2.5e-3, 7.5e-3, 12.5e-3))


def test_radial_psi_membership(arena):
    """
    GIVEN the L = 2 radial scheme
    WHEN Psi is inspected
    THEN (1, 1) is feasible and (0, 0) is not, because r1 + r2 < w
    """
    scheme = build_radial(arena, 2, resolution=400)
    assert (1, 1) in scheme.psi
    assert (0, 0) not in scheme.psi


def test_radial_ips_are_inside_the_area_at_their_radii(radial_scheme):
    w = radial_scheme.w
    for (j1, j2), (x, y) in zip(radial_scheme.psi, radial_scheme.ip_points):
        r1, r2 = radial_scheme.radii[j1], radial_scheme.radii[j2]
        assert 0 <= x <= w and 0 <= y <= w
        assert abs(r1 - r2) <= w * (1 + 1e-9)
        assert r1 + r2 >= w * (1 - 1e-9)
        assert math.hypot(w - x, y) == pytest.approx(r1, rel=1e-6)
        assert math.hypot(x, y) == pytest.approx(r2, rel=1e-6)


def test_radial_psi_is_ordered_by_radius_sum(radial_scheme):
    radii = np.asarray(radial_scheme.radii)
    keys = [(radii[j1] + radii[j2], j1, j2) for j1, j2 in radial_scheme.psi]
    assert keys == sorted(keys)


def test_radial_psi_is_symmetric(radial_scheme):
    """
    GIVEN the mirror symmetry of the area about x = w/2, which swaps FC1 and FC2
    WHEN Psi is inspected
    THEN (j1, j2) is feasible exactly when (j2, j1) is
    """
    psi = set(radial_scheme.psi)
    assert psi == {(j2, j1) for j1, j2 in psi}


def test_radial_area_weights_sum_to_one(radial_scheme):
    weights = np.asarray(radial_scheme.area_weights)
    assert np.all(weights > 0)
    assert weights.sum() == pytest.approx(1.0)


def test_radial_index_table(radial_scheme):
    table = radial_scheme.index_table()
    for index, (j1, j2) in enumerate(radial_scheme.psi):
        assert table[j1, j2] == index
    assert np.count_nonzero(table >= 0) == radial_scheme.n_p


def test_radial_ip_location_infeasible_circles():
    assert radial_ip_location(1e-3, 1e-3, 1e-2) is None


def test_radial_ip_location_center():
    w = 1e-2
    r = w * math.sqrt(2) / 2
    x, y = radial_ip_location(r, r, w)
    assert x == pytest.approx(w / 2)
    assert y == pytest.approx(w / 2)


def test_build_radial_rejects_small_resolution(arena):
    with pytest.raises(InvalidParameterError):
        build_radial(arena, 1)


def test_grid_ips_for_two_cells_per_side(arena):
    """
    GIVEN a 1 cm area and L = 2
    WHEN the grid scheme is built
    THEN the IP coordinates are 2.5 and 7.5 mm, and map back to indices 1 and 2
    """
    scheme = build_grid(arena, 2)
    assert scheme.axis_points == pytest.approx([2.5e-3, 7.5e-3])
    assert scheme.index_of(2.5e-3) == pytest.approx(1.0)
    assert scheme.index_of(7.5e-3) == pytest.approx(2.0)
    assert math.hypot(*scheme.ip(1, 1)) == pytest.approx(3.5355339e-3, rel=1e-7)


def test_grid_ip_coordinates_layout(grid_scheme):
    ips = grid_scheme.ip_coordinates
    assert ips.shape == (3, 3, 2)
    assert tuple(ips[0, 2]) == pytest.approx(grid_scheme.ip(1, 3))


def test_build_grid_rejects_small_resolution(arena):
    with pytest.raises(InvalidParameterError):
        build_grid(arena, 1)


def test_locate_cluster_grid_example(arena):
    """
    GIVEN the L = 2 grid
    WHEN the point (6 mm, 1 mm) is located
    THEN it falls in cell (2, 1)
    """
    assert locate_cluster(build_grid(arena, 2), (6e-3, 1e-3)) == (2, 1)


def test_locate_cluster_grid_boundaries_are_closed_on_the_left(arena):
    scheme = build_grid(arena, 2)
    assert locate_cluster(scheme, (5e-3, 5e-3)) == (2, 2)
    assert locate_cluster(scheme, (0.0, 0.0)) == (1, 1)
    assert locate_cluster(scheme, (arena.w, arena.w)) == (2, 2)


def test_locate_cluster_grid_ips_are_in_their_own_cell(grid_scheme):
    for i_x, i_y in grid_scheme.clusters():
        assert locate_cluster(grid_scheme, grid_scheme.ip(i_x, i_y)) == (i_x, i_y)


def test_locate_clusters_tiles_the_area(grid_scheme):
    """
    GIVEN a dense raster of points over the area
    WHEN every point is located in the grid scheme
    THEN each cell receives the same share of points
    """
    coords = (np.arange(300) + 0.5) * grid_scheme.w / 300
    xs, ys = np.meshgrid(coords, coords, indexing="ij")
    cells = locate_clusters(grid_scheme, np.stack([xs.ravel(), ys.ravel()], axis=1))
    _, counts = np.unique(cells, axis=0, return_counts=True)
    assert len(counts) == 9
    assert np.all(counts == 10000)


def test_locate_cluster_radial(arena, radial_scheme):
    w = arena.w
    assert locate_cluster(radial_scheme, (3.3e-3, 0.0)) == (2, 0)
    assert locate_cluster(radial_scheme, (w / 3, 0.0)) == (2, 1)
    assert locate_cluster(radial_scheme, arena.center) == (2, 2)


def test_locate_cluster_radial_ips_are_in_their_own_cluster(radial_scheme):
    for pair, point in zip(radial_scheme.psi, radial_scheme.ip_points):
        j1, j2 = locate_cluster(radial_scheme, point)
        assert (j1, j2) == pair


def test_locate_cluster_rejects_points_outside(grid_scheme):
    with pytest.raises(InvalidParameterError):
        locate_cluster(grid_scheme, (-1e-3, 5e-3))


def test_build_scheme_matches_strategy(arena):
    assert isinstance(build_scheme(arena, 3, Strategy.COLLABORATIVE, 200), RadialScheme)
    assert isinstance(build_scheme(arena, 3, Strategy.NONCOLLABORATIVE), GridScheme)


def test_scheme_labels(grid_scheme, radial_scheme):
    assert grid_scheme.label((1, 3)) == "g1-3"
    assert radial_scheme.label((0, 2)) == "r0-r2"
