import math

import numpy as np
import pytest

from compcap.domain import BoundaryData, DomainSpec, build_grid, interior_ball


def test_unit_square_counts():
    g = build_grid(DomainSpec.rectangle(1, 1), 8)
    assert g.n_cells == 64
    assert g.n_edges == 32
    assert g.area == pytest.approx(1.0)
    assert g.perimeter == pytest.approx(4.0)
    assert np.all(g.edge_normal_cos == 1.0)


def test_rectangle_must_tile():
    build_grid(DomainSpec.rectangle(2, 1), 8)
    with pytest.raises(ValueError, match="tiled"):
        build_grid(DomainSpec.rectangle(1, 0.3), 8)


@pytest.mark.parametrize("spec", [
    DomainSpec.rectangle(0, 1),
    DomainSpec.disk(-1),
    DomainSpec.polygon([(0, 0), (1, 1), (1, 0), (0, 1)]),
    DomainSpec.polygon([(0, 0), (1, 0), (2, 0)]),
    DomainSpec("hexagon"),
])
def test_invalid_domains(spec):
    with pytest.raises(ValueError):
        build_grid(spec, 8)


def test_resolution_too_small():
    with pytest.raises(ValueError):
        build_grid(DomainSpec.rectangle(1, 1), 3)


def test_disk_area_converges():
    errs = [abs(build_grid(DomainSpec.disk(1.0), n).area - math.pi) for n in (32, 64, 128)]
    assert errs[2] < errs[0]
    assert errs[2] < 2e-2


def test_neighbours_are_symmetric(disk16):
    g = disk16
    has = g.right >= 0
    assert np.all(g.left[g.right[has]] == np.nonzero(has)[0])
    has = g.up >= 0
    assert np.all(g.down[g.up[has]] == np.nonzero(has)[0])


def test_edge_owner_faces_outside(disk16):
    g = disk16
    for e in range(g.n_edges):
        c = g.edge_owner[e]
        nx, ny = g.edge_normal[e]
        nb = {(1, 0): g.right, (-1, 0): g.left, (0, 1): g.up, (0, -1): g.down}[(int(nx), int(ny))]
        assert nb[c] < 0


def test_normal_cos_disk(disk16):
    # projected edge lengths approximate the circumference
    total = np.sum(disk16.edge_length * disk16.edge_normal_cos)
    assert total == pytest.approx(2 * math.pi, rel=0.05)
    assert np.all((disk16.edge_normal_cos >= 0) & (disk16.edge_normal_cos <= 1))


def test_polygon_grid():
    g = build_grid(DomainSpec.polygon([(0, 0), (1, 0), (0, 1)]), 32)
    assert g.area == pytest.approx(0.5, rel=0.05)


def test_boundary_data_range(square16):
    BoundaryData.constant(square16, 0.5, 0.5)
    with pytest.raises(ValueError):
        BoundaryData.constant(square16, 0.6, 0.5)
    with pytest.raises(ValueError):
        BoundaryData.constant(square16, 0.1, 0.0)
    with pytest.raises(ValueError):
        BoundaryData(np.zeros(3), 0.5).check_grid(square16)


def test_interior_ball(square16):
    ball = interior_ball(square16, (0.5, 0.5), 0.3)
    assert ball.size > 0 and ball.flagged.any() and ball.free.any()
    with pytest.raises(ValueError):
        interior_ball(square16, (0.1, 0.5), 0.3)
    with pytest.raises(ValueError):
        interior_ball(square16, (0.5, 0.5), 0.0)


def test_to_image_round_trip(disk16, rng):
    v = rng.random(disk16.n_cells)
    img = disk16.to_image(v)
    assert np.array_equal(img[disk16.mask], v)
    assert np.all(np.isnan(img[~disk16.mask]))
