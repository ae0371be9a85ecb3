import numpy as np
import pytest

from visvol import fixtures
from visvol.oracle import (
    agreement_report,
    distance_to_mesh,
    point_sees_polygon,
    points_see_polygon,
    polygon_samples,
    van_der_corput,
)
from visvol.poly_vis import VolumeSettings, compute_visibility_volume, validate_polygon
from visvol.raycast import build_bvh

TRI = validate_polygon([(0, 0, 0), (10, 0, 0), (5, 8, 0)])


def test_van_der_corput():
    assert van_der_corput(4).tolist() == [0.5, 0.25, 0.75, 0.125]


def test_samples_nested():
    a = polygon_samples(TRI, 5)
    b = polygon_samples(TRI, 6)
    assert len(a) == 3 + 15
    assert all(any(np.array_equal(p, q) for q in b) for p in a)
    with pytest.raises(ValueError):
        polygon_samples(TRI, 0)


def test_interior_samples_in_polygon():
    s = polygon_samples(TRI, 4, interior=9)
    assert len(s) > 3 + 12
    assert np.all(s[:, 2] == 0)


def test_above_centroid_sees():
    c = TRI.vertices.mean(axis=0) + [0, 0, 10]
    assert point_sees_polygon(None, c, TRI, 100.0, 16)


def test_out_of_range():
    v = TRI.vertices[0]
    p = v + np.array([-(100 + 1.0), 0, 0])
    assert not point_sees_polygon(None, p, TRI, 100.0, 16)


def test_behind_building_blind():
    wall = build_bvh(fixtures.box_mesh((-3, -5, 0), (-2, 15, 10)))
    assert not point_sees_polygon(wall, (-8, 2, 2), TRI, 100.0, 16)
    assert point_sees_polygon(wall, (5, 2, 30), TRI, 100.0, 16)


def test_monotone_in_dmax_and_samples(two_buildings_bvh):
    poly = validate_polygon(fixtures.TWO_BUILDINGS_TRIANGLE)
    pts = np.random.default_rng(0).uniform((-50, -50, 0), (50, 50, 50), size=(3000, 3))
    near = points_see_polygon(two_buildings_bvh, pts, poly, 30.0)
    far = points_see_polygon(two_buildings_bvh, pts, poly, 45.0)
    assert not np.any(near & ~far)
    s8 = points_see_polygon(two_buildings_bvh, pts, poly, 45.0, samples_per_edge=8)
    s9 = points_see_polygon(two_buildings_bvh, pts, poly, 45.0, samples_per_edge=9)
    assert not np.any(s9 & ~s8)


def test_distance_to_mesh():
    cube = fixtures.unit_cube()
    d = distance_to_mesh(cube, [[0.5, 0.5, 3.0], [2.0, 2.0, 0.5], [0.5, 0.5, 0.5], [9, 9, 9]], 3.0)
    assert d[0] == pytest.approx(2.0)
    assert d[1] == pytest.approx(np.sqrt(2))
    assert d[2] == pytest.approx(0.5)
    assert np.isinf(d[3])


def small_volume():
    cfg = VolumeSettings(d_max=20.0, n_phi=32, n_theta=16, extraction_resolution=(32, 32, 32))
    return compute_visibility_volume(TRI, None, cfg)


def test_agreement_report_fields_and_seed():
    res = small_volume()
    a = agreement_report(res.region, None, TRI, 20.0, res.grid, res.mesh, n_samples=2000, seed=3)
    b = agreement_report(res.region, None, TRI, 20.0, res.grid, res.mesh, n_samples=2000, seed=3)
    assert a == b
    assert a["agreement_far"] >= 0.999
    assert a["false_positive"] + a["false_negative"] == round((1 - a["agreement"]) * 2000)
    with pytest.raises(ValueError):
        agreement_report(res.region, None, TRI, 20.0, res.grid, res.mesh, n_samples=0)


def test_zero_margin_is_no_better():
    res = small_volume()
    zero = agreement_report(res.region, None, TRI, 20.0, res.grid, res.mesh, n_samples=3000,
                            boundary_margin=0.0)
    wide = agreement_report(res.region, None, TRI, 20.0, res.grid, res.mesh, n_samples=3000,
                            boundary_margin=res.grid.cell_diagonal)
    assert zero["agreement_far"] <= wide["agreement_far"]


def test_parallel_oracle_identical(two_buildings_bvh):
    poly = validate_polygon(fixtures.TWO_BUILDINGS_TRIANGLE)
    pts = np.random.default_rng(5).uniform((-50, -50, 0), (50, 50, 50), size=(2000, 3))
    assert np.array_equal(points_see_polygon(two_buildings_bvh, pts, poly, 50.0),
                          points_see_polygon(two_buildings_bvh, pts, poly, 50.0, workers=4))
