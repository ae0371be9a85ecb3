import numpy as np
import pytest

from visvol import fixtures
from visvol.poly_vis import (
    EdgeTask,
    PolygonError,
    SplitLimitReached,
    VolumeSettings,
    apply_nav_constraints,
    compute_visibility_volume,
    split_edge,
    validate_polygon,
)
from visvol.regions import ExtractionGrid, altitude_band, box_region
from visvol.mesh import Aabb, check_watertight

EQUILATERAL = [(0, 0, 0), (10, 0, 0), (5, 5 * np.sqrt(3), 0)]


def test_valid_triangle():
    p = validate_polygon(EQUILATERAL)
    assert len(p.edges) == 3
    assert np.allclose(p.normal, [0, 0, 1])
    assert np.array_equal(p.edges[2][1], p.vertices[0])


def test_clockwise_normal_flips():
    p = validate_polygon(EQUILATERAL[::-1])
    assert np.allclose(p.normal, [0, 0, -1])


def test_arrow_names_reflex_vertex():
    with pytest.raises(PolygonError, match="reflex vertex 2"):
        validate_polygon([(0, 0, 0), (10, 0, 0), (5, 2, 0), (5, 10, 0)])


def test_lifted_vertex_not_planar():
    with pytest.raises(PolygonError, match="not planar: max deviation"):
        validate_polygon([(0, 0, 0), (7, 0, 0), (7, 7, 1), (0, 7, 0)])


@pytest.mark.parametrize("verts, match", [
    ([(0, 0, 0), (1, 0, 0)], "at least 3"),
    ([(0, 0, 0), (1, 0, 0), (1, 0, 0), (0, 1, 0)], "duplicate consecutive"),
    ([(0, 0, 0), (1, 0, 0), (2, 0, 0), (0, 1, 0)], "collinear"),
])
def test_invalid_polygons(verts, match):
    with pytest.raises(PolygonError, match=match):
        validate_polygon(verts)


def test_pentagram_rejected():
    ang = np.arange(5) * 4 * np.pi / 5
    star = np.stack([np.cos(ang), np.sin(ang), np.zeros(5)], axis=1)
    with pytest.raises(PolygonError):
        validate_polygon(star)


def test_split_edge():
    a, b = split_edge(EdgeTask((0.0, 0.0, 0.0), (2.0, 0.0, 0.0), depth=3))
    assert a.b == b.a == (1.0, 0.0, 0.0)
    assert a.length == b.length == 1.0
    assert a.depth == b.depth == 4
    with pytest.raises(SplitLimitReached):
        split_edge(EdgeTask((0.0, 0.0, 0.0), (1.0, 0.0, 0.0)), min_length=0.6)
    with pytest.raises(ValueError):
        EdgeTask((1, 1, 1), (1, 1, 1))


def small_settings(**kw):
    return VolumeSettings(**{"d_max": 20.0, "n_phi": 32, "n_theta": 16,
                             "extraction_resolution": (32, 32, 32), **kw})


def test_spheres_memoised_per_vertex():
    res = compute_visibility_volume(validate_polygon(EQUILATERAL), None, small_settings())
    assert res.report.spheres_computed == 3
    assert res.report.sphere_cache_hits == 6
    assert [e.chi for e in res.report.edges] == [2, 2, 2]
    assert check_watertight(res.mesh)


def test_containment_chain(two_buildings_bvh):
    poly = validate_polygon(fixtures.TWO_BUILDINGS_TRIANGLE)
    res = compute_visibility_volume(poly, two_buildings_bvh, small_settings(d_max=30.0))
    pts = np.random.default_rng(0).uniform(res.grid.bounds.min, res.grid.bounds.max, size=(20000, 3))
    inside = res.region.contains(pts)
    assert inside.any()
    for v in poly.vertices:
        assert res.spheres(tuple(v.tolist())).contains(pts[inside]).all()


def test_disjoint_endpoint_spheres_report_empty():
    poly = validate_polygon([(0, 0, 0), (50, 0, 0), (25, 40, 0)])
    res = compute_visibility_volume(poly, None, small_settings(d_max=10.0))
    assert res.mesh.is_empty()
    assert any("empty" in w for w in res.report.warnings)
    assert res.report.splits == 0


def test_split_guard_reports_unresolved(pillar_bvh):
    poly = validate_polygon(fixtures.PILLAR_TRIANGLE)
    cfg = VolumeSettings(d_max=30.0, extraction_resolution=(64, 64, 64), max_split_depth=1)
    res = compute_visibility_volume(poly, pillar_bvh, cfg)
    assert res.report.splits >= 1
    unresolved = [e for e in res.report.edges if e.unresolved]
    assert unresolved and all(e.depth == 1 for e in unresolved)
    assert any("unresolved topology" in w for w in res.report.warnings)


def test_nav_constraints():
    res = compute_visibility_volume(validate_polygon(EQUILATERAL), None, small_settings())
    region, mesh, empty = apply_nav_constraints(res.region, [], res.grid)
    assert region is res.region and not empty
    _, mesh, empty = apply_nav_constraints(res.region, [altitude_band(5, 10)], res.grid)
    assert not empty
    h = res.grid.cell_size
    assert mesh.vertices[:, 2].min() >= 5 - h and mesh.vertices[:, 2].max() <= 10 + h
    far = box_region(Aabb((500, 500, 500), (600, 600, 600)))
    _, mesh, empty = apply_nav_constraints(res.region, [far], res.grid)
    assert empty and mesh.is_empty()


def test_report_serialisable():
    import json
    res = compute_visibility_volume(validate_polygon(EQUILATERAL), None, small_settings())
    d = json.loads(json.dumps(res.report.to_dict()))
    assert set(d) >= {"edges", "splits", "sphere_cache", "warnings", "timings", "grid", "eps"}
    assert d["edges"][0]["endpoints"][0] == [0.0, 0.0, 0.0]


def test_custom_grid_used():
    grid = ExtractionGrid(Aabb((-15, -15, -15), (25, 25, 25)), (20, 20, 20))
    res = compute_visibility_volume(validate_polygon(EQUILATERAL), None, small_settings(), grid=grid)
    assert res.grid is grid
