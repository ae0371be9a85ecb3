import json

import numpy as np
import pytest

from visvol import fixtures
from visvol.depth import (
    FACE_ORDER,
    DepthCubemap,
    DepthSphere,
    Rasterizer,
    cell_directions,
    compute_depth_cubemap,
    compute_depth_sphere_cubemap,
    compute_depth_sphere_raycast,
    cubemap_lookup,
    cubemap_to_sphere,
    load_depth_grid,
    sample_depth,
    save_depth_grid,
)
from visvol.mesh import TriangleMesh
from visvol.raycast import build_bvh

EPS = 1e-4


def test_cell_directions_convention():
    d = cell_directions(4, 2)
    phi, theta = 0.25 * np.pi, 0.25 * np.pi
    assert np.allclose(d[0, 0], [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    assert np.allclose(np.linalg.norm(d, axis=-1), 1.0)


def test_empty_scene_all_dmax(impl):
    ds = compute_depth_sphere_raycast(None, (1, 2, 3), 16, 8, 42.0, EPS, impl=impl)
    assert np.all(ds.depth == 42.0)


def test_ground_plane_formula(impl):
    h, d_max = 3.0, 50.0
    bvh = build_bvh(fixtures.grid_plane((-200, -200), (200, 200), 0.0, 20))
    ds = compute_depth_sphere_raycast(bvh, (0.3, -0.7, h), 32, 16, d_max, EPS, impl=impl)
    dirs = cell_directions(32, 16)
    down = dirs[..., 2] < 0
    expect = np.minimum(d_max, h / np.abs(dirs[..., 2]))
    assert np.allclose(ds.depth[down], expect[down], rtol=1e-9)
    assert np.all(ds.depth[~down] == d_max)


def test_inside_tessellated_sphere():
    r = 5.0
    ball = fixtures.icosphere(3, radius=r)
    c = ball.corners()
    n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
    inradius = np.min(np.abs(np.einsum("ij,ij->i", c[:, 0], n)) / np.linalg.norm(n, axis=1))
    ds = compute_depth_sphere_raycast(build_bvh(ball), (0, 0, 0), 32, 16, 100.0, EPS)
    assert np.all(ds.depth >= inradius - 1e-9)
    assert np.all(ds.depth <= r + 1e-9)


def test_invalid_resolution():
    with pytest.raises(ValueError):
        compute_depth_sphere_raycast(None, (0, 0, 0), 2, 1, 10.0, EPS)
    with pytest.raises(ValueError):
        compute_depth_cubemap(Rasterizer(None), (0, 0, 0), 4, 10.0, EPS)


def test_depth_sphere_invariants():
    with pytest.raises(ValueError):
        DepthSphere((0, 0, 0), 10.0, np.full((4, 2), 11.0))
    with pytest.raises(ValueError):
        DepthSphere((0, 0, 0), 10.0, np.zeros((4, 2)))


def test_clamping_is_monotone(two_buildings_bvh):
    a = compute_depth_sphere_raycast(two_buildings_bvh, (0, 0, 1.5), 32, 16, 20.0, EPS)
    b = compute_depth_sphere_raycast(two_buildings_bvh, (0, 0, 1.5), 32, 16, 60.0, EPS)
    assert np.all(b.depth >= a.depth)
    assert np.array_equal(b.clamped(20.0).depth, a.depth)


def test_rotation_permutes_grid():
    mesh = fixtures.two_buildings_scene(ground_cells=8)
    rot = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]], dtype=float)
    center = np.array([3.0, -2.0, 4.0])
    n_phi = 64
    a = compute_depth_sphere_raycast(build_bvh(mesh), center, n_phi, 32, 60.0, EPS)
    b = compute_depth_sphere_raycast(build_bvh(mesh.transformed(rot)), rot @ center, n_phi, 32, 60.0, EPS)
    assert np.allclose(np.roll(a.depth, n_phi // 4, axis=0), b.depth, rtol=1e-9, atol=1e-9)


def test_cubemap_empty_scene():
    cm = compute_depth_cubemap(Rasterizer(None), (0, 0, 0), 16, 30.0, EPS)
    assert cm.faces.shape == (6, 16, 16)
    assert np.all(cm.faces == 30.0)
    assert np.all(cubemap_to_sphere(cm, 16, 8).depth == 30.0)


def test_cubemap_wall_center_and_corner(impl):
    w, res = 4.0, 64
    wall = fixtures.box_mesh((w, -50, -50), (w + 1, 50, 50))
    cm = compute_depth_cubemap(Rasterizer(wall, impl=impl), (0, 0, 0), res, 100.0, EPS)
    face = cm.face("+x")
    # pixel centres nearest the axis and the corner
    u_c = 0.5 * 2.0 / res
    assert face[res // 2, res // 2] == pytest.approx(w * np.sqrt(1 + 2 * u_c ** 2), rel=1e-9)
    u_k = 1.0 - u_c
    assert face[0, 0] == pytest.approx(w * np.sqrt(1 + 2 * u_k ** 2), rel=1e-9)
    assert face[0, 0] == pytest.approx(w * np.sqrt(3), rel=0.05)


def test_cubemap_half_coverage(impl):
    # triangle covering the lower-left half of the +z face at height 2
    tri = TriangleMesh([[-10, -10, 2], [10, -10, 2], [-10, 10, 2]], [[0, 1, 2]])
    cm = compute_depth_cubemap(Rasterizer(tri, impl=impl), (0, 0, 0), 32, 50.0, EPS)
    top = cm.face("+z")
    covered = top < 50.0
    assert 0.45 < covered.mean() < 0.55
    assert np.all(top[~covered] == 50.0)


def test_minimal_grid_dominant_axis():
    faces = np.stack([np.full((8, 8), 10.0 + k) for k in range(6)])
    cm = DepthCubemap(np.zeros(3), 100.0, faces)
    ds = cubemap_to_sphere(cm, 4, 2)
    dirs = cell_directions(4, 2).reshape(-1, 3)
    axis = np.argmax(np.abs(dirs), axis=1)
    neg = dirs[np.arange(8), axis] < 0
    expect = 10.0 + 2 * axis + neg
    assert ds.depth.size == 8
    assert np.array_equal(ds.depth.reshape(-1), expect)
    assert FACE_ORDER[0] == "+x"


def test_cubemap_lookup_axes():
    faces = np.stack([np.full((8, 8), float(k + 1)) for k in range(6)])
    cm = DepthCubemap(np.zeros(3), 10.0, faces)
    axes = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
    assert cubemap_lookup(cm, axes).tolist() == [1, 2, 3, 4, 5, 6]


def test_wall_backends_agree(impl):
    wall = fixtures.box_mesh((6, -3, -3), (7, 3, 3))
    d_max = 20.0
    ray = compute_depth_sphere_raycast(build_bvh(wall), (0, 0, 0), 64, 32, d_max, EPS, impl=impl)
    cube = compute_depth_sphere_cubemap(Rasterizer(wall, impl=impl), (0, 0, 0), 64, 32, d_max, 128, EPS)
    delta = max(ray.cell_angle, np.pi / 2 / 128)
    ok = np.abs(ray.depth - cube.depth) <= d_max * np.tan(delta)
    assert ok.mean() >= 0.95


def test_sample_depth_cases():
    ds = DepthSphere((0, 0, 0), 10.0, np.full((8, 4), 7.0))
    assert sample_depth(ds, (0, 0, 1)) == 7.0
    grid = np.arange(32, dtype=float).reshape(8, 4) + 1.0
    ds = DepthSphere((0, 0, 0), 100.0, grid)
    tiny = 1e-9
    hi = sample_depth(ds, (np.cos(-tiny), np.sin(-tiny), 0))
    lo = sample_depth(ds, (np.cos(tiny), np.sin(tiny), 0))
    assert (hi, lo) == (grid[7, 2], grid[0, 2])  # adjacent cells across the seam
    assert sample_depth(ds, (0, 0, 1)) == grid[0, 0]
    assert sample_depth(ds, (0, 0, -1)) == grid[0, 3]
    with pytest.raises(ValueError):
        sample_depth(ds, (0, 0, 2))


def test_depth_grid_round_trip(tmp_path, two_buildings_bvh):
    ds = compute_depth_sphere_raycast(two_buildings_bvh, (0, 0, 1), 16, 8, 50.0, EPS)
    bin_path, hdr = save_depth_grid(ds, tmp_path / "d")
    assert bin_path.stat().st_size == 16 * 8 * 4
    assert json.loads(hdr.read_text())["n_phi"] == 16
    back = load_depth_grid(tmp_path / "d")
    assert np.allclose(back.depth, ds.depth, rtol=1e-6)
    raw = np.frombuffer(bin_path.read_bytes(), dtype="<f4").reshape(8, 16)
    assert raw[3, 5] == np.float32(ds.depth[5, 3])  # rows are polar cells
