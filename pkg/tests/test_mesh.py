import struct

import numpy as np
import pytest

from visvol import fixtures
from visvol.mesh import (
    Aabb,
    MeshError,
    TriangleMesh,
    check_watertight,
    compute_aabb,
    connected_components,
    euler_characteristic,
    genus,
    load_mesh,
    non_manifold_edge_count,
    save_mesh,
)


def two_icospheres():
    return fixtures.icosphere(1).merged(fixtures.icosphere(1, center=(5, 0, 0)))


def test_load_unit_cube_obj(tmp_path):
    save_mesh(fixtures.unit_cube(), tmp_path / "cube.obj")
    m = load_mesh(tmp_path / "cube.obj")
    assert (m.n_vertices, m.n_triangles) == (8, 12)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_mesh(tmp_path / "nope.obj")


def test_quad_is_fan_split(tmp_path):
    p = tmp_path / "quad.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    m = load_mesh(p)
    assert m.triangles.tolist() == [[0, 1, 2], [0, 2, 3]]


def test_obj_slash_indices(tmp_path):
    p = tmp_path / "t.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n")
    assert load_mesh(p).n_triangles == 1


@pytest.mark.parametrize("face", ["f -1 -2 -3", "f 0 1 2", "f 1 2 9", "f 1 2 x"])
def test_bad_indices_report_line(tmp_path, face):
    p = tmp_path / "bad.obj"
    p.write_text(f"v 0 0 0\nv 1 0 0\nv 0 1 0\n{face}\n")
    with pytest.raises(MeshError, match=":4:"):
        load_mesh(p)


def test_zero_triangles_rejected(tmp_path):
    p = tmp_path / "pts.obj"
    p.write_text("v 0 0 0\nv 1 0 0\n")
    with pytest.raises(MeshError, match="no triangles"):
        load_mesh(p)


def test_degenerate_triangles_dropped(tmp_path, caplog):
    p = tmp_path / "deg.obj"
    p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 2 0 0\nf 1 2 3\nf 1 2 4\n")
    m = load_mesh(p)
    assert m.n_triangles == 1
    assert "degenerate" in caplog.text


def test_save_cube_line_counts(tmp_path):
    save_mesh(fixtures.unit_cube(), tmp_path / "c.obj")
    lines = (tmp_path / "c.obj").read_text().splitlines()
    assert sum(l.startswith("v ") for l in lines) == 8
    assert sum(l.startswith("f ") for l in lines) == 12


def test_save_empty_mesh_errors(tmp_path):
    with pytest.raises(MeshError):
        save_mesh(TriangleMesh.empty(), tmp_path / "e.obj")


@pytest.mark.parametrize("suffix", [".obj", ".ply"])
def test_round_trip_icosphere(tmp_path, suffix):
    m = fixtures.icosphere(2)
    save_mesh(m, tmp_path / f"s{suffix}")
    back = load_mesh(tmp_path / f"s{suffix}")
    assert np.array_equal(back.triangles, m.triangles)
    assert np.allclose(back.vertices, m.vertices, rtol=1e-8)


def test_ply_header_layout(tmp_path):
    save_mesh(fixtures.unit_cube(), tmp_path / "c.ply")
    raw = (tmp_path / "c.ply").read_bytes()
    head, body = raw.split(b"end_header\n", 1)
    assert b"binary_little_endian" in head
    assert struct.unpack("<3d", body[:24]) == (0.0, 0.0, 0.0)


def test_euler_counts():
    assert euler_characteristic(fixtures.icosphere(1)) == (2, 42, 120, 80)
    assert euler_characteristic(fixtures.torus_mesh(16, 16)) == (0, 256, 768, 512)
    assert euler_characteristic(two_icospheres())[0] == 4
    assert euler_characteristic(TriangleMesh.empty()) == (0, 0, 0, 0)


def test_genus():
    assert genus(fixtures.icosphere(1)) == 0
    assert genus(fixtures.torus_mesh()) == 1


def test_unused_vertices_not_counted():
    ico = fixtures.icosphere(1)
    padded = TriangleMesh(np.vstack([ico.vertices, [[9, 9, 9]]]), ico.triangles)
    assert euler_characteristic(padded)[0] == 2


def test_connected_components():
    assert connected_components(fixtures.icosphere(1)) == 1
    assert connected_components(two_icospheres()) == 2
    assert connected_components(TriangleMesh.empty()) == 0


def test_watertight():
    ico = fixtures.icosphere(1)
    assert check_watertight(ico)
    assert check_watertight(fixtures.torus_mesh())
    assert not check_watertight(TriangleMesh(ico.vertices, ico.triangles[1:]))
    assert not check_watertight(TriangleMesh(np.eye(3), [[0, 1, 2]]))
    flipped = ico.triangles.copy()
    flipped[0] = flipped[0, ::-1]
    assert not check_watertight(TriangleMesh(ico.vertices, flipped))
    assert non_manifold_edge_count(ico) == 0


def test_aabb():
    b = compute_aabb(fixtures.unit_cube())
    assert b.min.tolist() == [0, 0, 0] and b.max.tolist() == [1, 1, 1]
    single = TriangleMesh([[1, 2, 3]], np.zeros((0, 3), dtype=int))
    b = compute_aabb(single)
    assert b.min.tolist() == b.max.tolist() == [1, 2, 3]
    two = fixtures.unit_cube().merged(fixtures.unit_cube().transformed(translation=(10, 0, 0)))
    assert compute_aabb(two).max[0] == 11
    with pytest.raises(MeshError):
        compute_aabb(TriangleMesh.empty())


def test_inverted_aabb():
    with pytest.raises(MeshError):
        Aabb([1, 0, 0], [0, 1, 1])


def test_mesh_validation():
    with pytest.raises(MeshError):
        TriangleMesh(np.eye(3), [[0, 1, 3]])
    with pytest.raises(MeshError):
        TriangleMesh(np.eye(3), [[0, 1, 1]])
    m = fixtures.unit_cube()
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 5.0


def test_outward_volume():
    assert fixtures.unit_cube().volume() == pytest.approx(1.0)
    assert fixtures.box_mesh((0, 0, 0), (2, 3, 4)).volume() == pytest.approx(24.0)
