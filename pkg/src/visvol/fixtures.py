"""Procedural meshes and the bundled test scenes."""

from __future__ import annotations

import numpy as np

from .mesh import TriangleMesh

# two parallel long buildings with a triangular target on the ground between them
TWO_BUILDINGS_TRIANGLE = [(-6.0, -7.0, 0.0), (7.0, -5.0, 0.0), (0.0, 8.0, 0.0)]
PILLAR_TRIANGLE = [(-12.0, 0.0, 0.0), (12.0, 0.0, 0.0), (0.0, -14.0, 0.0)]


def unit_cube() -> TriangleMesh:
    return box_mesh((0, 0, 0), (1, 1, 1))


def box_mesh(lo, hi) -> TriangleMesh:
    """Axis-aligned box with 12 outward-facing triangles."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    v = np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    # vertex index = 4 * xi + 2 * yi + zi
    quads = [
        (0, 1, 3, 2),  # x = lo
        (4, 6, 7, 5),  # x = hi
        (0, 4, 5, 1),  # y = lo
        (2, 3, 7, 6),  # y = hi
        (0, 2, 6, 4),  # z = lo
        (1, 5, 7, 3),  # z = hi
    ]
    tris = []
    for a, b, c, d in quads:
        tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(v, tris)


def grid_plane(lo, hi, z: float, n: int) -> TriangleMesh:
    """Upward-facing ``n x n`` quad grid at height ``z``."""
    xs = np.linspace(lo[0], hi[0], n + 1)
    ys = np.linspace(lo[1], hi[1], n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    v = np.stack([X.ravel(), Y.ravel(), np.full(X.size, float(z))], axis=1)
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[1:, :-1].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[:-1, 1:].ravel()
    tris = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    return TriangleMesh(v, tris)


def icosphere(subdivisions: int = 1, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Geodesic sphere; ``subdivisions=1`` gives V=42, E=120, F=80."""
    t = (1.0 + 5 ** 0.5) / 2.0
    v = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
         (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    f = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4), (11, 10, 2),
         (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9), (4, 9, 5),
         (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(p, dtype=float) / np.linalg.norm(p) for p in v]
    faces = f
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return TriangleMesh(np.array(verts) * radius + np.asarray(center, dtype=float), faces)


def torus_mesh(n_major: int = 16, n_minor: int = 16, major: float = 3.0, minor: float = 1.0) -> TriangleMesh:
    """Structured torus; 16 x 16 gives V=256, E=768, F=512."""
    u = np.arange(n_major) * 2 * np.pi / n_major
    w = np.arange(n_minor) * 2 * np.pi / n_minor
    U, W = np.meshgrid(u, w, indexing="ij")
    r = major + minor * np.cos(W)
    v = np.stack([r * np.cos(U), r * np.sin(U), minor * np.sin(W)], axis=-1).reshape(-1, 3)
    i = np.arange(n_major)[:, None]
    j = np.arange(n_minor)[None, :]
    a = (i * n_minor + j).ravel()
    b = (((i + 1) % n_major) * n_minor + j).ravel()
    c = (((i + 1) % n_major) * n_minor + (j + 1) % n_minor).ravel()
    d = (i * n_minor + (j + 1) % n_minor).ravel()
    tris = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    return TriangleMesh(v, tris)


def two_buildings_scene(ground_cells: int = 70) -> TriangleMesh:
    """Ground plane with two long box buildings either side of the target triangle.

    The buildings run 120 m along y, farther than any 50 m sightline can
    reach round their ends. With the default ground resolution the scene
    has 9824 triangles.
    """
    ground = grid_plane((-80.0, -80.0), (80.0, 80.0), 0.0, ground_cells)
    west = box_mesh((-30.0, -60.0, 0.0), (-12.0, 60.0, 30.0))
    east = box_mesh((12.0, -60.0, 0.0), (28.0, 60.0, 20.0))
    return ground.merged(west).merged(east)


def pillar_scene(ground_cells: int = 40) -> TriangleMesh:
    """Ground plane with a slender pillar just beside the midpoint of one target edge.

    From the two endpoints of that edge the pillar's shadows diverge, so the
    region seeing both endpoints wraps around the pillar and has a handle.
    """
    ground = grid_plane((-60.0, -60.0), (60.0, 60.0), 0.0, ground_cells)
    pillar = box_mesh((-1.0, 2.0, 0.0), (1.0, 4.0, 8.0))
    return ground.merged(pillar)
