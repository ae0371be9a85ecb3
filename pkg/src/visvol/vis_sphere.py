"""Visibility spheres: closed meshes and star-shaped membership from a depth grid."""

from __future__ import annotations

import numpy as np

from .depth import DepthSphere, cell_directions
from .mesh import TriangleMesh


def tessellate_visibility_sphere(ds: DepthSphere) -> TriangleMesh:
    """Closed, outward-oriented genus-0 mesh through the cell-centre depths.

    One vertex per grid cell plus a vertex at each pole placed at the mean
    depth of the adjacent ring. Ring quads are split in two and the poles
    are closed with triangle fans, so ``V = n_phi * n_theta + 2`` and
    ``F = 2 * n_phi * n_theta``.
    """
    n_phi, n_theta = ds.n_phi, ds.n_theta
    dirs = cell_directions(n_phi, n_theta)
    ring = ds.center + dirs * ds.depth[..., None]
    # vertex index of cell (i, j) is j * n_phi + i
    verts = np.concatenate([
        ring.transpose(1, 0, 2).reshape(-1, 3),
        (ds.center + np.array([0.0, 0.0, ds.depth[:, 0].mean()]))[None],
        (ds.center - np.array([0.0, 0.0, ds.depth[:, -1].mean()]))[None],
    ])
    north = n_phi * n_theta
    south = north + 1

    i = np.arange(n_phi)
    i1 = (i + 1) % n_phi
    tris = []
    for j in range(n_theta - 1):
        a = j * n_phi + i
        b = j * n_phi + i1
        c = (j + 1) * n_phi + i1
        d = (j + 1) * n_phi + i
        tris.append(np.stack([a, d, b], axis=1))
        tris.append(np.stack([b, d, c], axis=1))
    tris.append(np.stack([np.full(n_phi, north), i, i1], axis=1))
    last = (n_theta - 1) * n_phi
    tris.append(np.stack([np.full(n_phi, south), last + i1, last + i], axis=1))
    return TriangleMesh(verts, np.concatenate(tris))


def contains_points(ds: DepthSphere, points) -> np.ndarray:
    """Vectorised membership: ``|p - c| <= depth(direction of p - c)``."""
    rel = np.asarray(points, dtype=float) - ds.center
    r = np.linalg.norm(rel, axis=-1)
    return r <= ds.lookup(rel)


def contains_point(ds: DepthSphere, p) -> bool:
    return bool(contains_points(ds, np.asarray(p, dtype=float).reshape(1, 3))[0])


def signed_range(ds: DepthSphere, points) -> np.ndarray:
    """``|p - c| - depth(p)``: non-positive exactly on members, in metres."""
    rel = np.asarray(points, dtype=float) - ds.center
    return np.linalg.norm(rel, axis=-1) - ds.lookup(rel)
