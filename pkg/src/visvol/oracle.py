"""Brute-force visibility ground truth by dense segment testing."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .mesh import TriangleMesh
from .poly_vis import PolygonTarget
from .raycast import Bvh, segments_occluded
from .regions import ExtractionGrid, ImplicitRegion

DEFAULT_SAMPLES_PER_EDGE = 16


def van_der_corput(n: int) -> np.ndarray:
    """First ``n`` points of the base-2 radical-inverse sequence, all in ``(0, 1)``."""
    out = np.zeros(n)
    for k in range(n):
        i, denom, x = k + 1, 1.0, 0.0
        while i:
            denom *= 2.0
            x += (i & 1) / denom
            i >>= 1
        out[k] = x
    return out


def polygon_samples(polygon: PolygonTarget, samples_per_edge: int = DEFAULT_SAMPLES_PER_EDGE,
                    interior: int = 0) -> np.ndarray:
    """Vertices, ``samples_per_edge`` points along every edge and optional interior points.

    Edge parameters follow the van der Corput sequence, so the sample set for
    ``S`` is contained in the set for ``S + 1``.
    """
    if samples_per_edge < 1:
        raise ValueError("samples_per_edge must be >= 1")
    v = polygon.vertices
    s = van_der_corput(samples_per_edge)[:, None]
    pts = [v]
    for a, b in polygon.edges:
        pts.append(a + s * (b - a))
    if interior > 0:
        # barycentric lattice over a fan from vertex 0
        m = int(np.ceil(np.sqrt(interior)))
        uv = [(i / (m + 1), j / (m + 1)) for i in range(1, m + 1) for j in range(1, m + 1) if i + j <= m]
        uv = np.array(uv).reshape(-1, 2)
        for k in range(1, len(v) - 1):
            pts.append(v[0] + uv[:, :1] * (v[k] - v[0]) + uv[:, 1:] * (v[k + 1] - v[0]))
    return np.concatenate(pts)


def points_see_polygon(bvh: Bvh | None, points, polygon: PolygonTarget, d_max: float,
                       samples_per_edge: int = DEFAULT_SAMPLES_PER_EDGE, eps: float | None = None,
                       interior: int = 0, workers: int = 1) -> np.ndarray:
    """Vectorised :func:`point_sees_polygon` over rows of ``points``."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    q = polygon_samples(polygon, samples_per_edge, interior)
    if eps is None:
        eps = bvh.default_eps() if bvh is not None else 1e-4 * d_max
    dist = np.linalg.norm(p[:, None, :] - q[None, :, :], axis=-1)
    ok = np.all(dist <= d_max, axis=1)
    if bvh is None or not ok.any():
        return ok
    cand = np.flatnonzero(ok)
    pp = np.repeat(p[cand], len(q), axis=0)
    qq = np.tile(q, (len(cand), 1))
    same = np.all(pp == qq, axis=1)
    occ = np.zeros(len(pp), dtype=bool)
    occ[~same] = segments_occluded(bvh, pp[~same], qq[~same], eps, workers=workers)
    ok[cand] = ~occ.reshape(len(cand), len(q)).any(axis=1)
    return ok


def point_sees_polygon(bvh: Bvh | None, p, polygon: PolygonTarget, d_max: float,
                       samples_per_edge: int = DEFAULT_SAMPLES_PER_EDGE, eps: float | None = None,
                       interior: int = 0) -> bool:
    """True iff every polygon sample is within ``d_max`` of ``p`` and unoccluded from it."""
    return bool(points_see_polygon(bvh, p, polygon, d_max, samples_per_edge, eps, interior)[0])


def distance_to_mesh(mesh: TriangleMesh, points, max_distance: float) -> np.ndarray:
    """Exact point-to-surface distance, capped at ``max_distance`` (``inf`` beyond it)."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.full(len(p), np.inf)
    if mesh.is_empty():
        return out
    tri = mesh.corners()
    cent = tri.mean(axis=1)
    rad = np.linalg.norm(tri - cent[:, None], axis=-1).max()
    tree = cKDTree(cent)
    lists = tree.query_ball_point(p, max_distance + rad)
    for k, cand in enumerate(lists):
        if not cand:
            continue
        d = _point_triangle_distance(p[k], tri[cand]).min()
        if d <= max_distance:
            out[k] = d
    return out


def _point_triangle_distance(p, tri):
    """Distances from one point to many triangles (Ericson's closest-point regions)."""
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = va + vb + vc
        v = vb / denom
        w = vc / denom
        closest = a + ab * v[:, None] + ac * w[:, None]
        # edge regions
        t_ab = d1 / (d1 - d3)
        t_ac = d2 / (d2 - d6)
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
    r_a = (d1 <= 0) & (d2 <= 0)
    r_b = (d3 >= 0) & (d4 <= d3)
    r_c = (d6 >= 0) & (d5 <= d6)
    r_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    r_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    r_bc = (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
    closest = np.where(r_bc[:, None], b + (c - b) * t_bc[:, None], closest)
    closest = np.where(r_ac[:, None], a + ac * t_ac[:, None], closest)
    closest = np.where(r_ab[:, None], a + ab * t_ab[:, None], closest)
    closest = np.where(r_c[:, None], c, closest)
    closest = np.where(r_b[:, None], b, closest)
    closest = np.where(r_a[:, None], a, closest)
    return np.linalg.norm(closest - p, axis=1)


def sample_box(grid: ExtractionGrid, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return grid.bounds.min + rng.random((n, 3)) * grid.bounds.extent


def agreement_report(region: ImplicitRegion, bvh: Bvh | None, polygon: PolygonTarget, d_max: float,
                     grid: ExtractionGrid, mesh: TriangleMesh, n_samples: int = 10000,
                     boundary_margin: float | None = None, seed: int = 0,
                     samples_per_edge: int = DEFAULT_SAMPLES_PER_EDGE, eps: float | None = None,
                     max_listed: int = 50, workers: int = 1) -> dict:
    """Compare region membership with the oracle on seeded uniform samples of the grid box."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if boundary_margin is None:
        boundary_margin = grid.cell_diagonal
    pts = sample_box(grid, n_samples, seed)
    member = region.contains(pts)
    truth = points_see_polygon(bvh, pts, polygon, d_max, samples_per_edge, eps, workers=workers)
    agree = member == truth
    far = distance_to_mesh(mesh, pts, boundary_margin) > boundary_margin
    bad = np.flatnonzero(~agree)
    return {
        "n_samples": int(n_samples),
        "seed": int(seed),
        "boundary_margin": float(boundary_margin),
        "samples_per_edge": int(samples_per_edge),
        "agreement": float(agree.mean()),
        "n_far": int(far.sum()),
        "agreement_far": float(agree[far].mean()) if far.any() else 1.0,
        "members": int(member.sum()),
        "oracle_visible": int(truth.sum()),
        "false_positive": int((member & ~truth).sum()),
        "false_negative": int((~member & truth).sum()),
        "disagreements": [
            {"point": pts[k].tolist(), "region": bool(member[k]), "oracle": bool(truth[k]),
             "far_from_boundary": bool(far[k])}
            for k in bad[:max_listed]
        ],
    }
