"""Bounding volume hierarchy over a triangle mesh with first-hit and occlusion queries."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .mesh import Aabb, MeshError, TriangleMesh, compute_aabb

LEAF_SIZE = 4
MAX_DEPTH = 64


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_min: float = 0.0
    t_max: float = np.inf

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=float).reshape(3)
        d = np.asarray(self.direction, dtype=float).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("ray direction must be unit length")
        if not (0.0 <= self.t_min < self.t_max):
            raise ValueError(f"need 0 <= t_min < t_max, got {self.t_min}, {self.t_max}")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True, eq=False)
class Bvh:
    """Flattened binary BVH.

    Node ``k`` is a leaf when ``count[k] > 0``; its triangles are
    ``start[k] : start[k] + count[k]`` of the reordered triangle arrays.
    Internal nodes reference ``left[k]`` and ``right[k]``.
    """

    mesh: TriangleMesh
    node_min: np.ndarray
    node_max: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    v0: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    tri_index: np.ndarray
    bounds: Aabb

    @property
    def n_nodes(self) -> int:
        return len(self.count)

    def arrays(self):
        return (self.node_min, self.node_max, self.left, self.right, self.start, self.count,
                self.v0, self.v1, self.v2, self.tri_index)

    def leaves(self):
        return np.flatnonzero(self.count > 0)

    def default_eps(self) -> float:
        """Self-occlusion guard: ``1e-4`` of the scene diagonal."""
        return 1e-4 * self.bounds.diagonal


def build_bvh(mesh: TriangleMesh) -> Bvh:
    """Median-split BVH over the longest centroid axis, at most ``LEAF_SIZE`` triangles per leaf."""
    if mesh.is_empty():
        raise MeshError("cannot build a BVH over an empty mesh")
    corners = mesh.corners()
    cmin = corners.min(axis=1)
    cmax = corners.max(axis=1)
    cent = corners.mean(axis=1)
    bounds = compute_aabb(mesh)
    pad = 1e-9 * max(bounds.diagonal, 1.0)

    order = np.arange(mesh.n_triangles)
    node_min, node_max, left, right, start, count = [], [], [], [], [], []

    def new_node():
        node_min.append(None)
        node_max.append(None)
        left.append(-1)
        right.append(-1)
        start.append(0)
        count.append(0)
        return len(count) - 1

    root = new_node()
    stack = [(root, 0, mesh.n_triangles, 0)]
    while stack:
        nd, lo, hi, depth = stack.pop()
        idx = order[lo:hi]
        node_min[nd] = cmin[idx].min(axis=0) - pad
        node_max[nd] = cmax[idx].max(axis=0) + pad
        n = hi - lo
        if n <= LEAF_SIZE or depth >= MAX_DEPTH - 2:
            start[nd] = lo
            count[nd] = n
            continue
        c = cent[idx]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        mid = n // 2
        part = np.argsort(c[:, axis], kind="stable")
        order[lo:hi] = idx[part]
        l_node = new_node()
        r_node = new_node()
        left[nd] = l_node
        right[nd] = r_node
        stack.append((r_node, lo + mid, hi, depth + 1))
        stack.append((l_node, lo, lo + mid, depth + 1))

    ordered = corners[order]
    return Bvh(
        mesh=mesh,
        node_min=np.ascontiguousarray(node_min, dtype=float),
        node_max=np.ascontiguousarray(node_max, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        start=np.asarray(start, dtype=np.int64),
        count=np.asarray(count, dtype=np.int64),
        v0=np.ascontiguousarray(ordered[:, 0]),
        v1=np.ascontiguousarray(ordered[:, 1]),
        v2=np.ascontiguousarray(ordered[:, 2]),
        tri_index=np.ascontiguousarray(order, dtype=np.int64),
        bounds=bounds,
    )


def _prep(origins, dirs, tmin, tmax):
    o = np.ascontiguousarray(np.atleast_2d(origins), dtype=float)
    d = np.ascontiguousarray(np.atleast_2d(dirs), dtype=float)
    n = max(len(o), len(d))
    o = np.ascontiguousarray(np.broadcast_to(o, (n, 3)))
    d = np.ascontiguousarray(np.broadcast_to(d, (n, 3)))
    t0 = np.ascontiguousarray(np.broadcast_to(np.asarray(tmin, dtype=float), (n,)))
    t1 = np.ascontiguousarray(np.broadcast_to(np.asarray(tmax, dtype=float), (n,)))
    return o, d, t0, t1


def _chunked(fn, n, workers, chunk=4096):
    if workers <= 1 or n <= chunk:
        return [fn(0, n)]
    spans = [(a, min(a + chunk, n)) for a in range(0, n, chunk)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: fn(*s), spans))


def first_hit_many(bvh: Bvh | None, origins, dirs, tmin, tmax, *, impl=None, workers: int = 1):
    """Closest hits for a batch of rays.

    Returns ``(t, tri)``; misses have ``t = inf`` and ``tri = -1``. Hits exactly
    at ``tmin`` or ``tmax`` count; equal ``t`` resolves to the lower triangle
    index.
    """
    o, d, t0, t1 = _prep(origins, dirs, tmin, tmax)
    n = len(o)
    if bvh is None:
        return np.full(n, np.inf), np.full(n, -1, dtype=np.int64)
    impl = impl or kernels.impl
    arrays = bvh.arrays()

    def run(a, b):
        return impl.first_hit(*arrays, o[a:b], d[a:b], t0[a:b], t1[a:b])

    parts = _chunked(run, n, workers)
    return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))


def any_hit_many(bvh: Bvh | None, origins, dirs, tmin, tmax, *, impl=None, workers: int = 1):
    """True where some triangle is hit with ``tmin < t < tmax`` (open interval)."""
    o, d, t0, t1 = _prep(origins, dirs, tmin, tmax)
    n = len(o)
    if bvh is None:
        return np.zeros(n, dtype=bool)
    impl = impl or kernels.impl
    arrays = bvh.arrays()

    def run(a, b):
        return impl.any_hit(*arrays, o[a:b], d[a:b], t0[a:b], t1[a:b])

    return np.concatenate(_chunked(run, n, workers))


def first_hit(bvh: Bvh | None, ray: Ray, *, impl=None):
    """``(t, triangle_index)`` of the closest hit in ``[t_min, t_max]``, or None."""
    t, tri = first_hit_many(bvh, ray.origin, ray.direction, ray.t_min, ray.t_max, impl=impl)
    if tri[0] < 0:
        return None
    return float(t[0]), int(tri[0])


def segments_occluded(bvh: Bvh | None, p, q, eps, *, impl=None, workers: int = 1) -> np.ndarray:
    """Vectorised ``segment_occluded`` over rows of ``p`` and ``q``."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    p, q = np.broadcast_arrays(p, q)
    # canonical endpoint order keeps the predicate exactly symmetric
    key = _lex_greater(p, q)
    a = np.where(key[:, None], q, p)
    b = np.where(key[:, None], p, q)
    v = b - a
    length = np.linalg.norm(v, axis=1)
    if np.any(length == 0.0):
        raise ValueError("segment endpoints must differ")
    d = v / length[:, None]
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (len(p),))
    lo = eps
    hi = length - eps
    out = np.zeros(len(p), dtype=bool)
    live = hi > lo
    if np.any(live):
        out[live] = any_hit_many(bvh, a[live], d[live], lo[live], hi[live], impl=impl,
                                 workers=workers)
    return out


def _lex_greater(p, q):
    gt = np.zeros(len(p), dtype=bool)
    decided = np.zeros(len(p), dtype=bool)
    for k in range(3):
        g = ~decided & (p[:, k] > q[:, k])
        l = ~decided & (p[:, k] < q[:, k])
        gt |= g
        decided |= g | l
    return gt


def segment_occluded(bvh: Bvh | None, p, q, eps: float, *, impl=None) -> bool:
    """True iff a scene triangle crosses the open segment ``t in (eps, |q - p| - eps)``."""
    return bool(segments_occluded(bvh, p, q, eps, impl=impl)[0])
