"""Visibility volume of a convex planar polygon.

Each polygon edge is tested by intersecting the visibility spheres of its
endpoints and checking that the result is a single genus-0 shell. Edges
that fail are split at their midpoint and re-queued; accepted edge volumes
are intersected into the polygon volume.
"""

from __future__ import annotations

import logging
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .depth import Rasterizer, compute_depth_sphere_cubemap, compute_depth_sphere_raycast, DepthSphere
from .mesh import Aabb, TriangleMesh
from .raycast import Bvh
from .regions import (
    ExtractionGrid,
    ImplicitRegion,
    VisibilitySphereRegion,
    box_region,
    default_grid,
    extract_surface,
    intersect_regions,
    region_topology,
)

log = logging.getLogger(__name__)

EPS_FRACTION = 1e-4


class PolygonError(ValueError):
    """The target polygon is not a valid convex planar polygon."""


class SplitLimitReached(Exception):
    """An edge is too short to split further."""


@dataclass(frozen=True, eq=False)
class PolygonTarget:
    vertices: np.ndarray
    normal: np.ndarray

    @property
    def edges(self) -> list[tuple[np.ndarray, np.ndarray]]:
        v = self.vertices
        return [(v[k], v[(k + 1) % len(v)]) for k in range(len(v))]

    @property
    def diameter(self) -> float:
        d = self.vertices[:, None, :] - self.vertices[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())


def validate_polygon(vertices, planar_tol: float = 1e-6) -> PolygonTarget:
    """Check planarity and strict convexity; returns the polygon with its plane normal."""
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 3:
        raise PolygonError("polygon vertices must be 3-D points")
    n = len(v)
    if n < 3:
        raise PolygonError(f"polygon needs at least 3 vertices (got {n})")
    nxt = np.roll(v, -1, axis=0)
    for k in range(n):
        if np.array_equal(v[k], nxt[k]):
            raise PolygonError(f"duplicate consecutive vertices at index {k} and {(k + 1) % n}")
    diam = float(np.sqrt(((v[:, None] - v[None]) ** 2).sum(-1)).max())
    centroid = v.mean(axis=0)
    _, _, vt = np.linalg.svd(v - centroid)
    normal = vt[-1]
    dev = np.abs((v - centroid) @ normal)
    if dev.max() > planar_tol * diam:
        raise PolygonError(f"polygon is not planar: max deviation {dev.max():.6g} m from best-fit plane "
                           f"(tolerance {planar_tol * diam:.3g} m)")
    e = nxt - v
    turn = np.cross(np.roll(e, 1, axis=0), e) @ normal  # turn at each vertex
    tiny = 1e-9 * diam * diam
    flat = np.flatnonzero(np.abs(turn) <= tiny)
    if len(flat):
        raise PolygonError(f"polygon is not strictly convex: vertex {int(flat[0])} is collinear with its neighbours")
    sign = np.sign(turn.sum())
    bad = np.flatnonzero(np.sign(turn) != sign)
    if len(bad):
        raise PolygonError(f"polygon is not convex: reflex vertex {int(bad[0])} at {v[bad[0]].tolist()}")
    # total turning must be one revolution, otherwise the outline winds more than once
    prev = np.roll(e, 1, axis=0)
    exterior = np.arctan2(turn, np.einsum("ij,ij->i", prev, e))
    if abs(abs(exterior.sum()) - 2 * np.pi) > 1e-6:
        raise PolygonError("polygon outline self-intersects")
    return PolygonTarget(v, normal * sign)


@dataclass(frozen=True)
class EdgeTask:
    a: tuple
    b: tuple
    depth: int = 0
    edge: int = 0

    def __post_init__(self):
        if tuple(self.a) == tuple(self.b):
            raise ValueError("edge endpoints must be distinct")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.b, self.a)))


def split_edge(task: EdgeTask, min_length: float = 0.0) -> tuple[EdgeTask, EdgeTask]:
    """Halve an edge at its arithmetic midpoint; raises when halves would fall below ``min_length``."""
    if task.length / 2.0 < min_length:
        raise SplitLimitReached(f"edge of length {task.length:.6g} m cannot be split below {min_length:.6g} m")
    a = np.asarray(task.a, dtype=float)
    b = np.asarray(task.b, dtype=float)
    mid = tuple(((a + b) / 2.0).tolist())
    return (EdgeTask(task.a, mid, task.depth + 1, task.edge),
            EdgeTask(mid, task.b, task.depth + 1, task.edge))


@dataclass
class VolumeSettings:
    d_max: float = 100.0
    n_phi: int = 160
    n_theta: int = 80
    extraction_resolution: tuple = (96, 96, 96)
    backend: str = "raycast"
    face_res: int = 256
    max_split_depth: int = 6
    min_split_cells: float = 2.0
    workers: int = 1


@dataclass
class EdgeRecord:
    edge: int
    endpoints: list
    depth: int
    chi: int
    components: int
    split: bool
    accepted: bool
    unresolved: bool = False

    def to_dict(self):
        return {
            "edge": self.edge,
            "endpoints": self.endpoints,
            "depth": self.depth,
            "chi": self.chi,
            "components": self.components,
            "split": self.split,
            "accepted": self.accepted,
            "unresolved": self.unresolved,
        }


@dataclass
class RunReport:
    edges: list[EdgeRecord] = field(default_factory=list)
    spheres_computed: int = 0
    sphere_cache_hits: int = 0
    warnings: list[str] = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    eps: float = 0.0

    @property
    def splits(self) -> int:
        return sum(1 for e in self.edges if e.split)

    def warn(self, msg: str):
        log.warning(msg)
        self.warnings.append(msg)

    def to_dict(self):
        return {
            "edges": [e.to_dict() for e in self.edges],
            "splits": self.splits,
            "sphere_cache": {"computed": self.spheres_computed, "hits": self.sphere_cache_hits},
            "warnings": list(self.warnings),
            "grid": self.grid,
            "eps": self.eps,
            "timings": self.timings,
        }


class SphereSource:
    """Computes and memoises one visibility sphere per distinct point."""

    def __init__(self, bvh: Bvh | None, settings: VolumeSettings, eps: float):
        self.bvh = bvh
        self.settings = settings
        self.eps = eps
        self.cache: dict[tuple, VisibilitySphereRegion] = {}
        self.hits = 0
        self._raster = None
        if settings.backend == "cubemap":
            self._raster = Rasterizer(bvh.mesh if bvh is not None else None)
        elif settings.backend != "raycast":
            raise ValueError(f"unknown depth backend {settings.backend!r}")

    def compute(self, point) -> DepthSphere:
        s = self.settings
        if self._raster is not None:
            return compute_depth_sphere_cubemap(self._raster, point, s.n_phi, s.n_theta, s.d_max,
                                                s.face_res, self.eps)
        return compute_depth_sphere_raycast(self.bvh, point, s.n_phi, s.n_theta, s.d_max, self.eps)

    def prefetch(self, points, workers: int = 1):
        todo = [tuple(p) for p in points if tuple(p) not in self.cache]
        todo = list(dict.fromkeys(todo))
        if workers > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                spheres = list(pool.map(self.compute, todo))
        else:
            spheres = [self.compute(p) for p in todo]
        for p, ds in zip(todo, spheres):
            self.cache[p] = VisibilitySphereRegion(ds)

    def __call__(self, point) -> VisibilitySphereRegion:
        key = tuple(point)
        if key in self.cache:
            self.hits += 1
        else:
            self.prefetch([key])
        return self.cache[key]

    @property
    def computed(self) -> int:
        return len(self.cache)


def scene_eps(bvh: Bvh | None, vertices, d_max: float) -> float:
    """Self-occlusion guard: a fixed fraction of the scene diagonal."""
    if bvh is not None:
        return EPS_FRACTION * bvh.bounds.diagonal
    v = np.asarray(vertices, dtype=float)
    return EPS_FRACTION * Aabb(v.min(0) - d_max, v.max(0) + d_max).diagonal


@dataclass
class VolumeResult:
    region: ImplicitRegion
    mesh: TriangleMesh
    report: RunReport
    grid: ExtractionGrid
    spheres: SphereSource


def compute_visibility_volume(polygon: PolygonTarget, bvh: Bvh | None, cfg=None, *,
                              grid: ExtractionGrid | None = None) -> VolumeResult:
    """Polygon visibility volume as an implicit region plus its extracted boundary mesh."""
    cfg = cfg or VolumeSettings()
    t_start = time.perf_counter()
    grid = grid or default_grid(polygon.vertices, cfg.d_max, cfg.extraction_resolution)
    report = RunReport()
    report.eps = scene_eps(bvh, polygon.vertices, cfg.d_max)
    report.grid = {
        "min": grid.bounds.min.tolist(),
        "max": grid.bounds.max.tolist(),
        "resolution": list(grid.resolution),
        "cell_size": grid.cell_size,
    }
    if bvh is not None and not np.all(bvh.bounds.contains(polygon.vertices)):
        report.warn("polygon extends outside the scene bounding box")

    spheres = SphereSource(bvh, cfg, report.eps)
    t0 = time.perf_counter()
    spheres.prefetch([tuple(v.tolist()) for v in polygon.vertices], workers=cfg.workers)
    report.timings["initial_spheres"] = time.perf_counter() - t0

    min_len = cfg.min_split_cells * grid.cell_size
    parts: list[ImplicitRegion] = [box_region(grid.bounds)]
    queue = deque(EdgeTask(tuple(a.tolist()), tuple(b.tolist()), 0, k)
                  for k, (a, b) in enumerate(polygon.edges))
    t0 = time.perf_counter()
    while queue:
        task = queue.popleft()
        vi = spheres(task.a)
        vj = spheres(task.b)
        vij = intersect_regions([vi, vj])
        chi, comps = region_topology(vij, grid)
        rec = EdgeRecord(task.edge, [list(task.a), list(task.b)], task.depth, int(chi), int(comps),
                         split=False, accepted=False)
        report.edges.append(rec)
        if comps == 0:
            report.warn(f"edge {task.edge} (depth {task.depth}): endpoint spheres do not overlap; "
                        "the visibility volume is empty")
        elif chi != 2 or comps != 1:
            if task.depth < cfg.max_split_depth:
                try:
                    halves = split_edge(task, min_len)
                except SplitLimitReached:
                    pass
                else:
                    rec.split = True
                    queue.extend(halves)
                    continue
            rec.unresolved = True
            report.warn(f"unresolved topology on edge {task.edge} at depth {task.depth}: "
                        f"chi={chi}, components={comps}; accepting the endpoint intersection")
        rec.accepted = True
        parts.append(vij)
    report.timings["edge_tests"] = time.perf_counter() - t0

    region = intersect_regions(parts)
    t0 = time.perf_counter()
    mesh = extract_surface(region, grid)
    report.timings["extraction"] = time.perf_counter() - t0
    report.spheres_computed = spheres.computed
    report.sphere_cache_hits = spheres.hits
    report.timings["total"] = time.perf_counter() - t_start
    if mesh.is_empty():
        report.warn("polygon visibility volume is empty")
    return VolumeResult(region, mesh, report, grid, spheres)


def apply_nav_constraints(region: ImplicitRegion, constraints, grid: ExtractionGrid):
    """Intersect with navigation constraints; returns ``(region, mesh, is_empty)``."""
    constraints = list(constraints)
    if constraints:
        region = intersect_regions([region, *constraints])
    mesh = extract_surface(region, grid)
    return region, mesh, mesh.is_empty()
