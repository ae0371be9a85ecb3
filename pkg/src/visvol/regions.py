"""Implicit region algebra and closed-surface extraction.

Regions are membership predicates backed by a signed pseudo-distance field
(non-positive inside). Intersection is the pointwise maximum. Surfaces are
extracted with marching tetrahedra over the Kuhn subdivision of the grid
cells; because the subdivision is a consistent simplicial complex, the
output is always a closed, consistently oriented 2-manifold.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .depth import DepthSphere
from .mesh import Aabb, TriangleMesh, connected_components, euler_characteristic
from .vis_sphere import signed_range

EDGE_T_CLAMP = 0.01


class ImplicitRegion:
    """Base class: subclasses implement ``field``."""

    def field(self, points) -> np.ndarray:
        raise NotImplementedError

    def contains(self, points) -> np.ndarray:
        return self.field(np.asarray(points, dtype=float)) <= 0.0

    def grid_field(self, grid: "ExtractionGrid") -> np.ndarray:
        return self.field(grid.points).reshape(grid.node_shape)

    def children(self) -> tuple["ImplicitRegion", ...]:
        return (self,)


class VisibilitySphereRegion(ImplicitRegion):
    def __init__(self, sphere: DepthSphere):
        self.sphere = sphere
        self._grid_cache: dict = {}

    def field(self, points):
        return signed_range(self.sphere, points)

    def grid_field(self, grid):
        key = grid.key
        if key not in self._grid_cache:
            f = super().grid_field(grid)
            f.setflags(write=False)
            self._grid_cache[key] = f
        return self._grid_cache[key]

    def __repr__(self):
        return f"VisibilitySphereRegion(center={self.sphere.center.tolist()}, d_max={self.sphere.d_max})"


class BoxRegion(ImplicitRegion):
    def __init__(self, box: Aabb):
        self.box = box

    def field(self, points):
        p = np.asarray(points, dtype=float)
        return np.maximum(self.box.min - p, p - self.box.max).max(axis=-1)

    def __repr__(self):
        return f"BoxRegion({self.box.min.tolist()}, {self.box.max.tolist()})"


class AltitudeBand(ImplicitRegion):
    def __init__(self, z_lo: float, z_hi: float):
        self.z_lo = float(z_lo)
        self.z_hi = float(z_hi)

    def field(self, points):
        z = np.asarray(points, dtype=float)[..., 2]
        return np.maximum(self.z_lo - z, z - self.z_hi)

    def __repr__(self):
        return f"AltitudeBand({self.z_lo}, {self.z_hi})"


class BallRegion(ImplicitRegion):
    def __init__(self, center, radius: float):
        self.center = np.asarray(center, dtype=float).reshape(3)
        self.radius = float(radius)

    def field(self, points):
        return np.linalg.norm(np.asarray(points, dtype=float) - self.center, axis=-1) - self.radius


class TorusRegion(ImplicitRegion):
    """Solid torus around the z axis through ``center``."""

    def __init__(self, center, major: float, minor: float):
        self.center = np.asarray(center, dtype=float).reshape(3)
        self.major = float(major)
        self.minor = float(minor)

    def field(self, points):
        p = np.asarray(points, dtype=float) - self.center
        q = np.hypot(p[..., 0], p[..., 1]) - self.major
        return np.hypot(q, p[..., 2]) - self.minor


class IntersectionRegion(ImplicitRegion):
    def __init__(self, regions):
        self.regions = tuple(regions)

    def field(self, points):
        p = np.asarray(points, dtype=float)
        out = self.regions[0].field(p)
        for r in self.regions[1:]:
            out = np.maximum(out, r.field(p))
        return out

    def grid_field(self, grid):
        out = np.array(self.regions[0].grid_field(grid), copy=True)
        for r in self.regions[1:]:
            np.maximum(out, r.grid_field(grid), out=out)
        return out

    def children(self):
        return self.regions

    def __repr__(self):
        return f"IntersectionRegion({list(self.regions)!r})"


def intersect_regions(regions) -> ImplicitRegion:
    """Conjunction of regions; nested intersections are flattened and repeats dropped."""
    flat: list[ImplicitRegion] = []
    seen: set[int] = set()
    for r in regions:
        for c in r.children():
            if id(c) not in seen:
                seen.add(id(c))
                flat.append(c)
    if not flat:
        raise ValueError("intersect_regions needs at least one region")
    if len(flat) == 1:
        return flat[0]
    return IntersectionRegion(flat)


def box_region(box: Aabb) -> BoxRegion:
    return BoxRegion(box)


def altitude_band(z_lo: float, z_hi: float) -> AltitudeBand:
    if not (z_lo < z_hi):
        raise ValueError(f"altitude band needs z_lo < z_hi (got {z_lo}, {z_hi})")
    return AltitudeBand(z_lo, z_hi)


# ---------------------------------------------------------------------------
# Extraction grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ExtractionGrid:
    """Regular grid of ``resolution`` cells per axis spanning ``bounds``."""

    bounds: Aabb
    resolution: tuple[int, int, int]

    def __post_init__(self):
        res = tuple(int(n) for n in self.resolution)
        if len(res) != 3 or min(res) < 2:
            raise ValueError(f"grid resolution must be >= 2 per axis (got {res})")
        if np.any(self.bounds.extent <= 0):
            raise ValueError("grid bounds are degenerate")
        object.__setattr__(self, "resolution", res)

    @property
    def key(self):
        return (tuple(self.bounds.min.tolist()), tuple(self.bounds.max.tolist()), self.resolution)

    @property
    def node_shape(self):
        return tuple(n + 1 for n in self.resolution)

    @property
    def spacing(self) -> np.ndarray:
        return self.bounds.extent / np.array(self.resolution)

    @property
    def cell_size(self) -> float:
        return float(self.spacing.max())

    @property
    def cell_diagonal(self) -> float:
        return float(np.linalg.norm(self.spacing))

    @cached_property
    def points(self) -> np.ndarray:
        axes = [self.bounds.min[k] + np.arange(self.node_shape[k]) * self.spacing[k] for k in range(3)]
        axes = [np.append(a[:-1], self.bounds.max[k]) for k, a in enumerate(axes)]
        g = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        g.setflags(write=False)
        return g


def default_grid(vertices, d_max: float, resolution=(96, 96, 96)) -> ExtractionGrid:
    """Cube around the intersection of the vertices' ``d_max`` boxes, padded by two cells."""
    v = np.asarray(vertices, dtype=float).reshape(-1, 3)
    lo = (v - d_max).max(axis=0)
    hi = (v + d_max).min(axis=0)
    side = float((hi - lo).max())
    center = 0.5 * (lo + hi)
    res = np.asarray(resolution, dtype=int)
    if np.any(res <= 4):
        raise ValueError("default grid needs more than 4 cells per axis")
    h = side / (res - 4)
    half = 0.5 * side + 2.0 * h
    return ExtractionGrid(Aabb(center - half, center + half), tuple(int(n) for n in res))


# ---------------------------------------------------------------------------
# Marching tetrahedra
# ---------------------------------------------------------------------------

_TET_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


def _kuhn_tets():
    tets = []
    for perm in itertools.permutations(range(3)):
        corners = [np.zeros(3, dtype=int)]
        for axis in perm:
            nxt = corners[-1].copy()
            nxt[axis] = 1
            corners.append(nxt)
        c = np.array(corners)
        if np.linalg.det((c[1:] - c[0]).astype(float)) < 0:
            c = c[[0, 1, 3, 2]]
        tets.append(c)
    return np.array(tets)  # (6, 4, 3)


def _case_table():
    ref = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    edge_of = {frozenset(e): k for k, e in enumerate(_TET_EDGES)}
    table = []
    for mask in range(16):
        ins = [k for k in range(4) if mask >> k & 1]
        out = [k for k in range(4) if not mask >> k & 1]
        if len(ins) in (0, 4):
            table.append([])
            continue
        if len(ins) == 1 or len(ins) == 3:
            lone, others = (ins[0], out) if len(ins) == 1 else (out[0], ins)
            polys = [[edge_of[frozenset((lone, o))] for o in others]]
        else:
            i0, i1 = ins
            o0, o1 = out
            cyc = [edge_of[frozenset(p)] for p in ((i0, o0), (i0, o1), (i1, o1), (i1, o0))]
            polys = [[cyc[0], cyc[1], cyc[2]], [cyc[0], cyc[2], cyc[3]]]
        c_in = ref[ins].mean(axis=0)
        c_out = ref[out].mean(axis=0)
        tris = []
        for tri in polys:
            pts = np.array([ref[list(_TET_EDGES[e])].mean(axis=0) for e in tri])
            n = np.cross(pts[1] - pts[0], pts[2] - pts[0])
            if np.dot(n, c_out - c_in) < 0:
                tri = [tri[0], tri[2], tri[1]]
            tris.append(tri)
        table.append(tris)
    return table


_TETS = _kuhn_tets()
_CASES = _case_table()


def _edge_keys(tet: np.ndarray):
    """Per tet edge: lower corner offset and the 3-bit direction code to the upper corner."""
    lows, codes = [], []
    for a, b in _TET_EDGES:
        pa, pb = tet[a], tet[b]
        lo, hi = (pa, pb) if np.all(pa <= pb) else (pb, pa)
        d = hi - lo
        lows.append(lo)
        codes.append(int(d[0] * 4 + d[1] * 2 + d[2]))
    return np.array(lows), np.array(codes)


_EDGE_LOW, _EDGE_CODE = zip(*[_edge_keys(t) for t in _TETS])


def extract_surface(region: ImplicitRegion, grid: ExtractionGrid) -> TriangleMesh:
    """Closed, outward-oriented triangle mesh of the region boundary inside ``grid``.

    Vertices are placed on grid-tetrahedron edges by linear interpolation of
    the region's pseudo-distance field. Grid nodes on the bounding faces are
    treated as outside so the surface is always closed.
    """
    f = np.array(region.grid_field(grid), dtype=float, copy=True)
    return _march(f, grid)


def _march(f: np.ndarray, grid: ExtractionGrid) -> TriangleMesh:
    nx, ny, nz = grid.resolution
    shape = f.shape
    h_min = float(grid.spacing.min())
    boundary = np.zeros(shape, dtype=bool)
    boundary[[0, -1], :, :] = True
    boundary[:, [0, -1], :] = True
    boundary[:, :, [0, -1]] = True
    f[~np.isfinite(f) & (f < 0)] = -h_min
    f[~np.isfinite(f)] = h_min
    f[boundary] = np.maximum(f[boundary], 0.5 * h_min)
    inside = f <= 0.0
    if not inside.any():
        return TriangleMesh.empty()

    corner_views = [inside[dx:dx + nx, dy:dy + ny, dz:dz + nz]
                    for dx in (0, 1) for dy in (0, 1) for dz in (0, 1)]
    any_in = np.logical_or.reduce(corner_views)
    all_in = np.logical_and.reduce(corner_views)
    cells = np.argwhere(any_in & ~all_in)
    if not len(cells):
        return TriangleMesh.empty()

    strides = np.array([shape[1] * shape[2], shape[2], 1], dtype=np.int64)
    base = cells @ strides
    flat_in = inside.reshape(-1)
    keys = []
    for t in range(6):
        corner_lin = _TETS[t] @ strides
        mask = np.zeros(len(base), dtype=np.int64)
        for k in range(4):
            mask |= flat_in[base + corner_lin[k]].astype(np.int64) << k
        edge_base = _EDGE_LOW[t] @ strides
        for case in range(1, 15):
            sel = base[mask == case]
            if not len(sel):
                continue
            for tri in _CASES[case]:
                cols = [(sel + edge_base[e]) * 8 + _EDGE_CODE[t][e] for e in tri]
                keys.append(np.stack(cols, axis=1))
    keys = np.concatenate(keys)
    uniq, inv = np.unique(keys.reshape(-1), return_inverse=True)
    triangles = inv.reshape(-1, 3)

    node = uniq // 8
    code = uniq % 8
    step = np.stack([(code >> 2) & 1, (code >> 1) & 1, code & 1], axis=1)
    ia = np.stack(np.unravel_index(node, shape), axis=1)
    ib = ia + step
    flat_f = f.reshape(-1)
    fa = flat_f[node]
    fb = flat_f[np.ravel_multi_index(ib.T, shape)]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = fa / (fa - fb)
    t = np.where(np.isfinite(t), t, 0.5)
    t = np.clip(t, EDGE_T_CLAMP, 1.0 - EDGE_T_CLAMP)
    pos = grid.bounds.min + (ia + t[:, None] * step) * grid.spacing
    return TriangleMesh(pos, triangles)


def region_topology(region: ImplicitRegion, grid: ExtractionGrid) -> tuple[int, int]:
    """Euler characteristic and face-connected component count of the extracted boundary."""
    mesh = extract_surface(region, grid)
    return euler_characteristic(mesh)[0], connected_components(mesh)
