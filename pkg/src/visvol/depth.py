"""Omnidirectional depth fields around a point.

Two backends produce a :class:`DepthSphere`: direct ray casting through the
BVH, and six-face depth cubemaps rendered by a software rasterizer and then
resampled onto the equirectangular grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .mesh import TriangleMesh
from .raycast import Bvh, first_hit_many

TWO_PI = 2.0 * np.pi

# (forward, right, up) per cubemap face; right x up == forward
FACES = {
    "+x": ((1, 0, 0), (0, 1, 0), (0, 0, 1)),
    "-x": ((-1, 0, 0), (0, -1, 0), (0, 0, 1)),
    "+y": ((0, 1, 0), (0, 0, 1), (1, 0, 0)),
    "-y": ((0, -1, 0), (0, 0, -1), (1, 0, 0)),
    "+z": ((0, 0, 1), (1, 0, 0), (0, 1, 0)),
    "-z": ((0, 0, -1), (-1, 0, 0), (0, 1, 0)),
}
FACE_ORDER = ("+x", "-x", "+y", "-y", "+z", "-z")
_BASIS = np.array([FACES[f] for f in FACE_ORDER], dtype=float)  # (6, 3, 3)


def cell_directions(n_phi: int, n_theta: int) -> np.ndarray:
    """Unit directions of the cell centres, shape ``(n_phi, n_theta, 3)``."""
    phi = (np.arange(n_phi) + 0.5) * TWO_PI / n_phi
    theta = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    st = np.sin(theta)
    return np.stack(
        [np.outer(np.cos(phi), st), np.outer(np.sin(phi), st),
         np.broadcast_to(np.cos(theta), (n_phi, n_theta))],
        axis=-1,
    )


@dataclass(frozen=True, eq=False)
class DepthSphere:
    """Visible range per direction on an equirectangular grid.

    ``depth[i, j]`` is the range for azimuth cell ``i`` and polar cell ``j``.
    """

    center: np.ndarray
    d_max: float
    depth: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(3)
        d = np.array(self.depth, dtype=float)
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError("depth must be a 2-D (n_phi, n_theta) grid")
        if not (self.d_max > 0):
            raise ValueError("d_max must be positive")
        if np.any(d <= 0) or np.any(d > self.d_max):
            raise ValueError("depth values must lie in (0, d_max]")
        c.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "depth", d)
        object.__setattr__(self, "d_max", float(self.d_max))

    @property
    def n_phi(self) -> int:
        return self.depth.shape[0]

    @property
    def n_theta(self) -> int:
        return self.depth.shape[1]

    @property
    def cell_angle(self) -> float:
        """Largest angular cell size in radians."""
        return max(TWO_PI / self.n_phi, np.pi / self.n_theta)

    def cell_index(self, directions):
        """Nearest-cell indices ``(i, j)`` for (not necessarily unit) directions."""
        d = np.asarray(directions, dtype=float)
        x, y, z = d[..., 0], d[..., 1], d[..., 2]
        phi = np.arctan2(y, x)
        i = np.floor(phi * (self.n_phi / TWO_PI)).astype(np.int64) % self.n_phi
        r = np.sqrt(x * x + y * y + z * z)
        with np.errstate(invalid="ignore", divide="ignore"):
            cz = np.where(r > 0, z / r, 1.0)
        theta = np.arccos(np.clip(cz, -1.0, 1.0))
        j = np.clip(np.floor(theta * (self.n_theta / np.pi)).astype(np.int64), 0, self.n_theta - 1)
        return i, j

    def lookup(self, directions) -> np.ndarray:
        i, j = self.cell_index(directions)
        return self.depth[i, j]

    def clamped(self, d_max: float) -> "DepthSphere":
        return DepthSphere(self.center, d_max, np.minimum(self.depth, d_max))


def sample_depth(ds: DepthSphere, direction) -> float:
    """Nearest-cell depth along a unit direction (azimuth wraps, poles clamp)."""
    d = np.asarray(direction, dtype=float).reshape(3)
    if abs(np.linalg.norm(d) - 1.0) > 1e-6:
        raise ValueError("direction must be unit length")
    return float(ds.lookup(d))


def _check_grid(n_phi: int, n_theta: int, d_max: float):
    if n_phi < 4 or n_theta < 2:
        raise ValueError(f"angular resolution must be n_phi >= 4, n_theta >= 2 (got {n_phi}x{n_theta})")
    if not (d_max > 0):
        raise ValueError("d_max must be positive")


def compute_depth_sphere_raycast(bvh: Bvh | None, center, n_phi: int, n_theta: int,
                                 d_max: float, eps: float, *, impl=None,
                                 workers: int = 1) -> DepthSphere:
    """Cast one ray per cell centre; misses and far hits clamp to ``d_max``."""
    _check_grid(n_phi, n_theta, d_max)
    c = np.asarray(center, dtype=float).reshape(3)
    dirs = cell_directions(n_phi, n_theta).reshape(-1, 3)
    t, _ = first_hit_many(bvh, c, dirs, eps, d_max, impl=impl, workers=workers)
    depth = np.minimum(t, d_max).reshape(n_phi, n_theta)
    return DepthSphere(c, d_max, depth)


# ---------------------------------------------------------------------------
# Cubemap backend
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DepthCubemap:
    """Radial distance per pixel on six 90 degree faces, shape ``(6, res, res)``.

    Face order follows ``FACE_ORDER``; ``faces[k, row, col]`` has view vector
    ``forward + u * right + w * up`` with ``u`` from ``col`` and ``w`` from ``row``.
    """

    center: np.ndarray
    d_max: float
    faces: np.ndarray

    @property
    def face_res(self) -> int:
        return self.faces.shape[1]

    def face(self, name: str) -> np.ndarray:
        return self.faces[FACE_ORDER.index(name)]


class Rasterizer:
    """Software depth renderer over a fixed scene mesh."""

    def __init__(self, mesh: TriangleMesh | None, *, impl=None):
        self.corners = (np.zeros((0, 3, 3)) if mesh is None or mesh.is_empty()
                        else np.ascontiguousarray(mesh.corners()))
        self.impl = impl or kernels.impl

    def render(self, center, face_res: int, d_max: float, near: float) -> np.ndarray:
        """Planar depth per face, ``inf`` where nothing is drawn."""
        c = np.asarray(center, dtype=float).reshape(3)
        rel = self.corners - c
        if len(rel):
            # a triangle whose bounding box lies beyond d_max cannot contribute
            lo = rel.min(axis=1)
            hi = rel.max(axis=1)
            gap = np.maximum(np.maximum(lo, -hi), 0.0)
            rel = rel[np.einsum("ij,ij->i", gap, gap) <= d_max * d_max]
        out = np.empty((6, face_res, face_res))
        for k in range(6):
            fwd, right, up = _BASIS[k]
            view = np.ascontiguousarray(
                np.stack([rel @ right, rel @ up, rel @ fwd], axis=-1))
            if len(view):
                z = view[:, :, 2]
                x = view[:, :, 0]
                y = view[:, :, 1]
                # drop triangles entirely behind the near plane or outside one side of the frustum
                keep = (z.max(axis=1) >= near)
                keep &= ~np.all(x > z, axis=1) & ~np.all(-x > z, axis=1)
                keep &= ~np.all(y > z, axis=1) & ~np.all(-y > z, axis=1)
                view = np.ascontiguousarray(view[keep])
            out[k] = self.impl.rasterize(view, face_res, near)
        return out


def pixel_view_norms(face_res: int) -> np.ndarray:
    """``|v|`` for each pixel's view vector ``(u, w, 1)``, shape ``(res, res)``."""
    c = (np.arange(face_res) + 0.5) * 2.0 / face_res - 1.0
    w, u = np.meshgrid(c, c, indexing="ij")
    return np.sqrt(u * u + w * w + 1.0)


def compute_depth_cubemap(rasterizer: Rasterizer, center, face_res: int, d_max: float,
                          near: float) -> DepthCubemap:
    """Render six faces and convert planar depth to radial distance, clamped to ``d_max``."""
    if face_res < 8:
        raise ValueError(f"face_res must be >= 8 (got {face_res})")
    if not (d_max > 0):
        raise ValueError("d_max must be positive")
    planar = rasterizer.render(center, face_res, d_max, near)
    radial = planar * pixel_view_norms(face_res)[None]
    radial = np.minimum(radial, d_max)
    return DepthCubemap(np.asarray(center, dtype=float).reshape(3), float(d_max), radial)


def cubemap_lookup(cm: DepthCubemap, directions) -> np.ndarray:
    """Nearest-pixel radial distance on the face of each direction's dominant axis."""
    d = np.asarray(directions, dtype=float).reshape(-1, 3)
    axis = np.argmax(np.abs(d), axis=1)
    comp = d[np.arange(len(d)), axis]
    face = 2 * axis + (comp < 0)
    basis = _BASIS[face]
    z = np.einsum("ij,ij->i", d, basis[:, 0])
    u = np.einsum("ij,ij->i", d, basis[:, 1]) / z
    w = np.einsum("ij,ij->i", d, basis[:, 2]) / z
    res = cm.face_res
    col = np.clip(np.floor((u + 1.0) * 0.5 * res).astype(np.int64), 0, res - 1)
    row = np.clip(np.floor((w + 1.0) * 0.5 * res).astype(np.int64), 0, res - 1)
    return cm.faces[face, row, col]


def cubemap_to_sphere(cm: DepthCubemap, n_phi: int, n_theta: int) -> DepthSphere:
    _check_grid(n_phi, n_theta, cm.d_max)
    dirs = cell_directions(n_phi, n_theta).reshape(-1, 3)
    vals = cubemap_lookup(cm, dirs).reshape(n_phi, n_theta)
    tiny = np.nextafter(0.0, 1.0)
    return DepthSphere(cm.center, cm.d_max, np.clip(vals, tiny, cm.d_max))


def compute_depth_sphere_cubemap(rasterizer: Rasterizer, center, n_phi: int, n_theta: int,
                                 d_max: float, face_res: int, near: float) -> DepthSphere:
    cm = compute_depth_cubemap(rasterizer, center, face_res, d_max, near)
    return cubemap_to_sphere(cm, n_phi, n_theta)


# ---------------------------------------------------------------------------
# Debug export
# ---------------------------------------------------------------------------

def save_depth_grid(ds: DepthSphere, path) -> tuple[Path, Path]:
    """Write ``<path>.bin`` (float32 LE, one row per polar cell) and ``<path>.json``."""
    base = Path(path)
    bin_path = base.with_suffix(".bin")
    hdr_path = base.with_suffix(".json")
    bin_path.write_bytes(np.ascontiguousarray(ds.depth.T, dtype="<f4").tobytes())
    header = {
        "center": [float(x) for x in ds.center],
        "d_max": ds.d_max,
        "n_phi": ds.n_phi,
        "n_theta": ds.n_theta,
        "dtype": "float32-le",
        "layout": "row-major, rows = polar cells (theta), columns = azimuth cells (phi)",
    }
    hdr_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return bin_path, hdr_path


def load_depth_grid(path) -> DepthSphere:
    base = Path(path)
    header = json.loads(base.with_suffix(".json").read_text())
    raw = np.frombuffer(base.with_suffix(".bin").read_bytes(), dtype="<f4")
    grid = raw.reshape(header["n_theta"], header["n_phi"]).T.astype(float)
    return DepthSphere(header["center"], header["d_max"], np.minimum(grid, header["d_max"]))
