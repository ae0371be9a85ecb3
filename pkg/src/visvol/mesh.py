"""Indexed triangle meshes: construction, OBJ/PLY IO and topology metrics."""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc

log = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-12


class MeshError(ValueError):
    """Raised for invalid meshes and unreadable mesh files."""


@dataclass(frozen=True)
class Aabb:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min, dtype=float).reshape(3)
        hi = np.asarray(self.max, dtype=float).reshape(3)
        if np.any(lo > hi):
            raise MeshError(f"inverted bounds: min {lo.tolist()} > max {hi.tolist()}")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def extent(self) -> np.ndarray:
        return self.max - self.min

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.extent))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min + self.max)

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return np.all((p >= self.min) & (p <= self.max), axis=-1)

    def union(self, other: "Aabb") -> "Aabb":
        return Aabb(np.minimum(self.min, other.min), np.maximum(self.max, other.max))

    def expanded(self, margin: float) -> "Aabb":
        return Aabb(self.min - margin, self.max + margin)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Vertices ``(n, 3)`` float64 and counter-clockwise triangles ``(m, 3)`` int64.

    Arrays are made read-only on construction.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle index out of range")
        if t.size and np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
            raise MeshError("triangle repeats a vertex index")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @classmethod
    def empty(cls) -> "TriangleMesh":
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def is_empty(self) -> bool:
        return self.n_triangles == 0

    def corners(self) -> np.ndarray:
        """Triangle corner coordinates, shape ``(m, 3, 3)``."""
        return self.vertices[self.triangles]

    def areas(self) -> np.ndarray:
        c = self.corners()
        return 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)

    def volume(self) -> float:
        """Signed enclosed volume by the divergence theorem (positive when outward)."""
        if self.is_empty():
            return 0.0
        c = self.corners()
        return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)

    def edge_keys(self) -> np.ndarray:
        """Undirected edge of every triangle side as ``lo * n_vertices + hi``, shape ``(3F,)``."""
        if "edge_keys" not in self._cache:
            he = _sorted_half_edges(self.triangles)
            self._cache["edge_keys"] = he[:, 0] * self.n_vertices + he[:, 1]
        return self._cache["edge_keys"]

    def edges(self) -> np.ndarray:
        """Unique undirected edges, sorted, shape ``(E, 2)``."""
        if "edges" not in self._cache:
            u = np.unique(self.edge_keys())
            self._cache["edges"] = np.stack([u // self.n_vertices, u % self.n_vertices], axis=1)
        return self._cache["edges"]

    def merged(self, other: "TriangleMesh") -> "TriangleMesh":
        return TriangleMesh(
            np.vstack([self.vertices, other.vertices]),
            np.vstack([self.triangles, other.triangles + self.n_vertices]),
        )

    def transformed(self, rotation=None, translation=None) -> "TriangleMesh":
        v = self.vertices
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=float).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=float)
        return TriangleMesh(v, self.triangles)


def _sorted_half_edges(triangles: np.ndarray) -> np.ndarray:
    he = triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    return np.sort(he, axis=1)


def drop_degenerate(mesh: TriangleMesh, tol: float = DEGENERATE_AREA) -> tuple[TriangleMesh, int]:
    """Remove triangles with area <= ``tol``; returns the mesh and the drop count."""
    if mesh.is_empty():
        return mesh, 0
    keep = mesh.areas() > tol
    dropped = int((~keep).sum())
    if dropped:
        mesh = TriangleMesh(mesh.vertices, mesh.triangles[keep])
    return mesh, dropped


# ---------------------------------------------------------------------------
# IO
# ---------------------------------------------------------------------------

def load_mesh(path) -> TriangleMesh:
    """Load an OBJ or binary little-endian PLY file.

    Polygonal faces are fan-triangulated and zero-area triangles are dropped
    with a warning.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"mesh file not found: {path}")
    suffix = path.suffix.lower()
    if suffix == ".ply":
        verts, faces = _read_ply(path)
    else:
        verts, faces = _read_obj(path)
    mesh = TriangleMesh(verts, faces)
    mesh, dropped = drop_degenerate(mesh)
    if dropped:
        log.warning("%s: dropped %d degenerate triangle(s)", path, dropped)
    if mesh.is_empty():
        raise MeshError(f"{path}: mesh has no triangles")
    return mesh


def _read_obj(path: Path):
    verts: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            tag = parts[0]
            try:
                if tag == "v":
                    if len(parts) < 4:
                        raise ValueError("vertex needs 3 coordinates")
                    verts.append((float(parts[1]), float(parts[2]), float(parts[3])))
                elif tag == "f":
                    idx = [_obj_index(tok, len(verts)) for tok in parts[1:]]
                    if len(idx) < 3:
                        raise ValueError("face needs at least 3 vertices")
                    for k in range(1, len(idx) - 1):
                        faces.append((idx[0], idx[k], idx[k + 1]))
            except ValueError as exc:
                raise MeshError(f"{path}:{lineno}: {exc}") from None
    return (np.array(verts, dtype=float).reshape(-1, 3),
            np.array(faces, dtype=np.int64).reshape(-1, 3))


def _obj_index(token: str, n_verts: int) -> int:
    i = int(token.split("/", 1)[0])
    if i <= 0:
        raise ValueError(f"unsupported vertex index {i} (only positive 1-based indices)")
    if i > n_verts:
        raise ValueError(f"vertex index {i} refers past the {n_verts} vertices read so far")
    return i - 1


_PLY_TYPES = {
    "char": "b", "int8": "b", "uchar": "B", "uint8": "B",
    "short": "h", "int16": "h", "ushort": "H", "uint16": "H",
    "int": "i", "int32": "i", "uint": "I", "uint32": "I",
    "float": "f", "float32": "f", "double": "d", "float64": "d",
}


def _read_ply(path: Path):
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"ply":
            raise MeshError(f"{path}:1: not a PLY file")
        elements = []
        fmt = None
        lineno = 1
        while True:
            raw = fh.readline()
            lineno += 1
            if not raw:
                raise MeshError(f"{path}:{lineno}: unterminated header")
            parts = raw.decode("ascii", "replace").split()
            if not parts or parts[0] in ("comment", "obj_info"):
                continue
            if parts[0] == "format":
                fmt = parts[1]
            elif parts[0] == "element":
                elements.append((parts[1], int(parts[2]), []))
            elif parts[0] == "property":
                elements[-1][2].append(parts[1:])
            elif parts[0] == "end_header":
                break
        if fmt != "binary_little_endian":
            raise MeshError(f"{path}: only binary_little_endian PLY is supported (got {fmt})")
        verts = np.zeros((0, 3))
        faces: list[tuple[int, int, int]] = []
        for name, count, props in elements:
            if name == "vertex":
                dtype = np.dtype([(p[1], "<" + _PLY_TYPES[p[0]]) for p in props])
                data = np.frombuffer(fh.read(dtype.itemsize * count), dtype=dtype, count=count)
                verts = np.stack([data["x"], data["y"], data["z"]], axis=1).astype(float)
            elif name == "face":
                (_, cnt_t, idx_t, _) = props[0]
                cnt_fmt, idx_fmt = "<" + _PLY_TYPES[cnt_t], "<" + _PLY_TYPES[idx_t]
                csize, isize = struct.calcsize(cnt_fmt), struct.calcsize(idx_fmt)
                for _ in range(count):
                    (n,) = struct.unpack(cnt_fmt, fh.read(csize))
                    idx = struct.unpack("<" + idx_fmt[1] * n, fh.read(isize * n))
                    for k in range(1, n - 1):
                        faces.append((idx[0], idx[k], idx[k + 1]))
            else:
                raise MeshError(f"{path}: unsupported PLY element {name!r}")
    return verts, np.array(faces, dtype=np.int64).reshape(-1, 3)


def save_mesh(mesh: TriangleMesh, path) -> None:
    """Write ``mesh`` as ASCII OBJ (``.obj``) or binary PLY (``.ply``)."""
    if mesh.is_empty():
        raise MeshError("refusing to save a mesh with no triangles")
    path = Path(path)
    if path.suffix.lower() == ".ply":
        _write_ply(mesh, path)
        return
    lines = ["# visvol mesh"]
    lines += ["v %.9g %.9g %.9g" % tuple(v) for v in mesh.vertices]
    lines += ["f %d %d %d" % tuple(t) for t in (mesh.triangles + 1)]
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def _write_ply(mesh: TriangleMesh, path: Path) -> None:
    header = (
        "ply\nformat binary_little_endian 1.0\n"
        f"element vertex {mesh.n_vertices}\n"
        "property double x\nproperty double y\nproperty double z\n"
        f"element face {mesh.n_triangles}\n"
        "property list uchar int vertex_indices\nend_header\n"
    )
    faces = np.zeros(mesh.n_triangles, dtype=[("n", "u1"), ("idx", "<i4", 3)])
    faces["n"] = 3
    faces["idx"] = mesh.triangles
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(mesh.vertices.astype("<f8").tobytes())
        fh.write(faces.tobytes())


# ---------------------------------------------------------------------------
# Topology
# ---------------------------------------------------------------------------

def euler_characteristic(mesh: TriangleMesh) -> tuple[int, int, int, int]:
    """Return ``(chi, V, E, F)`` with ``chi = V - E + F``.

    ``V`` counts vertices referenced by at least one triangle, so unused
    vertices do not inflate the result.
    """
    if mesh.is_empty():
        return 0, 0, 0, 0
    v = int(np.unique(mesh.triangles).size)
    e = len(mesh.edges())
    f = mesh.n_triangles
    return v - e + f, v, e, f


def genus(mesh: TriangleMesh) -> float:
    """Genus of a closed connected orientable surface, ``(2 - chi) / 2``."""
    chi = euler_characteristic(mesh)[0]
    return (2 - chi) / 2


def connected_components(mesh: TriangleMesh) -> int:
    """Number of face-connected components (faces joined through shared edges)."""
    n = mesh.n_triangles
    if n == 0:
        return 0
    keys = mesh.edge_keys()
    face = np.repeat(np.arange(n), 3)
    order = np.argsort(keys, kind="stable")
    keys_s, face_s = keys[order], face[order]
    same = keys_s[1:] == keys_s[:-1]
    a, b = face_s[:-1][same], face_s[1:][same]
    graph = coo_matrix((np.ones(len(a), dtype=np.int8), (a, b)), shape=(n, n))
    count, _ = _cc(graph, directed=False)
    return int(count)


def check_watertight(mesh: TriangleMesh) -> bool:
    """True iff every edge bounds exactly two faces traversing it in opposite directions."""
    if mesh.is_empty():
        return False
    t = mesh.triangles
    directed = t[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    n = mesh.n_vertices
    fwd = directed[:, 0] * n + directed[:, 1]
    rev = directed[:, 1] * n + directed[:, 0]
    fwd_sorted = np.sort(fwd)
    if np.any(fwd_sorted[1:] == fwd_sorted[:-1]):
        return False
    pos = np.searchsorted(fwd_sorted, rev)
    pos = np.minimum(pos, len(fwd_sorted) - 1)
    return bool(np.all(fwd_sorted[pos] == rev))


def non_manifold_edge_count(mesh: TriangleMesh) -> int:
    """Edges not shared by exactly two faces."""
    if mesh.is_empty():
        return 0
    _, counts = np.unique(mesh.edge_keys(), return_counts=True)
    return int((counts != 2).sum())


def compute_aabb(mesh: TriangleMesh) -> Aabb:
    if mesh.n_vertices == 0:
        raise MeshError("cannot bound an empty mesh")
    return Aabb(mesh.vertices.min(axis=0), mesh.vertices.max(axis=0))
