"""Mission configuration: YAML schema, validation and defaults."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .poly_vis import VolumeSettings

SCHEMA_VERSION = 1

# inclusive bounds for resolution-like settings
N_PHI_RANGE = (8, 4096)
N_THETA_RANGE = (4, 2048)
EXTRACTION_RANGE = (8, 512)
FACE_RES_RANGE = (8, 4096)
SPLIT_DEPTH_RANGE = (0, 16)

_KEYS = {
    "schema_version", "scene_path", "polygon", "d_max", "n_phi", "n_theta",
    "extraction_resolution", "nav_constraints", "backend", "face_res", "validate",
    "seed", "output_dir", "max_split_depth", "samples_per_edge", "validation_samples",
    "workers", "dump_depth",
}
_REQUIRED = ("polygon", "d_max")


class ConfigError(ValueError):
    """Invalid mission configuration; the message starts with the offending key path."""


@dataclass(frozen=True)
class BoxConstraint:
    min: tuple
    max: tuple


@dataclass(frozen=True)
class MissionConfig:
    polygon: tuple
    d_max: float
    scene_path: Path | None = None
    n_phi: int = 160
    n_theta: int = 80
    extraction_resolution: tuple = (96, 96, 96)
    nav_box: BoxConstraint | None = None
    nav_altitude: tuple | None = None
    backend: str = "raycast"
    face_res: int = 256
    validate: bool = False
    seed: int = 0
    output_dir: Path = Path("out")
    max_split_depth: int = 6
    samples_per_edge: int = 16
    validation_samples: int = 10000
    workers: int = 1
    dump_depth: bool = False
    source: Path | None = None

    def volume_settings(self) -> VolumeSettings:
        return VolumeSettings(
            d_max=self.d_max,
            n_phi=self.n_phi,
            n_theta=self.n_theta,
            extraction_resolution=tuple(self.extraction_resolution),
            backend=self.backend,
            face_res=self.face_res,
            max_split_depth=self.max_split_depth,
            workers=self.workers,
        )

    def to_dict(self) -> dict:
        """Resolved configuration as plain JSON-compatible data."""
        nav = {}
        if self.nav_box is not None:
            nav["box"] = {"min": list(self.nav_box.min), "max": list(self.nav_box.max)}
        if self.nav_altitude is not None:
            nav["altitude_band"] = list(self.nav_altitude)
        return {
            "schema_version": SCHEMA_VERSION,
            "scene_path": str(self.scene_path) if self.scene_path else None,
            "polygon": [list(p) for p in self.polygon],
            "d_max": self.d_max,
            "n_phi": self.n_phi,
            "n_theta": self.n_theta,
            "extraction_resolution": list(self.extraction_resolution),
            "nav_constraints": nav,
            "backend": self.backend,
            "face_res": self.face_res,
            "validate": self.validate,
            "seed": self.seed,
            "max_split_depth": self.max_split_depth,
            "samples_per_edge": self.samples_per_edge,
            "validation_samples": self.validation_samples,
        }


class _UniqueKeyLoader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node, deep=False):
    seen = set()
    for key_node, _ in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in seen:
            raise ConfigError(f"{key}: duplicate key (line {key_node.start_mark.line + 1})")
        seen.add(key)
    return loader.construct_mapping(node, deep)


_UniqueKeyLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _number(path, x, positive=False) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {type(x).__name__}")
    if not np.isfinite(x):
        raise ConfigError(f"{path}: must be finite")
    if positive and x <= 0:
        raise ConfigError(f"{path}: must be > 0 (got {x})")
    return float(x)


def _integer(path, x, bounds=None) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ConfigError(f"{path}: expected an integer, got {type(x).__name__}")
    if bounds and not bounds[0] <= x <= bounds[1]:
        raise ConfigError(f"{path}: must be in [{bounds[0]}, {bounds[1]}] (got {x})")
    return x


def _boolean(path, x) -> bool:
    if not isinstance(x, bool):
        raise ConfigError(f"{path}: expected true or false, got {type(x).__name__}")
    return x


def _point(path, x) -> tuple:
    if not isinstance(x, (list, tuple)) or len(x) != 3:
        raise ConfigError(f"{path}: expected a list of 3 numbers")
    return tuple(_number(f"{path}[{k}]", c) for k, c in enumerate(x))


def polygon_from_obj(path) -> list[tuple]:
    """Read the ``v`` records of a vertices-only OBJ polyline as polygon vertices, in file order."""
    pts = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            parts = raw.split("#", 1)[0].split()
            if parts and parts[0] == "v":
                try:
                    pts.append(tuple(float(c) for c in parts[1:4]))
                except ValueError:
                    raise ConfigError(f"polygon: {path}:{lineno}: bad vertex record") from None
                if len(pts[-1]) != 3:
                    raise ConfigError(f"polygon: {path}:{lineno}: vertex needs 3 coordinates")
    return pts


def _polygon(raw, base: Path) -> tuple:
    if isinstance(raw, dict):
        unknown = set(raw) - {"obj"}
        if unknown or "obj" not in raw:
            raise ConfigError("polygon: expected a vertex list or {obj: <path>}")
        obj = base / str(raw["obj"])
        if not obj.is_file():
            raise ConfigError(f"polygon.obj: file not found: {obj}")
        pts = polygon_from_obj(obj)
    elif isinstance(raw, list):
        pts = [_point(f"polygon[{k}]", p) for k, p in enumerate(raw)]
    else:
        raise ConfigError("polygon: expected a vertex list or {obj: <path>}")
    if len(pts) < 3:
        raise ConfigError(f"polygon: needs at least 3 vertices (got {len(pts)})")
    return tuple(pts)


def _nav(raw):
    if raw is None:
        return None, None
    if not isinstance(raw, dict):
        raise ConfigError("nav_constraints: expected a mapping")
    unknown = set(raw) - {"box", "altitude_band"}
    if unknown:
        raise ConfigError(f"nav_constraints.{sorted(unknown)[0]}: unknown key")
    box = band = None
    if raw.get("box") is not None:
        b = raw["box"]
        if not isinstance(b, dict) or set(b) != {"min", "max"}:
            raise ConfigError("nav_constraints.box: expected {min: [x,y,z], max: [x,y,z]}")
        lo = _point("nav_constraints.box.min", b["min"])
        hi = _point("nav_constraints.box.max", b["max"])
        if any(l >= h for l, h in zip(lo, hi)):
            raise ConfigError("nav_constraints.box: min must be < max on every axis")
        box = BoxConstraint(lo, hi)
    if raw.get("altitude_band") is not None:
        a = raw["altitude_band"]
        if isinstance(a, dict):
            if set(a) != {"z_lo", "z_hi"}:
                raise ConfigError("nav_constraints.altitude_band: expected keys z_lo and z_hi")
            lo, hi = a["z_lo"], a["z_hi"]
        elif isinstance(a, list) and len(a) == 2:
            lo, hi = a
        else:
            raise ConfigError("nav_constraints.altitude_band: expected [z_lo, z_hi] or {z_lo, z_hi}")
        lo = _number("nav_constraints.altitude_band.z_lo", lo)
        hi = _number("nav_constraints.altitude_band.z_hi", hi)
        if lo >= hi:
            raise ConfigError(f"nav_constraints.altitude_band: z_lo must be < z_hi (got {lo}, {hi})")
        band = (lo, hi)
    return box, band


def config_from_dict(raw, base_dir=".", source=None) -> MissionConfig:
    """Validate a parsed YAML document; relative paths resolve against ``base_dir``."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>: expected a mapping")
    base = Path(base_dir)
    unknown = sorted(set(raw) - _KEYS, key=str)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key")
    for key in _REQUIRED:
        if key not in raw:
            raise ConfigError(f"{key}: missing required key")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: unsupported version {version!r} (expected {SCHEMA_VERSION})")

    kw = {"source": Path(source) if source else None}
    kw["polygon"] = _polygon(raw["polygon"], base)
    kw["d_max"] = _number("d_max", raw["d_max"], positive=True)
    scene = raw.get("scene_path")
    if scene is not None:
        if not isinstance(scene, str):
            raise ConfigError("scene_path: expected a string or null")
        kw["scene_path"] = base / scene
    if "n_phi" in raw:
        kw["n_phi"] = _integer("n_phi", raw["n_phi"], N_PHI_RANGE)
    if "n_theta" in raw:
        kw["n_theta"] = _integer("n_theta", raw["n_theta"], N_THETA_RANGE)
    if "extraction_resolution" in raw:
        r = raw["extraction_resolution"]
        if isinstance(r, int) and not isinstance(r, bool):
            r = [r, r, r]
        if not isinstance(r, list) or len(r) != 3:
            raise ConfigError("extraction_resolution: expected an integer or a list of 3 integers")
        kw["extraction_resolution"] = tuple(
            _integer(f"extraction_resolution[{k}]", n, EXTRACTION_RANGE) for k, n in enumerate(r))
    kw["nav_box"], kw["nav_altitude"] = _nav(raw.get("nav_constraints"))
    if "backend" in raw:
        if raw["backend"] not in ("raycast", "cubemap"):
            raise ConfigError(f"backend: expected 'raycast' or 'cubemap' (got {raw['backend']!r})")
        kw["backend"] = raw["backend"]
    if "face_res" in raw:
        kw["face_res"] = _integer("face_res", raw["face_res"], FACE_RES_RANGE)
    if "validate" in raw:
        kw["validate"] = _boolean("validate", raw["validate"])
    if "dump_depth" in raw:
        kw["dump_depth"] = _boolean("dump_depth", raw["dump_depth"])
    if "seed" in raw:
        kw["seed"] = _integer("seed", raw["seed"], (0, 2 ** 63 - 1))
    if "max_split_depth" in raw:
        kw["max_split_depth"] = _integer("max_split_depth", raw["max_split_depth"], SPLIT_DEPTH_RANGE)
    if "samples_per_edge" in raw:
        kw["samples_per_edge"] = _integer("samples_per_edge", raw["samples_per_edge"], (1, 4096))
    if "validation_samples" in raw:
        kw["validation_samples"] = _integer("validation_samples", raw["validation_samples"], (1, 10 ** 7))
    if "workers" in raw:
        kw["workers"] = _integer("workers", raw["workers"], (1, 256))
    if raw.get("output_dir") is not None:
        if not isinstance(raw["output_dir"], str):
            raise ConfigError("output_dir: expected a string")
        kw["output_dir"] = base / raw["output_dir"]
    else:
        kw["output_dir"] = base / "out"
    return MissionConfig(**kw)


def parse_config(path) -> MissionConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"<file>: config not found: {path}")
    try:
        raw = yaml.load(path.read_text(encoding="utf-8"), Loader=_UniqueKeyLoader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"<yaml>: {path}: {exc}") from None
    return config_from_dict(raw, path.parent, source=path)
