"""Visibility volumes of convex planar polygons in triangle-mesh scenes."""

from .config import ConfigError, MissionConfig, parse_config
from .depth import DepthSphere, compute_depth_sphere_cubemap, compute_depth_sphere_raycast
from .kernels import BACKEND
from .mesh import Aabb, MeshError, TriangleMesh, check_watertight, euler_characteristic, load_mesh, save_mesh
from .oracle import agreement_report, point_sees_polygon
from .poly_vis import (
    PolygonError,
    PolygonTarget,
    VolumeSettings,
    apply_nav_constraints,
    compute_visibility_volume,
    validate_polygon,
)
from .raycast import Bvh, Ray, build_bvh, first_hit, segment_occluded
from .regions import ExtractionGrid, default_grid, extract_surface, intersect_regions, region_topology
from .vis_sphere import tessellate_visibility_sphere

__version__ = "0.1.0"

__all__ = [
    "Aabb", "BACKEND", "Bvh", "ConfigError", "DepthSphere", "ExtractionGrid", "MeshError",
    "MissionConfig", "PolygonError", "PolygonTarget", "Ray", "TriangleMesh", "VolumeSettings",
    "agreement_report", "apply_nav_constraints", "build_bvh", "check_watertight",
    "compute_depth_sphere_cubemap", "compute_depth_sphere_raycast", "compute_visibility_volume",
    "default_grid", "euler_characteristic", "extract_surface", "first_hit", "intersect_regions",
    "load_mesh", "parse_config", "point_sees_polygon", "region_topology", "save_mesh",
    "segment_occluded", "tessellate_visibility_sphere", "validate_polygon",
]
