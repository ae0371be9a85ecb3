"""End-to-end run: scene, per-vertex spheres, polygon volume, constraints, outputs."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import replace
from pathlib import Path

from . import kernels
from .config import MissionConfig
from .depth import save_depth_grid
from .mesh import Aabb, TriangleMesh, check_watertight, euler_characteristic, load_mesh, save_mesh
from .poly_vis import apply_nav_constraints, compute_visibility_volume, validate_polygon
from .raycast import build_bvh
from .regions import altitude_band, box_region
from .vis_sphere import tessellate_visibility_sphere

log = logging.getLogger(__name__)

REPORT_NAME = "report.json"


def _mesh_summary(mesh: TriangleMesh) -> dict:
    chi, v, e, f = euler_characteristic(mesh)
    return {"vertices": v, "edges": e, "faces": f, "chi": chi,
            "watertight": bool(check_watertight(mesh)) if f else True}


def load_scene(cfg: MissionConfig):
    """BVH over the configured scene, or ``None`` for an empty scene."""
    if cfg.scene_path is None:
        return None
    return build_bvh(load_mesh(cfg.scene_path))


def nav_regions(cfg: MissionConfig) -> list:
    out = []
    if cfg.nav_box is not None:
        out.append(box_region(Aabb(cfg.nav_box.min, cfg.nav_box.max)))
    if cfg.nav_altitude is not None:
        out.append(altitude_band(*cfg.nav_altitude))
    return out


def run_pipeline(cfg: MissionConfig, output_dir=None) -> dict:
    """Compute everything the config asks for and write it to ``output_dir``.

    Returns the report dictionary that was written to ``report.json``.
    """
    from .oracle import agreement_report  # only needed when validating

    out = Path(output_dir) if output_dir is not None else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    t0 = time.perf_counter()

    polygon = validate_polygon(cfg.polygon)
    bvh = load_scene(cfg)
    timings["scene"] = time.perf_counter() - t0

    result = compute_visibility_volume(polygon, bvh, cfg.volume_settings())
    run = result.report.to_dict()
    timings["volume"] = run.pop("timings")

    manifest = []

    def write_mesh(name, mesh, kind):
        path = out / name
        save_mesh(mesh, path)
        manifest.append({"path": name, "kind": kind})
        return path

    t1 = time.perf_counter()
    spheres = []
    for k, v in enumerate(polygon.vertices):
        ds = result.spheres(tuple(v.tolist())).sphere
        mesh = tessellate_visibility_sphere(ds)
        write_mesh(f"sphere_{k}.obj", mesh, "visibility_sphere")
        spheres.append({"vertex": k, "center": v.tolist(), "mesh": _mesh_summary(mesh)})
        if cfg.dump_depth:
            for p in save_depth_grid(ds, out / f"depth_{k}"):
                manifest.append({"path": p.name, "kind": "depth_grid"})

    warnings = list(run.pop("warnings"))
    if result.mesh.is_empty():
        manifest.append({"path": None, "kind": "visibility_volume", "empty": True})
    else:
        write_mesh("volume.obj", result.mesh, "visibility_volume")

    report = {
        "schema_version": 1,
        "kernel_backend": kernels.BACKEND,
        "config": cfg.to_dict(),
        "polygon": {"vertices": polygon.vertices.tolist(), "normal": polygon.normal.tolist()},
        "run": run,
        "spheres": spheres,
        "volume": _mesh_summary(result.mesh),
    }

    constraints = nav_regions(cfg)
    if constraints:
        _, nav_mesh, empty = apply_nav_constraints(result.region, constraints, result.grid)
        report["navigable"] = {"empty": empty, "mesh": _mesh_summary(nav_mesh)}
        if empty:
            warnings.append("navigable visibility volume is empty")
            log.warning("navigable visibility volume is empty")
            manifest.append({"path": None, "kind": "navigable_volume", "empty": True})
        else:
            write_mesh("navigable.obj", nav_mesh, "navigable_volume")
    timings["outputs"] = time.perf_counter() - t1

    if cfg.validate:
        t1 = time.perf_counter()
        report["validation"] = agreement_report(
            result.region, bvh, polygon, cfg.d_max, result.grid, result.mesh,
            n_samples=cfg.validation_samples, seed=cfg.seed,
            samples_per_edge=cfg.samples_per_edge, eps=result.report.eps, workers=cfg.workers)
        timings["validation"] = time.perf_counter() - t1

    manifest.append({"path": REPORT_NAME, "kind": "report"})
    report["warnings"] = warnings
    report["manifest"] = manifest
    timings["total"] = time.perf_counter() - t0
    report["timings"] = timings
    (out / REPORT_NAME).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def run_sphere(cfg: MissionConfig, vertex_index: int, output_dir=None) -> Path:
    """Compute and write a single vertex's visibility sphere mesh."""
    from .poly_vis import SphereSource, scene_eps

    polygon = validate_polygon(cfg.polygon)
    n = len(polygon.vertices)
    if not 0 <= vertex_index < n:
        raise IndexError(f"vertex index {vertex_index} out of range for a {n}-vertex polygon")
    bvh = load_scene(cfg)
    settings = cfg.volume_settings()
    src = SphereSource(bvh, settings, scene_eps(bvh, polygon.vertices, cfg.d_max))
    ds = src.compute(tuple(polygon.vertices[vertex_index].tolist()))
    out = Path(output_dir) if output_dir is not None else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"sphere_{vertex_index}.obj"
    save_mesh(tessellate_visibility_sphere(ds), path)
    if cfg.dump_depth:
        save_depth_grid(ds, out / f"depth_{vertex_index}")
    return path


def with_overrides(cfg: MissionConfig, **kw) -> MissionConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})


def summarize_report(report: dict) -> str:
    """Human-readable summary of a ``report.json`` document."""
    lines = []
    cfg = report.get("config", {})
    lines.append(f"d_max {cfg.get('d_max')} m, angular {cfg.get('n_phi')}x{cfg.get('n_theta')}, "
                 f"grid {cfg.get('extraction_resolution')}, backend {cfg.get('backend')}")
    run = report.get("run", {})
    cache = run.get("sphere_cache", {})
    lines.append(f"spheres computed: {cache.get('computed')}, cache hits: {cache.get('hits')}, "
                 f"splits: {run.get('splits')}")
    for e in run.get("edges", []):
        state = "split" if e["split"] else ("unresolved" if e.get("unresolved") else "accepted")
        lines.append(f"  edge {e['edge']} depth {e['depth']}: chi={e['chi']} components={e['components']} {state}")
    vol = report.get("volume", {})
    lines.append(f"volume mesh: V={vol.get('vertices')} F={vol.get('faces')} chi={vol.get('chi')} "
                 f"watertight={vol.get('watertight')}")
    if "navigable" in report:
        nav = report["navigable"]
        lines.append("navigable volume: " + ("EMPTY" if nav["empty"] else f"F={nav['mesh']['faces']}"))
    if "validation" in report:
        val = report["validation"]
        lines.append(f"oracle agreement: {val['agreement']:.4f} overall, {val['agreement_far']:.4f} "
                     f"away from the boundary ({val['n_far']} of {val['n_samples']} samples)")
    for w in report.get("warnings", []):
        lines.append(f"warning: {w}")
    t = report.get("timings", {})
    if "total" in t:
        lines.append(f"total time {t['total']:.2f} s")
    return "\n".join(lines)
