"""Compare the compiled and numpy kernel backends on the two-building scene.

    python benchmarks/bench_kernels.py [--rays N] [--repeat R]

Both backends run the same workloads; results are checked for exact equality
before timings are printed.
"""

import argparse
import time

import numpy as np

from visvol import fixtures
from visvol.depth import Rasterizer, cell_directions
from visvol.kernels import available
from visvol.raycast import any_hit_many, build_bvh, first_hit_many


def best_of(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rays", type=int, default=160 * 80 * 3)
    ap.add_argument("--face-res", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    mesh = fixtures.two_buildings_scene()
    bvh = build_bvh(mesh)
    rng = np.random.default_rng(0)
    origins = rng.uniform((-20, -20, 0.5), (20, 20, 40), size=(args.rays, 3))
    dirs = rng.normal(size=(args.rays, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    sphere_dirs = cell_directions(160, 80).reshape(-1, 3)
    center = np.array([0.0, 0.0, 1e-3])

    impls = available()
    print(f"scene: {mesh.n_triangles} triangles, {bvh.n_nodes} BVH nodes; backends: {', '.join(impls)}")
    rows, results = [], {}
    for name, impl in impls.items():
        work = {
            "first_hit (random rays)": lambda: first_hit_many(bvh, origins, dirs, 0.0, 50.0, impl=impl),
            "any_hit (random rays)": lambda: any_hit_many(bvh, origins, dirs, 1e-3, 50.0, impl=impl),
            "depth sphere 160x80": lambda: first_hit_many(
                bvh, np.broadcast_to(center, sphere_dirs.shape), sphere_dirs, 1e-3, 50.0, impl=impl),
            f"cubemap {args.face_res}^2 x 6": lambda: Rasterizer(mesh, impl=impl).render(
                center, args.face_res, 50.0, 1e-3),
        }
        for label, fn in work.items():
            dt, out = best_of(fn, args.repeat)
            rows.append((label, name, dt))
            results.setdefault(label, []).append(out)

    for label, outs in results.items():
        ref = outs[0]
        for other in outs[1:]:
            same = all(np.array_equal(a, b) for a, b in zip(ref, other)) if isinstance(ref, tuple) \
                else np.array_equal(ref, other)
            if not same:
                raise SystemExit(f"backend mismatch on {label}")

    print(f"{'workload':<28}{'backend':<10}{'seconds':>10}")
    for label, name, dt in rows:
        print(f"{label:<28}{name:<10}{dt:>10.4f}")
    if len(impls) > 1:
        for label in results:
            t = {n: dt for lab, n, dt in rows if lab == label}
            print(f"speedup {label}: {t['python'] / t['cython']:.1f}x")


if __name__ == "__main__":
    main()
