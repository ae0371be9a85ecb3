import os
import subprocess
import sys

import numpy as np

from visvol import fixtures
from visvol.kernels import available
from visvol.raycast import build_bvh


def backend_under(env_value):
    env = dict(os.environ, VISVOL_PURE_PYTHON=env_value)
    out = subprocess.run([sys.executable, "-c", "import visvol; print(visvol.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_env_forces_fallback():
    assert backend_under("1") == "python"
    expect = "cython" if "cython" in available() else "python"
    assert backend_under("0") == expect


def test_rasterize_backends_identical():
    impls = available()
    mesh = fixtures.two_buildings_scene(ground_cells=12)
    from visvol.depth import Rasterizer
    outs = [Rasterizer(mesh, impl=m).render((1.0, -2.0, 3.0), 48, 60.0, 1e-3) for m in impls.values()]
    for o in outs[1:]:
        assert np.array_equal(o, outs[0])


def test_any_hit_consistent_with_first_hit(impl):
    bvh = build_bvh(fixtures.two_buildings_scene(ground_cells=12))
    rng = np.random.default_rng(0)
    o = rng.uniform((-40, -40, 0.5), (40, 40, 30), size=(3000, 3))
    d = rng.normal(size=(3000, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    t = impl.first_hit(*bvh.arrays(), o, d, np.zeros(3000), np.full(3000, 50.0))[0]
    hit = impl.any_hit(*bvh.arrays(), o, d, np.zeros(3000), np.full(3000, 50.0))
    strictly = (t > 0) & (t < 50.0)
    assert np.array_equal(hit, strictly)
