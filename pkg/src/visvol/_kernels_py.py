"""Pure numpy implementation of the hot kernels.

Mirrors ``_accel.pyx`` call for call. Rays are traversed as a wavefront:
every iteration tests the whole frontier of ``(ray, node)`` pairs at once.
The arithmetic follows the compiled kernels operation for operation so both
produce identical results.
"""

import numpy as np

NAME = "python"


def _ray_setup(dirs):
    a = np.abs(dirs)
    kz = np.argmax(a, axis=1)
    kx = (kz + 1) % 3
    ky = (kx + 1) % 3
    rows = np.arange(len(dirs))
    dz = dirs[rows, kz]
    neg = dz < 0.0
    kx2 = np.where(neg, ky, kx)
    ky2 = np.where(neg, kx, ky)
    sx = dirs[rows, kx2] / dz
    sy = dirs[rows, ky2] / dz
    sz = 1.0 / dz
    inv = np.empty_like(dirs)
    nz = dirs != 0.0
    inv[nz] = 1.0 / dirs[nz]
    inv[~nz] = 1e300
    return kx2, ky2, kz, sx, sy, sz, inv


def _intersect(o, kx, ky, kz, sx, sy, sz, a0, a1, a2):
    """Watertight ray/triangle test; returns ``t`` (nan on miss)."""
    rows = np.arange(len(o))
    A = a0 - o
    B = a1 - o
    C = a2 - o
    Az, Bz, Cz = A[rows, kz], B[rows, kz], C[rows, kz]
    Ax = A[rows, kx] - sx * Az
    Ay = A[rows, ky] - sy * Az
    Bx = B[rows, kx] - sx * Bz
    By = B[rows, ky] - sy * Bz
    Cx = C[rows, kx] - sx * Cz
    Cy = C[rows, ky] - sy * Cz
    U = Cx * By - Cy * Bx
    V = Ax * Cy - Ay * Cx
    W = Bx * Ay - By * Ax
    miss = ((U < 0.0) | (V < 0.0) | (W < 0.0)) & ((U > 0.0) | (V > 0.0) | (W > 0.0))
    det = U + V + W
    miss |= det == 0.0
    T = U * (sz * Az) + V * (sz * Bz) + W * (sz * Cz)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = T / det
    t[miss] = np.nan
    return t


def _slab(bmin, bmax, o, inv):
    t1 = (bmin - o) * inv
    t2 = (bmax - o) * inv
    tn = np.minimum(t1, t2).max(axis=1)
    tf = np.maximum(t1, t2).min(axis=1)
    return tn, tf


def _traverse(nodes, tris, origins, dirs, tmin, tmax, any_hit):
    node_min, node_max, left, right, start, count = nodes
    v0, v1, v2, tri_index = tris
    n = len(origins)
    kx, ky, kz, sx, sy, sz, inv = _ray_setup(dirs)
    best_t = np.array(tmax, dtype=float, copy=True)
    best_tri = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=bool)

    ray = np.arange(n, dtype=np.int64)
    node = np.zeros(n, dtype=np.int64)
    if len(left) == 0:
        ray = ray[:0]
        node = node[:0]
    while ray.size:
        if any_hit:
            live = ~done[ray]
            ray, node = ray[live], node[live]
        tn, tf = _slab(node_min[node], node_max[node], origins[ray], inv[ray])
        keep = (tn <= tf) & (tf >= tmin[ray]) & (tn <= best_t[ray])
        ray, node = ray[keep], node[keep]
        leaf = count[node] > 0
        lr, ln = ray[leaf], node[leaf]
        for k in range(int(count[ln].max()) if ln.size else 0):
            sel = count[ln] > k
            r = lr[sel]
            if not r.size:
                continue
            tri = start[ln[sel]] + k
            t = _intersect(origins[r], kx[r], ky[r], kz[r], sx[r], sy[r], sz[r],
                           v0[tri], v1[tri], v2[tri])
            if any_hit:
                ok = (t > tmin[r]) & (t < tmax[r])
                done[r[ok]] = True
                continue
            ok = (t >= tmin[r]) & (t <= best_t[r])
            r, t, orig = r[ok], t[ok], tri_index[tri[ok]]
            if not r.size:
                continue
            order = np.lexsort((orig, t, r))
            r, t, orig = r[order], t[order], orig[order]
            first = np.ones(len(r), dtype=bool)
            first[1:] = r[1:] != r[:-1]
            r, t, orig = r[first], t[first], orig[first]
            cur_t, cur_tri = best_t[r], best_tri[r]
            better = (cur_tri < 0) | (t < cur_t) | ((t == cur_t) & (orig < cur_tri))
            best_t[r[better]] = t[better]
            best_tri[r[better]] = orig[better]
        inner = ~leaf
        ir, inn = ray[inner], node[inner]
        ray = np.concatenate([ir, ir])
        node = np.concatenate([left[inn], right[inn]])
    if any_hit:
        return done
    best_t[best_tri < 0] = np.inf
    return best_t, best_tri


def first_hit(node_min, node_max, left, right, start, count, v0, v1, v2, tri_index,
              origins, dirs, tmin, tmax):
    nodes = (node_min, node_max, left, right, start, count)
    tris = (v0, v1, v2, tri_index)
    return _traverse(nodes, tris, origins, dirs, tmin, tmax, any_hit=False)


def any_hit(node_min, node_max, left, right, start, count, v0, v1, v2, tri_index,
            origins, dirs, tmin, tmax):
    nodes = (node_min, node_max, left, right, start, count)
    tris = (v0, v1, v2, tri_index)
    return _traverse(nodes, tris, origins, dirs, tmin, tmax, any_hit=True)


def _clip_near(tri, near):
    """Clip a view-space triangle against ``z >= near`` (Sutherland-Hodgman)."""
    out = []
    for i in range(3):
        a = tri[i]
        b = tri[(i + 1) % 3]
        ina = a[2] >= near
        inb = b[2] >= near
        if ina:
            out.append(a)
        if ina != inb:
            s = (near - a[2]) / (b[2] - a[2])
            p = a + s * (b - a)
            p[2] = near
            out.append(p)
    return out


def rasterize(tris_view, res, near):
    """Planar depth buffer of view-space triangles on a 90 degree frustum.

    Pixel ``(row, col)`` has centre ``u = (col + 0.5) * 2 / res - 1`` and
    ``w = (row + 0.5) * 2 / res - 1``; a view-space point ``(x, y, z)``
    projects to ``(x / z, y / z)``. Reciprocal depth is interpolated
    linearly in screen space. Uncovered pixels hold ``inf``.
    """
    inv_z = np.zeros((res, res))
    scale = 0.5 * res
    for tri in tris_view:
        if tri[:, 2].max() < near:
            continue
        poly = _clip_near(np.array(tri, dtype=float), near)
        if len(poly) < 3:
            continue
        sx = [(p[0] / p[2] + 1.0) * scale for p in poly]
        sy = [(p[1] / p[2] + 1.0) * scale for p in poly]
        iz = [1.0 / p[2] for p in poly]
        for k in range(1, len(poly) - 1):
            _raster_tri(inv_z, res,
                        sx[0], sy[0], iz[0], sx[k], sy[k], iz[k], sx[k + 1], sy[k + 1], iz[k + 1])
    with np.errstate(divide="ignore"):
        z = 1.0 / inv_z
    return z


def _raster_tri(inv_z, res, x0, y0, z0, x1, y1, z1, x2, y2, z2):
    area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    if area == 0.0:
        return
    c0 = max(int(np.floor(min(x0, x1, x2) - 0.5)), 0)
    c1 = min(int(np.ceil(max(x0, x1, x2) - 0.5)), res - 1)
    r0 = max(int(np.floor(min(y0, y1, y2) - 0.5)), 0)
    r1 = min(int(np.ceil(max(y0, y1, y2) - 0.5)), res - 1)
    if c0 > c1 or r0 > r1:
        return
    px = np.arange(c0, c1 + 1) + 0.5
    py = (np.arange(r0, r1 + 1) + 0.5)[:, None]
    w0 = ((x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)) / area
    w1 = ((x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)) / area
    w2 = ((x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)) / area
    inside = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0)
    iz = w0 * z0 + w1 * z1 + w2 * z2
    block = inv_z[r0:r1 + 1, c0:c1 + 1]
    upd = inside & (iz > block)
    block[upd] = iz[upd]
