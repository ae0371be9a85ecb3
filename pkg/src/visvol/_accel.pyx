# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ray traversal and depth rasterization kernels.

Call-compatible with ``_kernels_py``; the arithmetic is kept in the same
order so both backends return identical values.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, floor, ceil, INFINITY, NAN, isnan

cnp.import_array()

NAME = "cython"

cdef enum:
    STACK = 256


cdef struct RaySetup:
    int kx, ky, kz
    double sx, sy, sz
    double ix, iy, iz


cdef inline void _setup(double dx, double dy, double dz, RaySetup* s) noexcept nogil:
    cdef double d[3]
    cdef double ad[3]
    cdef int kz, kx, ky, tmp
    d[0] = dx
    d[1] = dy
    d[2] = dz
    ad[0] = fabs(dx)
    ad[1] = fabs(dy)
    ad[2] = fabs(dz)
    kz = 0
    if ad[1] > ad[kz]:
        kz = 1
    if ad[2] > ad[kz]:
        kz = 2
    kx = (kz + 1) % 3
    ky = (kx + 1) % 3
    if d[kz] < 0.0:
        tmp = kx
        kx = ky
        ky = tmp
    s.kx = kx
    s.ky = ky
    s.kz = kz
    s.sx = d[kx] / d[kz]
    s.sy = d[ky] / d[kz]
    s.sz = 1.0 / d[kz]
    s.ix = 1.0 / dx if dx != 0.0 else 1e300
    s.iy = 1.0 / dy if dy != 0.0 else 1e300
    s.iz = 1.0 / dz if dz != 0.0 else 1e300


cdef inline double _intersect(const double* o, RaySetup* s,
                              const double* a0, const double* a1, const double* a2) noexcept nogil:
    cdef double A[3]
    cdef double B[3]
    cdef double C[3]
    cdef int k
    for k in range(3):
        A[k] = a0[k] - o[k]
        B[k] = a1[k] - o[k]
        C[k] = a2[k] - o[k]
    cdef double Az = A[s.kz]
    cdef double Bz = B[s.kz]
    cdef double Cz = C[s.kz]
    cdef double Ax = A[s.kx] - s.sx * Az
    cdef double Ay = A[s.ky] - s.sy * Az
    cdef double Bx = B[s.kx] - s.sx * Bz
    cdef double By = B[s.ky] - s.sy * Bz
    cdef double Cx = C[s.kx] - s.sx * Cz
    cdef double Cy = C[s.ky] - s.sy * Cz
    cdef double U = Cx * By - Cy * Bx
    cdef double V = Ax * Cy - Ay * Cx
    cdef double W = Bx * Ay - By * Ax
    if (U < 0.0 or V < 0.0 or W < 0.0) and (U > 0.0 or V > 0.0 or W > 0.0):
        return NAN
    cdef double det = U + V + W
    if det == 0.0:
        return NAN
    cdef double T = U * (s.sz * Az) + V * (s.sz * Bz) + W * (s.sz * Cz)
    return T / det


cdef inline bint _slab(const double* bmin, const double* bmax, const double* o, RaySetup* s,
                       double tmin, double tlim) noexcept nogil:
    cdef double t1, t2, tn, tf, lo, hi
    t1 = (bmin[0] - o[0]) * s.ix
    t2 = (bmax[0] - o[0]) * s.ix
    tn = t1 if t1 < t2 else t2
    tf = t2 if t1 < t2 else t1
    t1 = (bmin[1] - o[1]) * s.iy
    t2 = (bmax[1] - o[1]) * s.iy
    lo = t1 if t1 < t2 else t2
    hi = t2 if t1 < t2 else t1
    if lo > tn:
        tn = lo
    if hi < tf:
        tf = hi
    t1 = (bmin[2] - o[2]) * s.iz
    t2 = (bmax[2] - o[2]) * s.iz
    lo = t1 if t1 < t2 else t2
    hi = t2 if t1 < t2 else t1
    if lo > tn:
        tn = lo
    if hi < tf:
        tf = hi
    return tn <= tf and tf >= tmin and tn <= tlim


cdef void _trace(const double[:, ::1] node_min, const double[:, ::1] node_max,
                 const long long[::1] left, const long long[::1] right,
                 const long long[::1] start, const long long[::1] count,
                 const double[:, ::1] v0, const double[:, ::1] v1, const double[:, ::1] v2,
                 const long long[::1] tri_index,
                 const double[:, ::1] origins, const double[:, ::1] dirs,
                 const double[::1] tmin, const double[::1] tmax,
                 bint any_hit, double[::1] out_t, long long[::1] out_tri,
                 Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    cdef long long stack[STACK]
    cdef Py_ssize_t r, sp, j
    cdef long long nd, tri, orig, best_tri
    cdef double t, best_t, t0, t1
    cdef RaySetup s
    cdef bint hit
    if node_min.shape[0] == 0:
        for r in range(lo, hi):
            out_t[r] = INFINITY
            out_tri[r] = -1
        return
    for r in range(lo, hi):
        _setup(dirs[r, 0], dirs[r, 1], dirs[r, 2], &s)
        t0 = tmin[r]
        t1 = tmax[r]
        best_t = t1
        best_tri = -1
        hit = False
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            nd = stack[sp]
            if not _slab(&node_min[nd, 0], &node_max[nd, 0], &origins[r, 0], &s, t0, best_t):
                continue
            if count[nd] > 0:
                for j in range(count[nd]):
                    tri = start[nd] + j
                    t = _intersect(&origins[r, 0], &s, &v0[tri, 0], &v1[tri, 0], &v2[tri, 0])
                    if isnan(t):
                        continue
                    if any_hit:
                        if t > t0 and t < t1:
                            hit = True
                            break
                        continue
                    if t >= t0 and t <= best_t:
                        orig = tri_index[tri]
                        if best_tri < 0 or t < best_t or orig < best_tri:
                            best_t = t
                            best_tri = orig
                if hit:
                    break
            else:
                if sp + 2 > STACK:
                    continue
                stack[sp] = right[nd]
                stack[sp + 1] = left[nd]
                sp += 2
        if any_hit:
            out_tri[r] = 1 if hit else 0
        elif best_tri < 0:
            out_t[r] = INFINITY
            out_tri[r] = -1
        else:
            out_t[r] = best_t
            out_tri[r] = best_tri


def first_hit(node_min, node_max, left, right, start, count, v0, v1, v2, tri_index,
              origins, dirs, tmin, tmax):
    cdef Py_ssize_t n = origins.shape[0]
    out_t = np.empty(n, dtype=np.float64)
    out_tri = np.empty(n, dtype=np.int64)
    _run(node_min, node_max, left, right, start, count, v0, v1, v2, tri_index,
         origins, dirs, tmin, tmax, False, out_t, out_tri)
    return out_t, out_tri


def any_hit(node_min, node_max, left, right, start, count, v0, v1, v2, tri_index,
            origins, dirs, tmin, tmax):
    cdef Py_ssize_t n = origins.shape[0]
    out_t = np.empty(n, dtype=np.float64)
    out_tri = np.zeros(n, dtype=np.int64)
    _run(node_min, node_max, left, right, start, count, v0, v1, v2, tri_index,
         origins, dirs, tmin, tmax, True, out_t, out_tri)
    return out_tri.astype(bool)


cdef _run(const double[:, ::1] node_min, const double[:, ::1] node_max,
          const long long[::1] left, const long long[::1] right,
          const long long[::1] start, const long long[::1] count,
          const double[:, ::1] v0, const double[:, ::1] v1, const double[:, ::1] v2,
          const long long[::1] tri_index,
          const double[:, ::1] origins, const double[:, ::1] dirs,
          const double[::1] tmin, const double[::1] tmax,
          bint any_hit, double[::1] out_t, long long[::1] out_tri):
    cdef Py_ssize_t n = origins.shape[0]
    with nogil:
        _trace(node_min, node_max, left, right, start, count, v0, v1, v2, tri_index,
               origins, dirs, tmin, tmax, any_hit, out_t, out_tri, 0, n)


# ---------------------------------------------------------------------------
# Rasterizer
# ---------------------------------------------------------------------------

cdef inline int _clip_near(const double* tri, double near, double* out) noexcept nogil:
    cdef int i, k, n = 0
    cdef const double* a
    cdef const double* b
    cdef bint ina, inb
    cdef double s
    for i in range(3):
        a = tri + 3 * i
        b = tri + 3 * ((i + 1) % 3)
        ina = a[2] >= near
        inb = b[2] >= near
        if ina:
            out[3 * n] = a[0]
            out[3 * n + 1] = a[1]
            out[3 * n + 2] = a[2]
            n += 1
        if ina != inb:
            s = (near - a[2]) / (b[2] - a[2])
            for k in range(2):
                out[3 * n + k] = a[k] + s * (b[k] - a[k])
            out[3 * n + 2] = near
            n += 1
    return n


cdef void _raster_tri(double[:, ::1] inv_z, int res,
                      double x0, double y0, double z0,
                      double x1, double y1, double z1,
                      double x2, double y2, double z2) noexcept nogil:
    cdef double area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    if area == 0.0:
        return
    cdef double mnx = x0, mxx = x0, mny = y0, mxy = y0
    if x1 < mnx: mnx = x1
    if x2 < mnx: mnx = x2
    if x1 > mxx: mxx = x1
    if x2 > mxx: mxx = x2
    if y1 < mny: mny = y1
    if y2 < mny: mny = y2
    if y1 > mxy: mxy = y1
    if y2 > mxy: mxy = y2
    cdef int c0 = <int>floor(mnx - 0.5)
    cdef int c1 = <int>ceil(mxx - 0.5)
    cdef int r0 = <int>floor(mny - 0.5)
    cdef int r1 = <int>ceil(mxy - 0.5)
    if c0 < 0: c0 = 0
    if r0 < 0: r0 = 0
    if c1 > res - 1: c1 = res - 1
    if r1 > res - 1: r1 = res - 1
    cdef int row, col
    cdef double px, py, w0, w1, w2, iz
    for row in range(r0, r1 + 1):
        py = row + 0.5
        for col in range(c0, c1 + 1):
            px = col + 0.5
            w0 = ((x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)) / area
            w1 = ((x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)) / area
            w2 = ((x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)) / area
            if w0 >= 0.0 and w1 >= 0.0 and w2 >= 0.0:
                iz = w0 * z0 + w1 * z1 + w2 * z2
                if iz > inv_z[row, col]:
                    inv_z[row, col] = iz


def rasterize(tris_view, int res, double near):
    cdef const double[:, :, ::1] tv = np.ascontiguousarray(tris_view, dtype=np.float64)
    inv = np.zeros((res, res), dtype=np.float64)
    cdef double[:, ::1] inv_z = inv
    cdef double poly[12]
    cdef double sx[4]
    cdef double sy[4]
    cdef double iz[4]
    cdef Py_ssize_t m = tv.shape[0], i
    cdef int n, k
    cdef double scale = 0.5 * res
    with nogil:
        for i in range(m):
            if tv[i, 0, 2] < near and tv[i, 1, 2] < near and tv[i, 2, 2] < near:
                continue
            n = _clip_near(&tv[i, 0, 0], near, poly)
            if n < 3:
                continue
            for k in range(n):
                sx[k] = (poly[3 * k] / poly[3 * k + 2] + 1.0) * scale
                sy[k] = (poly[3 * k + 1] / poly[3 * k + 2] + 1.0) * scale
                iz[k] = 1.0 / poly[3 * k + 2]
            for k in range(1, n - 1):
                _raster_tri(inv_z, res, sx[0], sy[0], iz[0], sx[k], sy[k], iz[k],
                            sx[k + 1], sy[k + 1], iz[k + 1])
    with np.errstate(divide="ignore"):
        return 1.0 / inv
