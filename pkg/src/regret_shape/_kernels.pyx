# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled mesh kernels; see ``_kernels_py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fmin, fmax

cnp.import_array()

BACKEND = "cython"


def triangle_geometry(const double[:, ::1] nodes, const long[:, ::1] tris):
    cdef Py_ssize_t t, a, nt = tris.shape[0]
    cdef double x0, y0, x1, y1, x2, y2, det
    cdef double ex[3]
    cdef double ey[3]
    areas_np = np.empty(nt)
    grads_np = np.empty((nt, 3, 2))
    cdef double[::1] areas = areas_np
    cdef double[:, :, ::1] grads = grads_np
    for t in range(nt):
        x0 = nodes[tris[t, 0], 0]; y0 = nodes[tris[t, 0], 1]
        x1 = nodes[tris[t, 1], 0]; y1 = nodes[tris[t, 1], 1]
        x2 = nodes[tris[t, 2], 0]; y2 = nodes[tris[t, 2], 1]
        det = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        areas[t] = 0.5 * det
        ex[0] = x2 - x1; ey[0] = y2 - y1
        ex[1] = x0 - x2; ey[1] = y0 - y2
        ex[2] = x1 - x0; ey[2] = y1 - y0
        for a in range(3):
            grads[t, a, 0] = -ey[a] / det
            grads[t, a, 1] = ex[a] / det
    return areas_np, grads_np


def stiffness_values(const double[::1] areas, const double[:, :, ::1] grads):
    cdef Py_ssize_t t, a, b, nt = areas.shape[0]
    out_np = np.empty((nt, 3, 3))
    cdef double[:, :, ::1] out = out_np
    for t in range(nt):
        for a in range(3):
            for b in range(3):
                out[t, a, b] = areas[t] * (grads[t, a, 0] * grads[t, b, 0]
                                           + grads[t, a, 1] * grads[t, b, 1])
    return out_np


cdef inline void _bary(const double[:, ::1] nodes, const long[:, ::1] tris, Py_ssize_t t,
                       double px, double py, double* lam) noexcept nogil:
    cdef double x0 = nodes[tris[t, 0], 0], y0 = nodes[tris[t, 0], 1]
    cdef double x1 = nodes[tris[t, 1], 0], y1 = nodes[tris[t, 1], 1]
    cdef double x2 = nodes[tris[t, 2], 0], y2 = nodes[tris[t, 2], 1]
    cdef double det = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
    cdef double dx = px - x0, dy = py - y0
    lam[1] = (dx * (y2 - y0) - dy * (x2 - x0)) / det
    lam[2] = ((x1 - x0) * dy - (y1 - y0) * dx) / det
    lam[0] = 1.0 - lam[1] - lam[2]


def locate_points(const double[:, ::1] nodes, const long[:, ::1] tris, const long[:, ::1] neighbors,
                  const double[:, ::1] points, const long[::1] start, double tol):
    """Walk from ``start[i]`` toward point i across ``neighbors``.

    ``neighbors[t, a]`` is the triangle across the edge opposite local vertex a
    (-1 on the boundary). A walk blocked by the boundary or exceeding the step
    budget falls back to a scan over all triangles.
    """
    cdef Py_ssize_t i, t, s, a, amin, nt = tris.shape[0], npts = points.shape[0]
    cdef Py_ssize_t best_t, max_steps = 4 * nt + 10
    cdef double lam[3]
    cdef double m, best
    cdef bint found
    idx_np = np.full(npts, -1, dtype=np.int64)
    bary_np = np.zeros((npts, 3))
    cdef long[::1] idx = idx_np
    cdef double[:, ::1] bary = bary_np
    for i in range(npts):
        t = start[i]
        found = False
        for s in range(max_steps):
            _bary(nodes, tris, t, points[i, 0], points[i, 1], lam)
            amin = 0
            for a in range(1, 3):
                if lam[a] < lam[amin]:
                    amin = a
            if lam[amin] >= -tol:
                found = True
                break
            if neighbors[t, amin] < 0:
                break
            t = neighbors[t, amin]
        if not found:
            best = -1e300
            best_t = 0
            for t in range(nt):
                _bary(nodes, tris, t, points[i, 0], points[i, 1], lam)
                m = fmin(lam[0], fmin(lam[1], lam[2]))
                if m >= -tol:
                    best_t = t
                    found = True
                    break
                if m > best:
                    best = m
                    best_t = t
            t = best_t
            _bary(nodes, tris, t, points[i, 0], points[i, 1], lam)
        idx[i] = t if found else -1
        bary[i, 0] = lam[0]; bary[i, 1] = lam[1]; bary[i, 2] = lam[2]
    return idx_np, bary_np


def point_polyline_distance(const double[:, ::1] points, const double[:, ::1] poly):
    cdef Py_ssize_t i, j, jn, m = poly.shape[0], npts = points.shape[0]
    cdef double ax, ay, bx, by, px, py, abx, aby, l2, s, dx, dy, d2, best
    out_np = np.empty(npts)
    cdef double[::1] out = out_np
    for i in range(npts):
        px = points[i, 0]; py = points[i, 1]
        best = 1e300
        for j in range(m):
            jn = j + 1 if j + 1 < m else 0
            ax = poly[j, 0]; ay = poly[j, 1]
            bx = poly[jn, 0]; by = poly[jn, 1]
            abx = bx - ax; aby = by - ay
            l2 = abx * abx + aby * aby
            if l2 <= 0:
                l2 = 1.0
            s = ((px - ax) * abx + (py - ay) * aby) / l2
            s = fmin(1.0, fmax(0.0, s))
            dx = px - ax - s * abx; dy = py - ay - s * aby
            d2 = dx * dx + dy * dy
            if d2 < best:
                best = d2
        out[i] = sqrt(best)
    return out_np


cdef inline double _orient(double ax, double ay, double bx, double by,
                           double cx, double cy) noexcept nogil:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def polyline_self_intersects(const double[:, ::1] poly):
    cdef Py_ssize_t i, j, inx, jn, m = poly.shape[0]
    cdef double o1, o2, o3, o4
    if m < 4:
        return False
    for i in range(m):
        inx = i + 1 if i + 1 < m else 0
        for j in range(i + 2, m):
            if i == 0 and j == m - 1:
                continue
            jn = j + 1 if j + 1 < m else 0
            if fmin(poly[j, 0], poly[jn, 0]) > fmax(poly[i, 0], poly[inx, 0]):
                continue
            if fmax(poly[j, 0], poly[jn, 0]) < fmin(poly[i, 0], poly[inx, 0]):
                continue
            if fmin(poly[j, 1], poly[jn, 1]) > fmax(poly[i, 1], poly[inx, 1]):
                continue
            if fmax(poly[j, 1], poly[jn, 1]) < fmin(poly[i, 1], poly[inx, 1]):
                continue
            o1 = _orient(poly[i, 0], poly[i, 1], poly[inx, 0], poly[inx, 1], poly[j, 0], poly[j, 1])
            o2 = _orient(poly[i, 0], poly[i, 1], poly[inx, 0], poly[inx, 1], poly[jn, 0], poly[jn, 1])
            o3 = _orient(poly[j, 0], poly[j, 1], poly[jn, 0], poly[jn, 1], poly[i, 0], poly[i, 1])
            o4 = _orient(poly[j, 0], poly[j, 1], poly[jn, 0], poly[jn, 1], poly[inx, 0], poly[inx, 1])
            if o1 * o2 <= 0 and o3 * o4 <= 0:
                return True
    return False
