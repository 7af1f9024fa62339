# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: a bit-exact transliteration of _fallback.py.

Built with -ffp-contract=off so double arithmetic matches CPython exactly;
keep expression order identical to the fallback when editing either side.
"""

from libc.math cimport cos, sin, sqrt, floor, fabs, INFINITY

import numpy as np


cdef inline void _corners_c(double cx, double cy, double yaw,
                            double length, double width,
                            double* xs, double* ys,
                            double* c_out, double* s_out) noexcept nogil:
    cdef double c = cos(yaw)
    cdef double s = sin(yaw)
    cdef double hl = 0.5 * length
    cdef double hw = 0.5 * width
    cdef double us[4]
    cdef double vs[4]
    cdef int i
    us[0] = hl; us[1] = -hl; us[2] = -hl; us[3] = hl
    vs[0] = hw; vs[1] = hw; vs[2] = -hw; vs[3] = -hw
    for i in range(4):
        xs[i] = cx + us[i] * c - vs[i] * s
        ys[i] = cy + us[i] * s + vs[i] * c
    c_out[0] = c
    s_out[0] = s


cdef inline double _point_seg_dist_c(double px, double py, double ax, double ay,
                                     double bx, double by) noexcept nogil:
    cdef double dx = bx - ax
    cdef double dy = by - ay
    cdef double den = dx * dx + dy * dy
    cdef double t, ex, ey
    if den == 0.0:
        ex = px - ax
        ey = py - ay
        return sqrt(ex * ex + ey * ey)
    t = ((px - ax) * dx + (py - ay) * dy) / den
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    ex = px - (ax + t * dx)
    ey = py - (ay + t * dy)
    return sqrt(ex * ex + ey * ey)


cdef inline double _seg_seg_dist_c(double ax, double ay, double bx, double by,
                                   double cx, double cy, double dx, double dy) noexcept nogil:
    cdef double rx = bx - ax
    cdef double ry = by - ay
    cdef double sx = dx - cx
    cdef double sy = dy - cy
    cdef double denom = rx * sy - ry * sx
    cdef double qpx, qpy, t, u, d, d2
    if denom != 0.0:
        qpx = cx - ax
        qpy = cy - ay
        t = (qpx * sy - qpy * sx) / denom
        u = (qpx * ry - qpy * rx) / denom
        if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
            return 0.0
    d = _point_seg_dist_c(ax, ay, cx, cy, dx, dy)
    d2 = _point_seg_dist_c(bx, by, cx, cy, dx, dy)
    if d2 < d:
        d = d2
    d2 = _point_seg_dist_c(cx, cy, ax, ay, bx, by)
    if d2 < d:
        d = d2
    d2 = _point_seg_dist_c(dx, dy, ax, ay, bx, by)
    if d2 < d:
        d = d2
    return d


cdef double _rect_clearance_c(double ax, double ay, double ayaw, double alen, double awid,
                              double bx, double by, double byaw, double blen, double bwid) noexcept nogil:
    cdef double xs_a[4]
    cdef double ys_a[4]
    cdef double xs_b[4]
    cdef double ys_b[4]
    cdef double ca, sa, cb, sb
    cdef double axes_x[4]
    cdef double axes_y[4]
    cdef double min_overlap = INFINITY
    cdef bint separated = False
    cdef double nx, ny, min_a, max_a, min_b, max_b, p, gap, g2, overlap
    cdef double best, d
    cdef int k, i, j, i2, j2
    _corners_c(ax, ay, ayaw, alen, awid, xs_a, ys_a, &ca, &sa)
    _corners_c(bx, by, byaw, blen, bwid, xs_b, ys_b, &cb, &sb)
    axes_x[0] = ca; axes_y[0] = sa
    axes_x[1] = -sa; axes_y[1] = ca
    axes_x[2] = cb; axes_y[2] = sb
    axes_x[3] = -sb; axes_y[3] = cb
    for k in range(4):
        nx = axes_x[k]
        ny = axes_y[k]
        min_a = INFINITY
        max_a = -INFINITY
        for i in range(4):
            p = xs_a[i] * nx + ys_a[i] * ny
            if p < min_a:
                min_a = p
            if p > max_a:
                max_a = p
        min_b = INFINITY
        max_b = -INFINITY
        for i in range(4):
            p = xs_b[i] * nx + ys_b[i] * ny
            if p < min_b:
                min_b = p
            if p > max_b:
                max_b = p
        gap = min_b - max_a
        g2 = min_a - max_b
        if g2 > gap:
            gap = g2
        if gap > 0.0:
            separated = True
            break
        overlap = -gap
        if overlap < min_overlap:
            min_overlap = overlap
    if not separated:
        if min_overlap == 0.0:
            return 0.0
        return -min_overlap
    best = INFINITY
    for i in range(4):
        i2 = (i + 1) % 4
        for j in range(4):
            j2 = (j + 1) % 4
            d = _seg_seg_dist_c(
                xs_a[i], ys_a[i], xs_a[i2], ys_a[i2],
                xs_b[j], ys_b[j], xs_b[j2], ys_b[j2],
            )
            if d < best:
                best = d
    return best


def rect_clearance(double ax, double ay, double ayaw, double alen, double awid,
                   double bx, double by, double byaw, double blen, double bwid):
    """Signed clearance between two oriented rectangles (see _fallback)."""
    return _rect_clearance_c(ax, ay, ayaw, alen, awid, bx, by, byaw, blen, bwid)


def clearance_profile(double[::1] xa, double[::1] ya, double[::1] yawa,
                      double la, double wa,
                      double[::1] xb, double[::1] yb, double[::1] yawb,
                      double lb, double wb):
    """Per-sample signed clearance between two footprint tracks."""
    cdef Py_ssize_t n = xa.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t k
    with nogil:
        for k in range(n):
            o[k] = _rect_clearance_c(xa[k], ya[k], yawa[k], la, wa,
                                     xb[k], yb[k], yawb[k], lb, wb)
    return out


def rasterize_rect(int[:, ::1] cells, double ox, double oy, double cell,
                   double cx, double cy, double yaw,
                   double length, double width, int value):
    """Mark every grid cell whose center lies inside the oriented rectangle."""
    cdef Py_ssize_t h = cells.shape[0]
    cdef Py_ssize_t w = cells.shape[1]
    cdef double xs[4]
    cdef double ys[4]
    cdef double c, s
    cdef double minx, maxx, miny, maxy
    cdef Py_ssize_t i0, i1, j0, j1, i, j
    cdef double hl, hw, px, py, u, v
    cdef int k
    _corners_c(cx, cy, yaw, length, width, xs, ys, &c, &s)
    minx = xs[0]; maxx = xs[0]; miny = ys[0]; maxy = ys[0]
    for k in range(1, 4):
        if xs[k] < minx:
            minx = xs[k]
        if xs[k] > maxx:
            maxx = xs[k]
        if ys[k] < miny:
            miny = ys[k]
        if ys[k] > maxy:
            maxy = ys[k]
    i0 = <Py_ssize_t>floor((minx - ox) / cell)
    i1 = <Py_ssize_t>floor((maxx - ox) / cell)
    j0 = <Py_ssize_t>floor((miny - oy) / cell)
    j1 = <Py_ssize_t>floor((maxy - oy) / cell)
    if i0 < 0:
        i0 = 0
    if j0 < 0:
        j0 = 0
    if i1 > w - 1:
        i1 = w - 1
    if j1 > h - 1:
        j1 = h - 1
    hl = 0.5 * length
    hw = 0.5 * width
    with nogil:
        for j in range(j0, j1 + 1):
            py = oy + (j + 0.5) * cell
            for i in range(i0, i1 + 1):
                px = ox + (i + 0.5) * cell
                u = (px - cx) * c + (py - cy) * s
                v = -(px - cx) * s + (py - cy) * c
                if fabs(u) <= hl and fabs(v) <= hw:
                    cells[j, i] = value


cdef int _raycast_c(int[:, ::1] cells, double ox, double oy, double cell,
                    double x0, double y0, double x1, double y1,
                    long[::1] ignore) noexcept nogil:
    cdef Py_ssize_t h = cells.shape[0]
    cdef Py_ssize_t w = cells.shape[1]
    cdef Py_ssize_t n_ignore = ignore.shape[0]
    cdef long ix = <long>floor((x0 - ox) / cell)
    cdef long iy = <long>floor((y0 - oy) / cell)
    cdef long ix1 = <long>floor((x1 - ox) / cell)
    cdef long iy1 = <long>floor((y1 - oy) / cell)
    cdef double dx = x1 - x0
    cdef double dy = y1 - y0
    cdef long step_x = 1 if dx > 0.0 else (-1 if dx < 0.0 else 0)
    cdef long step_y = 1 if dy > 0.0 else (-1 if dy < 0.0 else 0)
    cdef double t_max_x, t_delta_x, t_max_y, t_delta_y, bound
    cdef long max_steps, it
    cdef int occ
    cdef bint hit
    cdef Py_ssize_t g
    if step_x != 0:
        bound = ox + (ix + (1 if step_x > 0 else 0)) * cell
        t_max_x = (bound - x0) / dx
        t_delta_x = cell / fabs(dx)
    else:
        t_max_x = INFINITY
        t_delta_x = INFINITY
    if step_y != 0:
        bound = oy + (iy + (1 if step_y > 0 else 0)) * cell
        t_max_y = (bound - y0) / dy
        t_delta_y = cell / fabs(dy)
    else:
        t_max_y = INFINITY
        t_delta_y = INFINITY
    max_steps = (ix1 - ix if ix1 >= ix else ix - ix1) + (iy1 - iy if iy1 >= iy else iy - iy1) + 4
    for it in range(max_steps + 1):
        if 0 <= ix < w and 0 <= iy < h:
            occ = cells[iy, ix]
            if occ >= 0:
                hit = True
                for g in range(n_ignore):
                    if occ == ignore[g]:
                        hit = False
                        break
                if hit:
                    return occ
        else:
            return -1
        if ix == ix1 and iy == iy1:
            return -1
        if t_max_x < t_max_y:
            ix += step_x
            t_max_x += t_delta_x
        else:
            iy += step_y
            t_max_y += t_delta_y
    return -1


def raycast_first_hit(int[:, ::1] cells, double ox, double oy, double cell,
                      double x0, double y0, double x1, double y1,
                      long[::1] ignore):
    """First occupied, non-ignored cell along the segment, else -1."""
    return _raycast_c(cells, ox, oy, cell, x0, y0, x1, y1, ignore)


def ray_cells(Py_ssize_t shape_h, Py_ssize_t shape_w, double ox, double oy, double cell,
              double x0, double y0, double x1, double y1):
    """In-bounds cell sequence the traversal visits, as an (n, 2) int array."""
    cdef long ix = <long>floor((x0 - ox) / cell)
    cdef long iy = <long>floor((y0 - oy) / cell)
    cdef long ix1 = <long>floor((x1 - ox) / cell)
    cdef long iy1 = <long>floor((y1 - oy) / cell)
    cdef double dx = x1 - x0
    cdef double dy = y1 - y0
    cdef long step_x = 1 if dx > 0.0 else (-1 if dx < 0.0 else 0)
    cdef long step_y = 1 if dy > 0.0 else (-1 if dy < 0.0 else 0)
    cdef double t_max_x, t_delta_x, t_max_y, t_delta_y, bound
    cdef long max_steps, it, count
    if step_x != 0:
        bound = ox + (ix + (1 if step_x > 0 else 0)) * cell
        t_max_x = (bound - x0) / dx
        t_delta_x = cell / fabs(dx)
    else:
        t_max_x = INFINITY
        t_delta_x = INFINITY
    if step_y != 0:
        bound = oy + (iy + (1 if step_y > 0 else 0)) * cell
        t_max_y = (bound - y0) / dy
        t_delta_y = cell / fabs(dy)
    else:
        t_max_y = INFINITY
        t_delta_y = INFINITY
    max_steps = (ix1 - ix if ix1 >= ix else ix - ix1) + (iy1 - iy if iy1 >= iy else iy - iy1) + 4
    out = np.empty((max_steps + 1, 2), dtype=np.int64)
    cdef long[:, ::1] o = out
    count = 0
    for it in range(max_steps + 1):
        if 0 <= ix < shape_w and 0 <= iy < shape_h:
            o[count, 0] = ix
            o[count, 1] = iy
            count += 1
        else:
            break
        if ix == ix1 and iy == iy1:
            break
        if t_max_x < t_max_y:
            ix += step_x
            t_max_x += t_delta_x
        else:
            iy += step_y
            t_max_y += t_delta_y
    return out[:count]
