"""Pure-Python reference kernels.

The compiled extension (_speedups) mirrors these routines operation for
operation; both must produce bit-identical doubles, so keep any edit in
sync and free of reordered arithmetic.
"""

from __future__ import annotations

import math

import numpy as np

_INF = math.inf


def _corners(cx, cy, yaw, length, width):
    c = math.cos(yaw)
    s = math.sin(yaw)
    hl = 0.5 * length
    hw = 0.5 * width
    xs = [0.0] * 4
    ys = [0.0] * 4
    us = (hl, -hl, -hl, hl)
    vs = (hw, hw, -hw, -hw)
    for i in range(4):
        xs[i] = cx + us[i] * c - vs[i] * s
        ys[i] = cy + us[i] * s + vs[i] * c
    return xs, ys, c, s


def _point_seg_dist(px, py, ax, ay, bx, by):
    # sqrt(x*x + y*y) rather than hypot: CPython's hypot is not libm's,
    # and the compiled twin must match bit for bit.
    dx = bx - ax
    dy = by - ay
    den = dx * dx + dy * dy
    if den == 0.0:
        ex = px - ax
        ey = py - ay
        return math.sqrt(ex * ex + ey * ey)
    t = ((px - ax) * dx + (py - ay) * dy) / den
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    ex = px - (ax + t * dx)
    ey = py - (ay + t * dy)
    return math.sqrt(ex * ex + ey * ey)


def _seg_seg_dist(ax, ay, bx, by, cx, cy, dx, dy):
    rx = bx - ax
    ry = by - ay
    sx = dx - cx
    sy = dy - cy
    denom = rx * sy - ry * sx
    if denom != 0.0:
        qpx = cx - ax
        qpy = cy - ay
        t = (qpx * sy - qpy * sx) / denom
        u = (qpx * ry - qpy * rx) / denom
        if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
            return 0.0
    d = _point_seg_dist(ax, ay, cx, cy, dx, dy)
    d2 = _point_seg_dist(bx, by, cx, cy, dx, dy)
    if d2 < d:
        d = d2
    d2 = _point_seg_dist(cx, cy, ax, ay, bx, by)
    if d2 < d:
        d = d2
    d2 = _point_seg_dist(dx, dy, ax, ay, bx, by)
    if d2 < d:
        d = d2
    return d


def rect_clearance(ax, ay, ayaw, alen, awid, bx, by, byaw, blen, bwid):
    """Signed clearance between two oriented rectangles.

    Positive: Euclidean boundary distance. Negative: minimal translation
    depth from the separating-axis overlap test. Touching returns 0.0.
    """
    xs_a, ys_a, ca, sa = _corners(ax, ay, ayaw, alen, awid)
    xs_b, ys_b, cb, sb = _corners(bx, by, byaw, blen, bwid)
    axes = ((ca, sa), (-sa, ca), (cb, sb), (-sb, cb))
    min_overlap = _INF
    separated = False
    for nx, ny in axes:
        min_a = _INF
        max_a = -_INF
        for i in range(4):
            p = xs_a[i] * nx + ys_a[i] * ny
            if p < min_a:
                min_a = p
            if p > max_a:
                max_a = p
        min_b = _INF
        max_b = -_INF
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
    best = _INF
    for i in range(4):
        i2 = (i + 1) % 4
        for j in range(4):
            j2 = (j + 1) % 4
            d = _seg_seg_dist(
                xs_a[i], ys_a[i], xs_a[i2], ys_a[i2],
                xs_b[j], ys_b[j], xs_b[j2], ys_b[j2],
            )
            if d < best:
                best = d
    return best


def clearance_profile(xa, ya, yawa, la, wa, xb, yb, yawb, lb, wb):
    """Per-sample signed clearance between two footprint tracks."""
    n = len(xa)
    out = np.empty(n, dtype=np.float64)
    for k in range(n):
        out[k] = rect_clearance(
            xa[k], ya[k], yawa[k], la, wa, xb[k], yb[k], yawb[k], lb, wb
        )
    return out


def rasterize_rect(cells, ox, oy, cell, cx, cy, yaw, length, width, value):
    """Mark every grid cell whose center lies inside the oriented rectangle."""
    h, w = cells.shape
    xs, ys, c, s = _corners(cx, cy, yaw, length, width)
    minx = min(xs)
    maxx = max(xs)
    miny = min(ys)
    maxy = max(ys)
    i0 = int(math.floor((minx - ox) / cell))
    i1 = int(math.floor((maxx - ox) / cell))
    j0 = int(math.floor((miny - oy) / cell))
    j1 = int(math.floor((maxy - oy) / cell))
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
    for j in range(j0, j1 + 1):
        py = oy + (j + 0.5) * cell
        for i in range(i0, i1 + 1):
            px = ox + (i + 0.5) * cell
            u = (px - cx) * c + (py - cy) * s
            v = -(px - cx) * s + (py - cy) * c
            if abs(u) <= hl and abs(v) <= hw:
                cells[j, i] = value


def raycast_first_hit(cells, ox, oy, cell, x0, y0, x1, y1, ignore):
    """First occupied, non-ignored cell along the segment, else -1.

    Amanatides-Woo traversal; on exact corner ties the y axis steps first.
    """
    h, w = cells.shape
    ix = int(math.floor((x0 - ox) / cell))
    iy = int(math.floor((y0 - oy) / cell))
    ix1 = int(math.floor((x1 - ox) / cell))
    iy1 = int(math.floor((y1 - oy) / cell))
    dx = x1 - x0
    dy = y1 - y0
    step_x = 1 if dx > 0.0 else (-1 if dx < 0.0 else 0)
    step_y = 1 if dy > 0.0 else (-1 if dy < 0.0 else 0)
    if step_x != 0:
        bound = ox + (ix + (1 if step_x > 0 else 0)) * cell
        t_max_x = (bound - x0) / dx
        t_delta_x = cell / abs(dx)
    else:
        t_max_x = _INF
        t_delta_x = _INF
    if step_y != 0:
        bound = oy + (iy + (1 if step_y > 0 else 0)) * cell
        t_max_y = (bound - y0) / dy
        t_delta_y = cell / abs(dy)
    else:
        t_max_y = _INF
        t_delta_y = _INF
    max_steps = abs(ix1 - ix) + abs(iy1 - iy) + 4
    for _ in range(max_steps + 1):
        if 0 <= ix < w and 0 <= iy < h:
            occ = int(cells[iy, ix])
            if occ >= 0:
                hit = True
                for g in ignore:
                    if occ == g:
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


def ray_cells(shape_h, shape_w, ox, oy, cell, x0, y0, x1, y1):
    """In-bounds cell sequence the traversal visits, as an (n, 2) int array."""
    ix = int(math.floor((x0 - ox) / cell))
    iy = int(math.floor((y0 - oy) / cell))
    ix1 = int(math.floor((x1 - ox) / cell))
    iy1 = int(math.floor((y1 - oy) / cell))
    dx = x1 - x0
    dy = y1 - y0
    step_x = 1 if dx > 0.0 else (-1 if dx < 0.0 else 0)
    step_y = 1 if dy > 0.0 else (-1 if dy < 0.0 else 0)
    if step_x != 0:
        bound = ox + (ix + (1 if step_x > 0 else 0)) * cell
        t_max_x = (bound - x0) / dx
        t_delta_x = cell / abs(dx)
    else:
        t_max_x = _INF
        t_delta_x = _INF
    if step_y != 0:
        bound = oy + (iy + (1 if step_y > 0 else 0)) * cell
        t_max_y = (bound - y0) / dy
        t_delta_y = cell / abs(dy)
    else:
        t_max_y = _INF
        t_delta_y = _INF
    out = []
    max_steps = abs(ix1 - ix) + abs(iy1 - iy) + 4
    for _ in range(max_steps + 1):
        if 0 <= ix < shape_w and 0 <= iy < shape_h:
            out.append((ix, iy))
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
    return np.array(out, dtype=np.int64).reshape(-1, 2)
