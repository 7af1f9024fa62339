"""Planar geometry helpers: angles, polylines with arclength parametrization,
polygon tests, and body-frame velocity transforms shared across the package."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = math.remainder(theta, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


def rect_corners(cx: float, cy: float, yaw: float, length: float, width: float):
    """Counterclockwise corners of an oriented rectangle centered at (cx, cy).

    Longitudinal axis points along yaw; corner order starts front-left.
    """
    c, s = math.cos(yaw), math.sin(yaw)
    hl, hw = 0.5 * length, 0.5 * width
    # front-left, rear-left, rear-right, rear... order chosen CCW for yaw frame
    pts = [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)]
    return [(cx + u * c - v * s, cy + u * s + v * c) for u, v in pts]


def body_to_world_velocity(vx: float, vy: float, yaw: float) -> tuple[float, float]:
    """Body frame (vx lateral-left, vy longitudinal) to world frame."""
    c, s = math.cos(yaw), math.sin(yaw)
    return (vy * c - vx * s, vy * s + vx * c)


def world_to_body_velocity(wx: float, wy: float, yaw: float) -> tuple[float, float]:
    c, s = math.cos(yaw), math.sin(yaw)
    # lateral = component along (-s, c), longitudinal = component along (c, s)
    return (-wx * s + wy * c, wx * c + wy * s)


def point_in_polygon(x: float, y: float, polygon) -> bool:
    """Even-odd rule; points on an edge count as inside for our tolerance needs."""
    inside = False
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xc:
                inside = not inside
            elif x == xc:
                return True
    return inside


def segment_intersection(p1, p2, q1, q2):
    """Intersection point of segments p1-p2 and q1-q2, or None.

    Collinear overlaps return None (merging lanes touch rather than cross).
    """
    rx, ry = p2[0] - p1[0], p2[1] - p1[1]
    sx, sy = q2[0] - q1[0], q2[1] - q1[1]
    denom = rx * sy - ry * sx
    if denom == 0.0:
        return None
    qpx, qpy = q1[0] - p1[0], q1[1] - p1[1]
    t = (qpx * sy - qpy * sx) / denom
    u = (qpx * ry - qpy * rx) / denom
    if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
        return (p1[0] + t * rx, p1[1] + t * ry, t, u)
    return None


def segment_point_distance(px, py, ax, ay, bx, by) -> float:
    """Distance from point (px,py) to segment a-b."""
    dx, dy = bx - ax, by - ay
    den = dx * dx + dy * dy
    if den == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / den
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


@dataclass
class ArcPath:
    """Polyline with cumulative arclength lookup.

    Supports point/heading queries at an arclength, projection of a point
    onto the path, and transversal crossings with another path.
    """

    points: np.ndarray  # (n, 2) float64
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
            raise ValueError("path needs at least two 2-D points")
        self.points = pts
        seg = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
        if np.any(seg <= 0.0):
            raise ValueError("path vertices must strictly advance")
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    @property
    def max_vertex_spacing(self) -> float:
        return float(np.max(np.diff(self._cum)))

    def _locate(self, s: float) -> tuple[int, float]:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self._cum, s, side="right")) - 1
        i = min(max(i, 0), len(self._cum) - 2)
        seg_len = self._cum[i + 1] - self._cum[i]
        t = (s - self._cum[i]) / seg_len
        return i, t

    def point_at(self, s: float) -> tuple[float, float]:
        i, t = self._locate(s)
        p, q = self.points[i], self.points[i + 1]
        return (float(p[0] + t * (q[0] - p[0])), float(p[1] + t * (q[1] - p[1])))

    def heading_at(self, s: float) -> float:
        i, _ = self._locate(s)
        p, q = self.points[i], self.points[i + 1]
        return math.atan2(float(q[1] - p[1]), float(q[0] - p[0]))

    def project(self, x: float, y: float) -> tuple[float, float]:
        """Arclength and unsigned distance of the closest path point."""
        best_s, best_d = 0.0, math.inf
        for i in range(len(self.points) - 1):
            ax, ay = self.points[i]
            bx, by = self.points[i + 1]
            dx, dy = bx - ax, by - ay
            den = dx * dx + dy * dy
            t = ((x - ax) * dx + (y - ay) * dy) / den
            t = min(1.0, max(0.0, t))
            d = math.hypot(x - (ax + t * dx), y - (ay + t * dy))
            if d < best_d:
                best_d = d
                best_s = float(self._cum[i] + t * math.sqrt(den))
        return best_s, best_d

    def lateral_offset(self, x: float, y: float) -> tuple[float, float]:
        """Arclength plus signed lateral offset (positive left of the path)."""
        s, _ = self.project(x, y)
        px, py = self.point_at(s)
        h = self.heading_at(s)
        # left normal is (-sin h, cos h)
        d = -(x - px) * math.sin(h) + (y - py) * math.cos(h)
        return s, d

    def crossings(self, other: "ArcPath") -> list[tuple[float, float, float, float]]:
        """Transversal crossings as (s_self, s_other, x, y), sorted by s_self."""
        # bbox prefilter: only test segment pairs whose extents overlap
        sp, op = self.points, other.points
        s_lo_x = np.minimum(sp[:-1, 0], sp[1:, 0])
        s_hi_x = np.maximum(sp[:-1, 0], sp[1:, 0])
        s_lo_y = np.minimum(sp[:-1, 1], sp[1:, 1])
        s_hi_y = np.maximum(sp[:-1, 1], sp[1:, 1])
        o_lo_x = np.minimum(op[:-1, 0], op[1:, 0])
        o_hi_x = np.maximum(op[:-1, 0], op[1:, 0])
        o_lo_y = np.minimum(op[:-1, 1], op[1:, 1])
        o_hi_y = np.maximum(op[:-1, 1], op[1:, 1])
        out = []
        for i in range(len(sp) - 1):
            mask = (
                (o_lo_x <= s_hi_x[i]) & (o_hi_x >= s_lo_x[i])
                & (o_lo_y <= s_hi_y[i]) & (o_hi_y >= s_lo_y[i])
            )
            if not mask.any():
                continue
            p1, p2 = sp[i], sp[i + 1]
            for j in np.nonzero(mask)[0]:
                q1, q2 = op[j], op[j + 1]
                hit = segment_intersection(p1, p2, q1, q2)
                if hit is None:
                    continue
                x, y, t, u = hit
                s_self = float(self._cum[i] + t * (self._cum[i + 1] - self._cum[i]))
                s_other = float(other._cum[j] + u * (other._cum[j + 1] - other._cum[j]))
                out.append((s_self, s_other, x, y))
        out.sort()
        # collapse near-duplicate hits at shared segment endpoints
        dedup: list[tuple[float, float, float, float]] = []
        for c in out:
            if dedup and abs(c[0] - dedup[-1][0]) < 1e-9:
                continue
            dedup.append(c)
        return dedup

    def polygon_span(self, polygon) -> tuple[float, float] | None:
        """Arclength interval [s_in, s_out] where the path lies inside a polygon.

        Uses vertex-resolution sampling; None when the path never enters.
        """
        inside_s = [
            float(self._cum[i])
            for i, (x, y) in enumerate(self.points)
            if point_in_polygon(float(x), float(y), polygon)
        ]
        if not inside_s:
            return None
        return min(inside_s), max(inside_s)
