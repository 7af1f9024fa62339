"""Minimal deterministic SVG emission: fixed-precision coordinates, no
timestamps, stable element order, so identical runs produce identical bytes."""

from __future__ import annotations


def _f(x: float) -> str:
    return f"{x:.3f}"


class SvgCanvas:
    def __init__(self, width: int = 640, height: int = 480, title: str = ""):
        self.width = width
        self.height = height
        self.elements: list[str] = []
        if title:
            self.text(width / 2, 18, title, size=14, anchor="middle")

    def line(self, x1, y1, x2, y2, stroke="#888", width=1.0):
        self.elements.append(
            f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
            f'stroke="{stroke}" stroke-width="{_f(width)}"/>'
        )

    def polyline(self, points, stroke="#555", width=1.0):
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in points)
        self.elements.append(
            f'<polyline points="{pts}" fill="none" stroke="{stroke}" '
            f'stroke-width="{_f(width)}"/>'
        )

    def circle(self, cx, cy, r, fill="#d33"):
        self.elements.append(
            f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(r)}" fill="{fill}"/>'
        )

    def rect(self, x, y, w, h, fill="#47a"):
        self.elements.append(
            f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" fill="{fill}"/>'
        )

    def text(self, x, y, s, size=11, anchor="start", fill="#222"):
        self.elements.append(
            f'<text x="{_f(x)}" y="{_f(y)}" font-size="{size}" '
            f'font-family="sans-serif" text-anchor="{anchor}" fill="{fill}">{s}</text>'
        )

    def to_string(self) -> str:
        body = "\n".join(self.elements)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n'
            f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="#fff"/>\n'
            f"{body}\n</svg>\n"
        )

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_string())


class WorldProjector:
    """Map world coordinates into an SVG pixel box (y flipped)."""

    def __init__(self, bounds, width, height, margin=30.0):
        x_lo, x_hi, y_lo, y_hi = bounds
        span_x = max(x_hi - x_lo, 1e-9)
        span_y = max(y_hi - y_lo, 1e-9)
        scale = min((width - 2 * margin) / span_x, (height - 2 * margin) / span_y)
        self.scale = scale
        self.x_lo, self.y_hi = x_lo, y_hi
        self.margin = margin

    def __call__(self, x, y):
        return (
            self.margin + (x - self.x_lo) * self.scale,
            self.margin + (self.y_hi - y) * self.scale,
        )


def scatter_over_map(title, lane_polylines, points, path, point_color="#d33"):
    """Scatter of world points over lane centerlines; writes `path`."""
    xs = [p[0] for line in lane_polylines for p in line] + [p[0] for p in points]
    ys = [p[1] for line in lane_polylines for p in line] + [p[1] for p in points]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    bounds = (min(xs), max(xs), min(ys), max(ys))
    canvas = SvgCanvas(640, 640, title)
    proj = WorldProjector(bounds, 640, 640)
    for line in lane_polylines:
        canvas.polyline([proj(x, y) for x, y in line], stroke="#bbb", width=1.0)
    for x, y in points:
        px, py = proj(x, y)
        canvas.circle(px, py, 3.5, fill=point_color)
    if not points:
        canvas.text(320, 320, "no records", anchor="middle", fill="#999")
    canvas.save(path)


def histogram(title, labels, counts, path, bar_color="#47a"):
    """Labelled bar chart; writes `path`."""
    canvas = SvgCanvas(640, 480, title)
    n = max(len(labels), 1)
    peak = max(list(counts) + [1])
    plot_w, plot_h, x0, y0 = 560, 380, 40, 440
    bar_w = plot_w / n * 0.7
    canvas.line(x0, y0, x0 + plot_w, y0, stroke="#222")
    for i, (label, count) in enumerate(zip(labels, counts)):
        cx = x0 + plot_w * (i + 0.5) / n
        h = plot_h * (count / peak)
        canvas.rect(cx - bar_w / 2, y0 - h, bar_w, h, fill=bar_color)
        canvas.text(cx, y0 + 16, str(label), anchor="middle")
        canvas.text(cx, y0 - h - 4, str(count), anchor="middle")
    canvas.save(path)
