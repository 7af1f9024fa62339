"""Severity classification by impact relative speed, collision-type taxonomy
from impact geometry, aggregate statistics, and deterministic plot emission."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .geometry import normalize_angle, rect_corners
from .hypergame import OccRecord
from .scene_model import LaneMap, VehicleFootprint, VehicleState
from .svgplot import histogram, scatter_over_map


@dataclass(frozen=True)
class SeverityClass:
    label: str
    low: float   # exclusive except S0, which includes 0
    high: float  # inclusive


# S1's upper bound closes the (7.7, 7.8] gap left open between the published
# S1/S2 bounds so the partition is total; flagged in report metadata.
SEVERITY_CLASSES = (
    SeverityClass("S0", 0.0, 5.3),
    SeverityClass("S1", 5.3, 7.8),
    SeverityClass("S2", 7.8, 10.3),
    SeverityClass("S3", 10.3, math.inf),
)

COLLISION_TYPES = ("front_to_front", "angle", "sideswipe", "front_to_rear")


def severity_of_speed(relative_speed: float) -> SeverityClass:
    if relative_speed < 0:
        raise ValueError("relative speed must be non-negative")
    for cls in SEVERITY_CLASSES:
        if relative_speed <= cls.high:
            return cls
    return SEVERITY_CLASSES[-1]


def impact_relative_speed(record: OccRecord) -> float:
    a, b = record.impact.pair
    va = record.impact.states[a].world_velocity()
    vb = record.impact.states[b].world_velocity()
    return math.hypot(va[0] - vb[0], va[1] - vb[1])


def severity(record: OccRecord) -> SeverityClass:
    """Class assigned from the vector relative speed of the colliding pair at
    the impact sample (worst-case stand-in for delta-v)."""
    return severity_of_speed(impact_relative_speed(record))


def _axis_overlap(corners_a, corners_b, nx, ny):
    proj_a = [x * nx + y * ny for x, y in corners_a]
    proj_b = [x * nx + y * ny for x, y in corners_b]
    return min(max(proj_a), max(proj_b)) - max(min(proj_a), min(proj_b))


def contact_faces(
    sa: VehicleState, sb: VehicleState, footprint: VehicleFootprint
) -> tuple[str, str]:
    """Contact face of each vehicle (front/rear/side) from the minimal
    translation axis of the overlapping footprints."""
    ca = rect_corners(sa.x, sa.y, sa.yaw, footprint.length, footprint.width)
    cb = rect_corners(sb.x, sb.y, sb.yaw, footprint.length, footprint.width)
    axes = []
    for yaw in (sa.yaw, sb.yaw):
        c, s = math.cos(yaw), math.sin(yaw)
        axes.append((c, s))
        axes.append((-s, c))
    best_axis, best_overlap = None, math.inf
    for nx, ny in axes:
        ov = _axis_overlap(ca, cb, nx, ny)
        if ov < best_overlap:
            best_overlap, best_axis = ov, (nx, ny)
    nx, ny = best_axis
    # orient the contact normal from a toward b
    dx, dy = sb.x - sa.x, sb.y - sa.y
    if nx * dx + ny * dy < 0:
        nx, ny = -nx, -ny

    def face(yaw, ax, ay):
        lon = ax * math.cos(yaw) + ay * math.sin(yaw)
        lat = -ax * math.sin(yaw) + ay * math.cos(yaw)
        if abs(lon) >= abs(lat):
            return "front" if lon > 0 else "rear"
        return "side"

    return face(sa.yaw, nx, ny), face(sb.yaw, -nx, -ny)


def collision_type(record: OccRecord, footprint: VehicleFootprint | None = None) -> str:
    """Taxonomy from yaw difference and contact faces: front-to-front above
    135 deg, front-to-rear / sideswipe below 45 deg, else angle."""
    footprint = footprint or VehicleFootprint()
    a, b = record.impact.pair
    sa, sb = record.impact.states[a], record.impact.states[b]
    dpsi = abs(math.degrees(normalize_angle(sa.yaw - sb.yaw)))
    fa, fb = contact_faces(sa, sb, footprint)
    if 135.0 < dpsi <= 180.0 and fa == "front" and fb == "front":
        return "front_to_front"
    if dpsi <= 45.0 and {fa, fb} == {"front", "rear"}:
        return "front_to_rear"
    if dpsi <= 45.0 and ("side" in (fa, fb)):
        return "sideswipe"
    return "angle"


def annotate(record: OccRecord, footprint: VehicleFootprint | None = None) -> OccRecord:
    record.severity = severity(record).label
    record.collision_type = collision_type(record, footprint)
    return record


@dataclass
class ValidationReport:
    occ_count: int
    occlusion_scene_count: int
    baseline_occ_count: int
    baseline_occlusion_scene_count: int
    severity_hist: dict[str, int]
    type_hist: dict[str, int]
    tagging_on_count: int
    resolution_to_impact: dict
    occ_gain_pct: float | None
    occlusion_scene_gain_pct: float | None
    parameters: dict

    def to_dict(self) -> dict:
        return {
            "counts": {
                "occ": self.occ_count,
                "occlusion_scenes": self.occlusion_scene_count,
                "baseline_occ": self.baseline_occ_count,
                "baseline_occlusion_scenes": self.baseline_occlusion_scene_count,
            },
            "gain": {
                "occ_pct": self.occ_gain_pct,
                "occlusion_scenes_pct": self.occlusion_scene_gain_pct,
            },
            "severity_hist": self.severity_hist,
            "type_hist": self.type_hist,
            "tagging_on_count": self.tagging_on_count,
            "resolution_to_impact": self.resolution_to_impact,
            "parameters": self.parameters,
            "notes": {
                "severity_bins": "S1 upper bound closed at 7.8 m/s to make the partition total",
                "relative_speed": "vector magnitude of the velocity difference at impact",
            },
        }


def _gain_pct(baseline: int, augmented: int) -> float | None:
    # 2 -> 80 reads as a 4000% gain (ratio times 100)
    if baseline <= 0:
        return None
    return 100.0 * augmented / baseline


def aggregate(
    records: list[OccRecord],
    scenes,
    baseline_records: list[OccRecord],
    baseline_scenes,
    parameters: dict | None = None,
) -> ValidationReport:
    """Histogram and count summary over the augmented and baseline record sets."""
    severity_hist = {c.label: 0 for c in SEVERITY_CLASSES}
    type_hist = {t: 0 for t in COLLISION_TYPES}
    samples = []
    tagging = 0
    for r in records:
        if r.severity is None or r.collision_type is None:
            annotate(r)
        severity_hist[r.severity] += 1
        type_hist[r.collision_type] += 1
        if r.tagging_on:
            tagging += 1
        if r.resolution_to_impact is not None:
            samples.append(r.resolution_to_impact)
    res = {
        "samples": samples,
        "min": min(samples) if samples else None,
        "mean": sum(samples) / len(samples) if samples else None,
        "max": max(samples) if samples else None,
    }
    return ValidationReport(
        occ_count=len(records),
        occlusion_scene_count=len(list(scenes)),
        baseline_occ_count=len(baseline_records),
        baseline_occlusion_scene_count=len(list(baseline_scenes)),
        severity_hist=severity_hist,
        type_hist=type_hist,
        tagging_on_count=tagging,
        resolution_to_impact=res,
        occ_gain_pct=_gain_pct(len(baseline_records), len(records)),
        occlusion_scene_gain_pct=_gain_pct(len(list(baseline_scenes)), len(list(scenes))),
        parameters=parameters or {},
    )


def summary_text(report: ValidationReport) -> str:
    d = report.to_dict()
    lines = [
        "validation summary",
        "==================",
        f"occlusion scenes: {report.occlusion_scene_count} "
        f"(baseline {report.baseline_occlusion_scene_count})",
        f"occlusion-caused collisions: {report.occ_count} "
        f"(baseline {report.baseline_occ_count})",
    ]
    if report.occ_gain_pct is not None:
        lines.append(f"occ gain: {report.occ_gain_pct:.0f}%")
    if report.occlusion_scene_gain_pct is not None:
        lines.append(f"occlusion scene gain: {report.occlusion_scene_gain_pct:.0f}%")
    lines.append(f"severity: {json.dumps(report.severity_hist, sort_keys=True)}")
    lines.append(f"collision types: {json.dumps(report.type_hist, sort_keys=True)}")
    lines.append(f"tagging on: {report.tagging_on_count}")
    r = report.resolution_to_impact
    if r["samples"]:
        lines.append(
            "resolution-to-impact (s): "
            f"min {r['min']:.2f} mean {r['mean']:.4f} max {r['max']:.2f}"
        )
    else:
        lines.append("resolution-to-impact: no samples")
    lines.append("parameters: " + json.dumps(d["parameters"], sort_keys=True))
    return "\n".join(lines) + "\n"


def emit_plots(
    report: ValidationReport,
    records: list[OccRecord],
    out_dir,
    lane_map: LaneMap | None = None,
) -> list[str]:
    """Self-contained SVGs plus report.json and summary.txt; byte-identical
    across reruns of the same inputs."""
    out = Path(out_dir)
    plots = out / "plots"
    plots.mkdir(parents=True, exist_ok=True)
    lanes = []
    if lane_map is not None:
        for lid in sorted(lane_map.lanes):
            pts = lane_map.lanes[lid].centerline.points
            lanes.append([(float(x), float(y)) for x, y in pts])

    occluder_pts = []
    impact_pts = []
    for r in records:
        if r.occluder_id is not None and r.occluder_id in r.scene.ids():
            st = r.scene.get(r.occluder_id).state
            occluder_pts.append((st.x, st.y))
        for vid in r.impact.pair:
            st = r.impact.states[vid]
            impact_pts.append((st.x, st.y))

    files = []
    p = plots / "occluder_positions.svg"
    scatter_over_map("occluding vehicle positions", lanes, occluder_pts, p)
    files.append(str(p))
    p = plots / "impact_positions.svg"
    scatter_over_map("colliding vehicle positions at impact", lanes, impact_pts, p, "#a3d")
    files.append(str(p))
    p = plots / "severity_hist.svg"
    labels = [c.label for c in SEVERITY_CLASSES]
    histogram("severity class distribution", labels, [report.severity_hist[c] for c in labels], p)
    files.append(str(p))
    p = plots / "resolution_to_impact_hist.svg"
    samples = report.resolution_to_impact["samples"]
    bins = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, math.inf]
    counts = [0] * (len(bins) - 1)
    for s in samples:
        for i in range(len(bins) - 1):
            if bins[i] <= s < bins[i + 1]:
                counts[i] += 1
                break
    bin_labels = ["0-.5", ".5-1", "1-1.5", "1.5-2", "2-2.5", "2.5-3", "3+"]
    histogram("occlusion resolution to impact (s)", bin_labels, counts, p, "#583")
    files.append(str(p))

    report_path = out / "report.json"
    with open(report_path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    files.append(str(report_path))
    summary_path = out / "summary.txt"
    with open(summary_path, "w") as fh:
        fh.write(summary_text(report))
    files.append(str(summary_path))
    return files
