"""Domain types, trajectory-data ingestion, lane maps, and the extraction of
left-turn-across-path (LTAP) and unprotected right-turn (RT) situations."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .geometry import (
    ArcPath,
    normalize_angle,
    point_in_polygon,
    rect_corners,
    world_to_body_velocity,
)

V_MAX_DEFAULT = 22.0
SNAP_TOLERANCE = 5.0
LEAD_HORIZON = 50.0
SIM_DT = 0.1

ROLE_SUBJECT = "subject"
ROLE_RELEVANT = "relevant"
ROLE_INJECTED = "injected_ov"
ROLE_OTHER = "other"

TURNING = ("left", "right")


class TrackParseError(ValueError):
    """Malformed track file row; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class UnmappableTrackError(ValueError):
    """A vehicle strays farther than the snap tolerance from every centerline."""


class MapFormatError(ValueError):
    pass


@dataclass(frozen=True)
class VehicleState:
    """Kinematic state: position in the map frame, velocity/acceleration in the
    body frame (vx lateral-left, vy longitudinal), yaw in (-pi, pi]."""

    x: float
    y: float
    vx: float
    vy: float
    ax: float
    ay: float
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    @property
    def speed(self) -> float:
        return math.sqrt(self.vx * self.vx + self.vy * self.vy)

    def world_velocity(self) -> tuple[float, float]:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return (self.vy * c - self.vx * s, self.vy * s + self.vx * c)

    def check_speed(self, v_max: float = V_MAX_DEFAULT):
        if self.speed > v_max:
            raise ValueError(f"speed {self.speed:.2f} m/s exceeds v_max={v_max}")


@dataclass(frozen=True)
class VehicleFootprint:
    length: float = 4.1
    width: float = 1.8

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise ValueError("footprint dimensions must be positive")

    def corners(self, state: VehicleState):
        """Counterclockwise corners of the oriented rectangle at `state`."""
        return rect_corners(state.x, state.y, state.yaw, self.length, self.width)

    @property
    def diagonal(self) -> float:
        return math.sqrt(self.length * self.length + self.width * self.width)


@dataclass(frozen=True)
class Lane:
    lane_id: str
    centerline: ArcPath
    speed_limit: float
    turn: str  # left | right | through

    def __post_init__(self):
        if self.turn not in ("left", "right", "through"):
            raise MapFormatError(f"lane {self.lane_id}: bad turn {self.turn!r}")


class LaneMap:
    """Directed lane centerlines, cross-path conflict pairs, and the
    intersection polygon used to window turn execution."""

    def __init__(self, lanes, conflicts, intersection_polygon, successors=None):
        self.lanes: dict[str, Lane] = {ln.lane_id: ln for ln in lanes}
        if len(self.lanes) != len(lanes):
            raise MapFormatError("duplicate lane ids")
        self.conflicts: set[frozenset] = {frozenset(p) for p in conflicts}
        self.intersection_polygon = [tuple(map(float, p)) for p in intersection_polygon]
        self.successors: dict[str, list[str]] = {
            k: list(v) for k, v in (successors or {}).items()
        }
        self._route_cache: dict[str, tuple[ArcPath, tuple[str, ...]]] = {}
        self._cross_cache: dict[tuple[str, str], float | None] = {}
        self._validate()

    def _validate(self):
        for ln in self.lanes.values():
            if ln.centerline.max_vertex_spacing > 1.0 + 1e-9:
                raise MapFormatError(f"lane {ln.lane_id}: vertex spacing exceeds 1 m")
        for pair in self.conflicts:
            a, b = sorted(pair)
            if a not in self.lanes or b not in self.lanes:
                raise MapFormatError(f"conflict references unknown lane: {a},{b}")
            hits = self.lanes[a].centerline.crossings(self.lanes[b].centerline)
            inside = [
                h for h in hits if point_in_polygon(h[2], h[3], self.intersection_polygon)
            ]
            if not inside:
                raise MapFormatError(
                    f"conflict pair ({a},{b}) does not cross inside the intersection"
                )

    def conflicting(self, lane_id: str) -> set[str]:
        out = set()
        for pair in self.conflicts:
            if lane_id in pair:
                out |= set(pair) - {lane_id}
        return out

    def route_lanes(self, lane_id: str) -> tuple[str, ...]:
        """Lane chain starting at lane_id following first successors."""
        chain = [lane_id]
        seen = {lane_id}
        cur = lane_id
        while True:
            nxt = sorted(self.successors.get(cur, []))
            if not nxt or nxt[0] in seen:
                break
            cur = nxt[0]
            seen.add(cur)
            chain.append(cur)
        return tuple(chain)

    def route_path(self, lane_id: str) -> ArcPath:
        """Concatenated centerline along the successor chain of lane_id."""
        cached = self._route_cache.get(lane_id)
        if cached is not None:
            return cached[0]
        chain = self.route_lanes(lane_id)
        pts = [self.lanes[chain[0]].centerline.points]
        for lid in chain[1:]:
            nxt = self.lanes[lid].centerline.points
            prev_end = pts[-1][-1]
            start = 1 if np.allclose(nxt[0], prev_end) else 0
            pts.append(nxt[start:])
        path = ArcPath(np.vstack(pts))
        self._route_cache[lane_id] = (path, chain)
        return path

    def turn_of(self, lane_id: str) -> str:
        return self.lanes[lane_id].turn

    def polygon_span(self, lane_id: str):
        return self.route_path(lane_id).polygon_span(self.intersection_polygon)

    def conflict_arclengths(self, lane_id: str) -> list[float]:
        """Arclengths (on lane_id's route) where conflicting lanes cross it."""
        path = self.route_path(lane_id)
        out = []
        for other in sorted(self.conflicting(lane_id)):
            for s_self, _s_other, _x, _y in path.crossings(self.lanes[other].centerline):
                out.append(s_self)
        return sorted(out)

    def crossing_on_lane(self, lane_id: str, against_lane: str) -> float | None:
        """First arclength along lane_id's centerline where it crosses
        against_lane's route, cached."""
        key = (lane_id, against_lane)
        if key not in self._cross_cache:
            hits = self.lanes[lane_id].centerline.crossings(self.route_path(against_lane))
            self._cross_cache[key] = hits[0][0] if hits else None
        return self._cross_cache[key]


def load_map(path) -> LaneMap:
    with open(path) as fh:
        data = json.load(fh)
    try:
        lanes = [
            Lane(
                lane_id=str(ln["id"]),
                centerline=ArcPath(np.asarray(ln["centerline"], dtype=np.float64)),
                speed_limit=float(ln["speed_limit"]),
                turn=str(ln["turn"]),
            )
            for ln in data["lanes"]
        ]
        conflicts = [(str(a), str(b)) for a, b in data["conflicts"]]
        polygon = data["intersection_polygon"]
    except KeyError as exc:
        raise MapFormatError(f"missing map key: {exc}") from exc
    successors = data.get("successors", {})
    return LaneMap(lanes, conflicts, polygon, successors)


@dataclass(frozen=True)
class SceneVehicle:
    vehicle_id: int
    state: VehicleState
    lane_id: str
    role: str


@dataclass(frozen=True)
class Scene:
    """Joint state of the interacting vehicle set N at one timestamp."""

    time: float
    vehicles: tuple[SceneVehicle, ...]
    scenario_kind: str  # LTAP | RT
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        subjects = [v for v in self.vehicles if v.role == ROLE_SUBJECT]
        if len(subjects) != 1:
            raise ValueError("scene must contain exactly one subject vehicle")
        ids = [v.vehicle_id for v in self.vehicles]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate vehicle ids in scene")

    @property
    def subject(self) -> SceneVehicle:
        for v in self.vehicles:
            if v.role == ROLE_SUBJECT:
                return v
        raise AssertionError("unreachable")

    def ids(self) -> list[int]:
        return [v.vehicle_id for v in self.vehicles]

    def get(self, vehicle_id: int) -> SceneVehicle:
        for v in self.vehicles:
            if v.vehicle_id == vehicle_id:
                return v
        raise KeyError(vehicle_id)

    def restrict(self, keep_ids) -> "Scene":
        keep = set(keep_ids)
        if self.subject.vehicle_id not in keep:
            # keep Scene's single-subject invariant: promote the lowest id
            vs = tuple(
                replace(v, role=ROLE_SUBJECT if i == 0 else v.role)
                for i, v in enumerate(
                    sorted(
                        (v for v in self.vehicles if v.vehicle_id in keep),
                        key=lambda v: v.vehicle_id,
                    )
                )
            )
        else:
            vs = tuple(
                v
                for v in sorted(self.vehicles, key=lambda v: v.vehicle_id)
                if v.vehicle_id in keep
            )
        return Scene(self.time, vs, self.scenario_kind, dict(self.provenance))

    def with_vehicle(self, vehicle: SceneVehicle) -> "Scene":
        vs = tuple(
            sorted(self.vehicles + (vehicle,), key=lambda v: v.vehicle_id)
        )
        return Scene(self.time, vs, self.scenario_kind, dict(self.provenance))

    def with_states(self, states: dict[int, VehicleState], time: float) -> "Scene":
        vs = tuple(replace(v, state=states[v.vehicle_id]) for v in self.vehicles)
        return Scene(time, vs, self.scenario_kind, dict(self.provenance))

    def check_disjoint(self, footprint: VehicleFootprint):
        vs = self.vehicles
        for i in range(len(vs)):
            for j in range(i + 1, len(vs)):
                a, b = vs[i].state, vs[j].state
                c = _kernels.rect_clearance(
                    a.x, a.y, a.yaw, footprint.length, footprint.width,
                    b.x, b.y, b.yaw, footprint.length, footprint.width,
                )
                if c <= 0.0:
                    raise ValueError(
                        f"footprints of {vs[i].vehicle_id} and {vs[j].vehicle_id} overlap"
                    )


def scene_to_dict(scene: Scene) -> dict:
    return {
        "time": scene.time,
        "scenario": scene.scenario_kind,
        "vehicles": [
            {
                "id": v.vehicle_id,
                "lane": v.lane_id,
                "role": v.role,
                "state": {
                    "x": v.state.x,
                    "y": v.state.y,
                    "vx": v.state.vx,
                    "vy": v.state.vy,
                    "ax": v.state.ax,
                    "ay": v.state.ay,
                    "yaw": v.state.yaw,
                },
            }
            for v in scene.vehicles
        ],
        "provenance": scene.provenance,
    }


def scene_from_dict(d: dict) -> Scene:
    vehicles = tuple(
        SceneVehicle(
            vehicle_id=int(v["id"]),
            state=VehicleState(**v["state"]),
            lane_id=str(v["lane"]),
            role=str(v["role"]),
        )
        for v in d["vehicles"]
    )
    return Scene(
        time=float(d["time"]),
        vehicles=vehicles,
        scenario_kind=str(d["scenario"]),
        provenance=dict(d.get("provenance", {})),
    )


@dataclass
class Track:
    vehicle_id: int
    times: np.ndarray
    states: list[VehicleState]
    lane_ids: list[str]

    @property
    def lane_path(self) -> tuple[str, ...]:
        seen: list[str] = []
        for lid in self.lane_ids:
            if not seen or seen[-1] != lid:
                seen.append(lid)
        return tuple(seen)

    def index_at(self, t: float, dt: float):
        k = int(round((t - float(self.times[0])) / dt))
        if 0 <= k < len(self.times) and abs(float(self.times[k]) - t) < 1e-6:
            return k
        return None


@dataclass
class TrackDataset:
    dt: float
    tracks: dict[int, Track]

    def sample_times(self) -> list[float]:
        ts: set[float] = set()
        for tr in self.tracks.values():
            ts.update(round(float(t), 6) for t in tr.times)
        return sorted(ts)

    def vehicles_at(self, t: float) -> list[tuple[int, VehicleState, str]]:
        out = []
        for vid in sorted(self.tracks):
            tr = self.tracks[vid]
            k = tr.index_at(t, self.dt)
            if k is not None:
                out.append((vid, tr.states[k], tr.lane_ids[k]))
        return out


_COLUMNS = ("track_id", "t", "x", "y", "vx", "vy", "ax", "ay", "yaw", "lane_id")
_OPTIONAL = {"vx", "vy", "ax", "ay"}


def _central_diff(values: np.ndarray, dt: float) -> np.ndarray:
    n = len(values)
    out = np.empty(n, dtype=np.float64)
    if n == 1:
        out[0] = 0.0
        return out
    out[0] = (values[1] - values[0]) / dt
    out[-1] = (values[-1] - values[-2]) / dt
    for k in range(1, n - 1):
        out[k] = (values[k + 1] - values[k - 1]) / (2.0 * dt)
    return out


def ingest_tracks(
    path,
    lane_map: LaneMap,
    *,
    resample_dt: float = SIM_DT,
    snap_tolerance: float = SNAP_TOLERANCE,
    v_max: float = V_MAX_DEFAULT,
) -> TrackDataset:
    """Parse the track CSV, reconstruct missing kinematics by central
    differences, snap vehicles to lanes, and resample to the simulation step."""
    declared_dt = None
    rows = []
    with open(path, newline="") as fh:
        header: list[str] | None = None
        col_idx: dict[str, int] = {}
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("dt"):
                    try:
                        declared_dt = float(body.split("=", 1)[1])
                    except (IndexError, ValueError):
                        raise TrackParseError(line_no, f"bad dt header {line!r}")
                continue
            cells = next(csv.reader([line]))
            if header is None:
                header = [c.strip() for c in cells]
                unknown = set(header) - set(_COLUMNS)
                missing = set(_COLUMNS) - set(header) - _OPTIONAL
                if unknown or missing:
                    raise TrackParseError(
                        line_no, f"bad header (unknown={sorted(unknown)}, missing={sorted(missing)})"
                    )
                col_idx = {c: i for i, c in enumerate(header)}
                continue
            if len(cells) != len(header):
                raise TrackParseError(line_no, f"expected {len(header)} fields, got {len(cells)}")

            def _num(col, *, required=True, line_no=line_no, cells=cells):
                i = col_idx.get(col)
                if i is None or cells[i].strip() == "":
                    if required:
                        raise TrackParseError(line_no, f"missing value for {col!r}")
                    return None
                try:
                    return float(cells[i])
                except ValueError:
                    raise TrackParseError(line_no, f"bad number {cells[i]!r} in column {col!r}")

            try:
                tid = int(cells[col_idx["track_id"]])
            except ValueError:
                raise TrackParseError(line_no, f"bad track_id {cells[col_idx['track_id']]!r}")
            lane_raw = cells[col_idx["lane_id"]].strip() if "lane_id" in col_idx else ""
            rows.append(
                {
                    "line": line_no,
                    "track_id": tid,
                    "t": _num("t"),
                    "x": _num("x"),
                    "y": _num("y"),
                    "vx": _num("vx", required=False),
                    "vy": _num("vy", required=False),
                    "ax": _num("ax", required=False),
                    "ay": _num("ay", required=False),
                    "yaw": _num("yaw"),
                    "lane_id": lane_raw or None,
                }
            )

    tracks: dict[int, Track] = {}
    by_vehicle: dict[int, list[dict]] = {}
    for r in rows:
        by_vehicle.setdefault(r["track_id"], []).append(r)

    for vid in sorted(by_vehicle):
        recs = sorted(by_vehicle[vid], key=lambda r: r["t"])
        times = np.array([r["t"] for r in recs], dtype=np.float64)
        if len(times) > 1:
            steps = np.diff(times)
            if np.any(steps <= 0):
                raise TrackParseError(recs[0]["line"], f"track {vid}: timestamps not strictly increasing")
            if np.max(np.abs(steps - steps[0])) > 1e-6:
                raise TrackParseError(recs[0]["line"], f"track {vid}: sampling period not constant")
            data_dt = float(steps[0])
        else:
            data_dt = declared_dt or resample_dt
        if declared_dt is not None:
            data_dt = declared_dt

        xs = np.array([r["x"] for r in recs])
        ys = np.array([r["y"] for r in recs])
        yaws = np.array([normalize_angle(r["yaw"]) for r in recs])

        have_v = all(r["vx"] is not None and r["vy"] is not None for r in recs)
        if have_v:
            vxs = np.array([r["vx"] for r in recs])
            vys = np.array([r["vy"] for r in recs])
        else:
            wx = _central_diff(xs, data_dt)
            wy = _central_diff(ys, data_dt)
            vxs = np.empty(len(recs))
            vys = np.empty(len(recs))
            for k in range(len(recs)):
                vxs[k], vys[k] = world_to_body_velocity(wx[k], wy[k], yaws[k])
        have_a = all(r["ax"] is not None and r["ay"] is not None for r in recs)
        if have_a:
            axs = np.array([r["ax"] for r in recs])
            ays = np.array([r["ay"] for r in recs])
        else:
            axs = _central_diff(vxs, data_dt)
            ays = _central_diff(vys, data_dt)

        lane_ids = []
        for k, r in enumerate(recs):
            x, y = float(xs[k]), float(ys[k])
            best_lane, best_d = None, math.inf
            for lid in sorted(lane_map.lanes):
                _, d = lane_map.lanes[lid].centerline.project(x, y)
                if d < best_d:
                    best_lane, best_d = lid, d
            if best_d > snap_tolerance:
                raise UnmappableTrackError(
                    f"track {vid} at t={r['t']}: {best_d:.2f} m from every centerline"
                )
            lane_ids.append(r["lane_id"] if r["lane_id"] is not None else best_lane)

        # resample onto the simulation grid when the data rate differs
        if abs(data_dt - resample_dt) > 1e-9 and len(times) > 1:
            t0, t1 = float(times[0]), float(times[-1])
            n_new = int(math.floor((t1 - t0) / resample_dt + 1e-9)) + 1
            new_t = t0 + resample_dt * np.arange(n_new)
            yaw_unwrapped = np.unwrap(yaws)

            def interp(col):
                return np.interp(new_t, times, col)

            xs_n, ys_n = interp(xs), interp(ys)
            vxs_n, vys_n = interp(vxs), interp(vys)
            axs_n, ays_n = interp(axs), interp(ays)
            yaws_n = np.array([normalize_angle(v) for v in interp(yaw_unwrapped)])
            src_idx = np.minimum(
                ((new_t - t0) / data_dt).astype(int), len(lane_ids) - 1
            )
            lanes_n = [lane_ids[i] for i in src_idx]
            times, xs, ys, vxs, vys, axs, ays, yaws, lane_ids = (
                new_t, xs_n, ys_n, vxs_n, vys_n, axs_n, ays_n, yaws_n, lanes_n,
            )
            data_dt = resample_dt

        states = []
        for k in range(len(times)):
            st = VehicleState(
                x=float(xs[k]), y=float(ys[k]),
                vx=float(vxs[k]), vy=float(vys[k]),
                ax=float(axs[k]), ay=float(ays[k]),
                yaw=float(yaws[k]),
            )
            st.check_speed(v_max)
            states.append(st)
        tracks[vid] = Track(vid, times, states, lane_ids)

    common_dt = resample_dt if tracks else (declared_dt or resample_dt)
    return TrackDataset(dt=common_dt, tracks=tracks)


def serialize_tracks(ds: TrackDataset, path):
    """Canonical CSV emission; floats use repr so ingestion round-trips
    bit-exactly."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# dt={ds.dt!r}\n")
        fh.write(",".join(_COLUMNS) + "\n")
        for vid in sorted(ds.tracks):
            tr = ds.tracks[vid]
            for k in range(len(tr.times)):
                st = tr.states[k]
                fh.write(
                    ",".join(
                        [
                            str(vid),
                            repr(float(tr.times[k])),
                            repr(st.x), repr(st.y),
                            repr(st.vx), repr(st.vy),
                            repr(st.ax), repr(st.ay),
                            repr(st.yaw),
                            tr.lane_ids[k],
                        ]
                    )
                    + "\n"
                )


def _leading_among(vid: int, members, lane_map: LaneMap):
    """Nearest same-route vehicle ahead of vid within LEAD_HORIZON meters.

    `members` is a list of (vehicle_id, VehicleState, lane_id).
    """
    me = next(m for m in members if m[0] == vid)
    route = lane_map.route_lanes(me[2])
    path = lane_map.route_path(me[2])
    s_me, _ = path.project(me[1].x, me[1].y)
    best_id, best_gap = None, math.inf
    for other_id, st, lane_id in members:
        if other_id == vid or lane_id not in route:
            continue
        s_o, _ = path.project(st.x, st.y)
        gap = s_o - s_me
        if 0.0 < gap <= LEAD_HORIZON and gap < best_gap:
            best_id, best_gap = other_id, gap
    return best_id


def leading_vehicle(vid: int, scene: Scene, lane_map: LaneMap):
    """Vehicle on the same lane path with the smallest positive arclength gap
    ahead of vid within 50 m, else None."""
    members = [(v.vehicle_id, v.state, v.lane_id) for v in scene.vehicles]
    return _leading_among(vid, members, lane_map)


def relevant_set(subject_id: int, members, lane_map: LaneMap) -> set[int]:
    """Relevant vehicles for a subject: the cross-path conflicting vehicle of
    each conflicting lane (nearest one not yet past the crossing point; its
    followers are shielded behind it), the subject's leader, and each
    cross-path conflicting vehicle's leader."""
    me = next(m for m in members if m[0] == subject_id)
    conflicts = lane_map.conflicting(me[2])
    rel: set[int] = set()
    cross: list[int] = []
    for lane_id in sorted(conflicts):
        s_cross = lane_map.crossing_on_lane(lane_id, me[2])
        if s_cross is None:
            continue
        path = lane_map.lanes[lane_id].centerline
        best_id, best_s = None, -math.inf
        for other_id, st, lid in members:
            if other_id == subject_id or lid != lane_id:
                continue
            s_v, _ = path.project(st.x, st.y)
            if s_v <= s_cross + 1e-9 and s_v > best_s:
                best_id, best_s = other_id, s_v
        if best_id is not None:
            cross.append(best_id)
    rel.update(cross)
    lead = _leading_among(subject_id, members, lane_map)
    if lead is not None:
        rel.add(lead)
    for cid in cross:
        lead_c = _leading_among(cid, members, lane_map)
        if lead_c is not None and lead_c != subject_id:
            rel.add(lead_c)
    return rel


def is_executing_turn(state: VehicleState, lane_id: str, lane_map: LaneMap) -> bool:
    """True while a vehicle on a turning lane is inside the intersection
    polygon (the classification is map-grounded, not yaw-based)."""
    if lane_map.turn_of(lane_id) not in TURNING:
        return False
    return point_in_polygon(state.x, state.y, lane_map.intersection_polygon)


def extract_situations(ds: TrackDataset, lane_map: LaneMap) -> list[Scene]:
    """Emit one Scene per (subject, sample time) while the subject executes a
    left or right turn through the intersection; N = subject + relevant set."""
    scenes = []
    for t in ds.sample_times():
        members = ds.vehicles_at(t)
        for vid, st, lane_id in members:
            if not is_executing_turn(st, lane_id, lane_map):
                continue
            rel = relevant_set(vid, members, lane_map)
            if not rel:
                continue
            kind = "LTAP" if lane_map.turn_of(lane_id) == "left" else "RT"
            keep = sorted(rel | {vid})
            vehicles = tuple(
                SceneVehicle(
                    vehicle_id=m[0],
                    state=m[1],
                    lane_id=m[2],
                    role=ROLE_SUBJECT if m[0] == vid else ROLE_RELEVANT,
                )
                for m in members
                if m[0] in keep
            )
            scenes.append(Scene(time=t, vehicles=vehicles, scenario_kind=kind))
    scenes.sort(key=lambda s: (s.time, s.subject.vehicle_id))
    for i, sc in enumerate(scenes):
        sc.provenance["source_index"] = i
    return scenes
