"""Maneuver-conditioned trajectory generation on lane paths, footprint
clearance profiles, the surrogate safety metric, and forward simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geometry import world_to_body_velocity
from .scene_model import (
    LaneMap,
    Scene,
    SceneVehicle,
    VehicleFootprint,
    VehicleState,
    _leading_among,
)

HORIZON = 6.0
DT = 0.1
N_SAMPLES = int(round(HORIZON / DT)) + 1
MAX_DECEL = 8.0
BRAKE_DECEL = 6.0
SPEED_FACTORS = (0.6, 0.8, 1.0)
STOP_FRACTIONS = (0.5, 0.75, 1.0)
FOLLOW_HEADWAYS = (1.0, 1.5, 2.0)
STANDSTILL_GAP = 2.0
STOP_LINE_MARGIN = 1.0
LATERAL_BOUND = 1.5

TURN_MANEUVERS = ("proceed", "wait", "follow_lead")
THROUGH_MANEUVERS = ("track_speed", "decelerate_to_stop", "follow_lead")


@dataclass(frozen=True)
class Maneuver:
    kind: str  # proceed | wait | track_speed | decelerate_to_stop | follow_lead
    lane_id: str

    def __post_init__(self):
        if self.kind not in ("proceed", "wait", "track_speed", "decelerate_to_stop", "follow_lead"):
            raise ValueError(f"unknown maneuver kind {self.kind!r}")


def admissible_maneuvers(vehicle: SceneVehicle, scene: Scene, lane_map: LaneMap) -> list[Maneuver]:
    """Turning lanes admit proceed/wait, through lanes track/decelerate;
    follow_lead requires a leader within the (possibly view-restricted) scene."""
    turning = lane_map.turn_of(vehicle.lane_id) in ("left", "right")
    kinds = list(TURN_MANEUVERS if turning else THROUGH_MANEUVERS)
    members = [(v.vehicle_id, v.state, v.lane_id) for v in scene.vehicles]
    if _leading_among(vehicle.vehicle_id, members, lane_map) is None:
        kinds.remove("follow_lead")
    return [Maneuver(kind, vehicle.lane_id) for kind in kinds]


@dataclass(frozen=True)
class Trajectory:
    """Time-sampled motion plan along a lane path over the 6 s horizon."""

    vehicle_id: int
    maneuver: Maneuver
    end_speed: float
    times: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)
    s_dot: np.ndarray = field(repr=False)
    xs: np.ndarray = field(repr=False)
    ys: np.ndarray = field(repr=False)
    yaws: np.ndarray = field(repr=False)
    states: tuple[VehicleState, ...] = field(repr=False)
    lateral: np.ndarray = field(repr=False)

    @property
    def arclength(self) -> float:
        return float(self.s[-1] - self.s[0])

    def state_at(self, k: int) -> VehicleState:
        return self.states[min(k, len(self.states) - 1)]


def _hermite_eval(s0, v0, s1, v1, tau, t):
    u = t / tau
    h00 = 2 * u**3 - 3 * u**2 + 1
    h10 = u**3 - 2 * u**2 + u
    h01 = -2 * u**3 + 3 * u**2
    h11 = u**3 - u**2
    s = h00 * s0 + h10 * tau * v0 + h01 * s1 + h11 * tau * v1
    d00 = 6 * u**2 - 6 * u
    d10 = 3 * u**2 - 4 * u + 1
    d01 = -6 * u**2 + 6 * u
    d11 = 3 * u**2 - 2 * u
    v = (d00 * s0 + d01 * s1) / tau + d10 * v0 + d11 * v1
    return s, v


def _hermite_accel_bounds(s0, v0, s1, v1, tau):
    a_start = (-6 * s0 - 4 * tau * v0 + 6 * s1 - 2 * tau * v1) / (tau * tau)
    a_end = (6 * s0 + 2 * tau * v0 - 6 * s1 + 4 * tau * v1) / (tau * tau)
    return min(a_start, a_end), max(a_start, a_end)


def _sample_spline(s0, v0, s1, v1, tau):
    """Sample the position Hermite on the 0..HORIZON grid, holding position
    after the spline ends. Returns (s, s_dot) arrays or None if infeasible."""
    a_min, _ = _hermite_accel_bounds(s0, v0, s1, v1, tau)
    if a_min < -MAX_DECEL:
        return None
    s = np.empty(N_SAMPLES)
    v = np.empty(N_SAMPLES)
    for k in range(N_SAMPLES):
        t = k * DT
        if t >= tau:
            s[k], v[k] = s1, v1
        else:
            s[k], v[k] = _hermite_eval(s0, v0, s1, v1, tau, t)
    if np.min(v) < -1e-9:
        return None  # plans never reverse
    return s, v


def _build_trajectory(
    vehicle: SceneVehicle,
    maneuver: Maneuver,
    lane_map: LaneMap,
    s_arr: np.ndarray,
    v_arr: np.ndarray,
    end_speed: float,
    d0: float,
    dd0: float,
    residual: tuple[float, float],
) -> Trajectory:
    path = lane_map.route_path(maneuver.lane_id)
    times = np.arange(N_SAMPLES) * DT
    # lateral offset decays to the centerline over the horizon (C1 Hermite)
    d = np.empty(N_SAMPLES)
    ddot = np.empty(N_SAMPLES)
    for k in range(N_SAMPLES):
        d[k], ddot[k] = _hermite_eval(d0, dd0, 0.0, 0.0, HORIZON, times[k])
    xs = np.empty(N_SAMPLES)
    ys = np.empty(N_SAMPLES)
    yaws = np.empty(N_SAMPLES)
    states = []
    rx, ry = residual
    for k in range(N_SAMPLES):
        sk = min(max(float(s_arr[k]), 0.0), path.length)
        px, py = path.point_at(sk)
        hd = path.heading_at(sk)
        decay = 1.0 - times[k] / HORIZON
        x = px - d[k] * math.sin(hd) + rx * decay
        y = py + d[k] * math.cos(hd) + ry * decay
        xs[k], ys[k], yaws[k] = x, y, hd
        states.append(
            VehicleState(
                x=x, y=y,
                vx=float(ddot[k]), vy=float(v_arr[k]),
                ax=0.0, ay=0.0,
                yaw=hd,
            )
        )
    return Trajectory(
        vehicle_id=vehicle.vehicle_id,
        maneuver=maneuver,
        end_speed=end_speed,
        times=times,
        s=s_arr,
        s_dot=v_arr,
        xs=xs,
        ys=ys,
        yaws=yaws,
        states=tuple(states),
        lateral=d,
    )


def generate_trajectories(
    vid: int,
    scene: Scene,
    maneuver: Maneuver,
    lane_map: LaneMap,
    footprint: VehicleFootprint | None = None,
) -> list[Trajectory]:
    """Three end-state variants per maneuver as cubic Hermite arclength splines
    composed with the lane path; infeasible variants are dropped and an
    infeasible maneuver yields an empty list."""
    footprint = footprint or VehicleFootprint()
    vehicle = scene.get(vid)
    path = lane_map.route_path(maneuver.lane_id)
    st = vehicle.state
    s0, _ = path.project(st.x, st.y)
    _, d0 = path.lateral_offset(st.x, st.y)
    hd0 = path.heading_at(s0)
    wvx, wvy = st.world_velocity()
    dd0, v0 = world_to_body_velocity(wvx, wvy, hd0)
    px0, py0 = path.point_at(s0)
    residual = (
        st.x - (px0 - d0 * math.sin(hd0)),
        st.y - (py0 + d0 * math.cos(hd0)),
    )
    limit = lane_map.lanes[maneuver.lane_id].speed_limit
    out: list[Trajectory] = []

    def push(s1, v1, tau, end_speed):
        sampled = _sample_spline(s0, v0, s1, v1, tau)
        if sampled is None:
            return
        s_arr, v_arr = sampled
        out.append(
            _build_trajectory(
                vehicle, maneuver, lane_map, s_arr, v_arr, end_speed, d0, dd0, residual
            )
        )

    if maneuver.kind in ("proceed", "track_speed"):
        for f in SPEED_FACTORS:
            v1 = f * limit
            s1 = s0 + 0.5 * (v0 + v1) * HORIZON
            push(s1, v1, HORIZON, v1)
    elif maneuver.kind in ("wait", "decelerate_to_stop"):
        stop_line = None
        if maneuver.kind == "wait":
            crossings = lane_map.conflict_arclengths(maneuver.lane_id)
            ahead = [c for c in crossings if c > s0]
            if ahead:
                stop_line = ahead[0] - (0.5 * footprint.length + STOP_LINE_MARGIN)
        if abs(v0) < 1e-9:
            # already stationary: hold position for the whole horizon
            push(s0, 0.0, HORIZON, 0.0)
            return out
        for f in STOP_FRACTIONS:
            tau = f * HORIZON
            s1 = s0 + 0.5 * v0 * tau
            if stop_line is not None:
                if s0 > stop_line:
                    continue  # already past the entry line; cannot wait
                if s1 > stop_line:
                    s1 = stop_line
                    # a clamped displacement D needs tau <= 3D/v0, otherwise
                    # the fixed-duration cubic would reverse before the line
                    tau = min(tau, 3.0 * (s1 - s0) / v0)
            push(s1, 0.0, tau, 0.0)
    elif maneuver.kind == "follow_lead":
        members = [(v.vehicle_id, v.state, v.lane_id) for v in scene.vehicles]
        lead_id = _leading_among(vid, members, lane_map)
        if lead_id is None:
            return []
        lead = scene.get(lead_id).state
        s_lead, _ = path.project(lead.x, lead.y)
        v_lead = lead.speed
        for h in FOLLOW_HEADWAYS:
            gap = STANDSTILL_GAP + h * v_lead
            s1 = s_lead + v_lead * HORIZON - gap - footprint.length
            v1 = v_lead
            if s1 <= s0:
                s1, v1 = s0, 0.0
            push(s1, v1, HORIZON, v1)
    return out


@dataclass(frozen=True)
class GapProfile:
    """Signed clearance per sample between two vehicles' planned footprints."""

    pair: tuple[int, int]
    clearance: np.ndarray

    @property
    def min_clearance(self) -> float:
        return float(np.min(self.clearance))


def gap_profile(
    ta: Trajectory,
    tb: Trajectory,
    footprint: VehicleFootprint | None = None,
) -> GapProfile:
    footprint = footprint or VehicleFootprint()
    if len(ta.times) != len(tb.times):
        raise ValueError("trajectories must share the sample grid")
    clear = _kernels.clearance_profile(
        ta.xs, ta.ys, ta.yaws, footprint.length, footprint.width,
        tb.xs, tb.ys, tb.yaws, footprint.length, footprint.width,
    )
    return GapProfile(pair=(ta.vehicle_id, tb.vehicle_id), clearance=clear)


def surrogate_s(profiles) -> float:
    """Minimum signed clearance over all pairs and samples."""
    profiles = list(profiles)
    if not profiles:
        raise ValueError("surrogate metric needs at least one gap profile")
    return min(p.min_clearance for p in profiles)


@dataclass(frozen=True)
class BrakeIntervention:
    vehicle_ids: frozenset
    t_start: float
    decel: float = BRAKE_DECEL


def _braked_position(traj: Trajectory, t: float, t_start: float, decel: float):
    k0 = int(round(t_start / DT))
    k0 = min(k0, len(traj.s) - 1)
    s_b = float(traj.s[k0])
    v_b = float(traj.s_dot[k0])
    tau = t - k0 * DT
    t_stop = v_b / decel if decel > 0 else math.inf
    if tau >= t_stop:
        return s_b + v_b * v_b / (2.0 * decel), 0.0
    return s_b + v_b * tau - 0.5 * decel * tau * tau, v_b - decel * tau


def find_overlap(scene: Scene, footprint: VehicleFootprint | None = None):
    """Most-penetrating overlapping pair (a, b, clearance) or None."""
    footprint = footprint or VehicleFootprint()
    worst = None
    vs = scene.vehicles
    for i in range(len(vs)):
        for j in range(i + 1, len(vs)):
            a, b = vs[i].state, vs[j].state
            c = _kernels.rect_clearance(
                a.x, a.y, a.yaw, footprint.length, footprint.width,
                b.x, b.y, b.yaw, footprint.length, footprint.width,
            )
            if c <= 0.0 and (worst is None or c < worst[2]):
                worst = (vs[i].vehicle_id, vs[j].vehicle_id, c)
    return worst


def forward_simulate(
    scene: Scene,
    profile: dict[int, Trajectory],
    until: float = HORIZON,
    intervention: BrakeIntervention | None = None,
    footprint: VehicleFootprint | None = None,
) -> list[Scene]:
    """Advance every vehicle along its trajectory at DT; braked vehicles switch
    to constant deceleration along their path. Stops at the first collision."""
    footprint = footprint or VehicleFootprint()
    missing = [v.vehicle_id for v in scene.vehicles if v.vehicle_id not in profile]
    if missing:
        raise ValueError(f"profile missing trajectories for {missing}")
    n_steps = min(N_SAMPLES - 1, int(math.floor(until / DT + 1e-9)))
    out: list[Scene] = []
    for k in range(n_steps + 1):
        t = k * DT
        states: dict[int, VehicleState] = {}
        for v in scene.vehicles:
            traj = profile[v.vehicle_id]
            braked = (
                intervention is not None
                and v.vehicle_id in intervention.vehicle_ids
                and t >= intervention.t_start
            )
            if not braked:
                states[v.vehicle_id] = traj.state_at(k)
            else:
                s_t, v_t = _braked_position(traj, t, intervention.t_start, intervention.decel)
                states[v.vehicle_id] = _pose_on_trajectory_path(traj, s_t, v_t)
        rolled = scene.with_states(states, scene.time + t)
        out.append(rolled)
        if find_overlap(rolled, footprint) is not None:
            break
    return out


def dump_trajectories(profile: dict[int, Trajectory], path):
    """Replay CSV: vehicle_id,k,t,x,y,vx,vy,yaw per sample."""
    with open(path, "w", newline="") as fh:
        fh.write("vehicle_id,k,t,x,y,vx,vy,yaw\n")
        for vid in sorted(profile):
            traj = profile[vid]
            for k, st in enumerate(traj.states):
                fh.write(
                    f"{vid},{k},{traj.times[k]!r},{st.x!r},{st.y!r},"
                    f"{st.vx!r},{st.vy!r},{st.yaw!r}\n"
                )


def _pose_on_trajectory_path(traj: Trajectory, s_t: float, v_t: float) -> VehicleState:
    """Pose at arclength s_t using the trajectory's sample geometry (the
    braked vehicle stays on its planned path, shorter along it)."""
    s = traj.s
    k = int(np.searchsorted(s, s_t, side="right")) - 1
    k = min(max(k, 0), len(s) - 2)
    span = float(s[k + 1] - s[k])
    if span <= 1e-12:
        x, y, yaw = float(traj.xs[k]), float(traj.ys[k]), float(traj.yaws[k])
    else:
        f = (s_t - float(s[k])) / span
        f = min(max(f, 0.0), 1.0)
        x = float(traj.xs[k] + f * (traj.xs[k + 1] - traj.xs[k]))
        y = float(traj.ys[k] + f * (traj.ys[k + 1] - traj.ys[k]))
        yaw = float(traj.yaws[k] if f < 0.5 else traj.yaws[k + 1])
    return VehicleState(x=x, y=y, vx=0.0, vy=v_t, ax=0.0, ay=0.0, yaw=yaw)
