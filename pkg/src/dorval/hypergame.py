"""Level-1 hypergame construction from per-vehicle visible sets, the dynamic
occlusion risk measure, occlusion-caused-collision classification, and the
emergency-brake resolution check."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .game import (
    GameView,
    StrategyChoice,
    StrategyProfile,
    UtilityParams,
    build_game,
    solve_nash_maneuvers,
)
from .motion import (
    BRAKE_DECEL,
    DT,
    HORIZON,
    BrakeIntervention,
    Trajectory,
    find_overlap,
    forward_simulate,
    gap_profile,
    surrogate_s,
)
from .occlusion import RayBudget, VisibilityReport, mutually_visible
from .scene_model import LaneMap, Scene, VehicleFootprint, VehicleState, leading_vehicle


@dataclass
class HypergameL1:
    """One level-1 hypergame: the omniscient game plus each occlusion-naive
    vehicle's restricted view."""

    base_scene: Scene
    report: VisibilityReport
    visible_sets: dict[int, tuple[int, ...]]
    views: dict[int, GameView]
    resolved_game: GameView


@dataclass
class DorResult:
    s_resolved: float
    s_naive: float
    dor: float
    resolved_profile: StrategyProfile
    naive_profile: StrategyProfile

    def __post_init__(self):
        assert self.dor == self.s_resolved - self.s_naive


@dataclass
class ImpactInfo:
    time: float  # absolute time of the first overlapping sample
    pair: tuple[int, int]
    states: dict[int, VehicleState]  # all vehicles at the impact sample


@dataclass
class OccRecord:
    """One identified occlusion-caused collision candidate."""

    scene: Scene
    dor_result: DorResult
    impact: ImpactInfo
    occluder_id: int | None
    tagging_on: bool
    visible_sets: dict[int, tuple[int, ...]] | None = None
    resolution_to_impact: float | None = None
    resolution_time: float | None = None  # absolute t_r, None if never resolved
    severity: str | None = None
    collision_type: str | None = None


def build_hypergame(
    scene: Scene,
    report: VisibilityReport,
    params: UtilityParams,
    lane_map: LaneMap,
    footprint: VehicleFootprint | None = None,
) -> HypergameL1:
    """Each vehicle's view drops every vehicle occluded from it; the resolved
    game is built over the full vehicle set."""
    footprint = footprint or VehicleFootprint()
    ids = scene.ids()
    visible_sets: dict[int, tuple[int, ...]] = {}
    views: dict[int, GameView] = {}
    for i in ids:
        n_i = tuple(j for j in ids if j == i or not report.occluded(i, j))
        visible_sets[i] = n_i
        views[i] = build_game(scene, n_i, lane_map, params, footprint)
    resolved = build_game(scene, ids, lane_map, params, footprint)
    return HypergameL1(
        base_scene=scene,
        report=report,
        visible_sets=visible_sets,
        views=views,
        resolved_game=resolved,
    )


def _surrogate_over(trajectories: dict[int, Trajectory], footprint: VehicleFootprint) -> float:
    ids = sorted(trajectories)
    profiles = [
        gap_profile(trajectories[a], trajectories[b], footprint)
        for a, b in itertools.combinations(ids, 2)
    ]
    return surrogate_s(profiles)


def compute_dor(h: HypergameL1, footprint: VehicleFootprint | None = None) -> DorResult:
    """Surrogate safety of the resolved solution minus that of the assembled
    occlusion-naive strategies, both evaluated over the full vehicle set."""
    footprint = footprint or VehicleFootprint()
    resolved_profile = solve_nash_maneuvers(h.resolved_game)
    s_resolved = _surrogate_over(resolved_profile.trajectories(), footprint)

    ids = h.base_scene.ids()
    naive_choices: dict[int, StrategyChoice] = {}
    for i in ids:
        view_solution = solve_nash_maneuvers(h.views[i])
        naive_choices[i] = view_solution.choices[i]
    naive_profile = StrategyProfile(
        players=tuple(sorted(ids)),
        choices=naive_choices,
        fallback=False,
        equilibrium_count=0,
        maneuver_cell=None,
    )
    s_naive = _surrogate_over(naive_profile.trajectories(), footprint)
    return DorResult(
        s_resolved=s_resolved,
        s_naive=s_naive,
        dor=s_resolved - s_naive,
        resolved_profile=resolved_profile,
        naive_profile=naive_profile,
    )


def classify_occ(
    scene: Scene,
    dor_result: DorResult,
    theta: float,
    lane_map: LaneMap,
    report: VisibilityReport,
    footprint: VehicleFootprint | None = None,
) -> OccRecord | None:
    """OCC iff dor >= theta and the naive rollout actually overlaps; the impact
    is the first overlapping sample of the forward simulation."""
    footprint = footprint or VehicleFootprint()
    if dor_result.dor < theta:
        return None
    if dor_result.s_naive > 0.0:
        return None
    rollout = forward_simulate(
        scene, dor_result.naive_profile.trajectories(), HORIZON, footprint=footprint
    )
    hit = find_overlap(rollout[-1], footprint)
    if hit is None:
        return None
    a, b, _ = hit
    impact = ImpactInfo(
        time=rollout[-1].time,
        pair=(a, b),
        states={v.vehicle_id: v.state for v in rollout[-1].vehicles},
    )

    occluder_id = None
    tagging_on = False
    for me, other in ((a, b), (b, a)):
        if (me, other) in report.entries and report.occluded(me, other):
            j = report.occluder_of(me, other)
            if j is not None and occluder_id is None:
                occluder_id = j
            if j is not None and leading_vehicle(me, scene, lane_map) == j:
                tagging_on = True
    return OccRecord(
        scene=scene,
        dor_result=dor_result,
        impact=impact,
        occluder_id=occluder_id,
        tagging_on=tagging_on,
    )


def resolution_check(
    record: OccRecord,
    budget: RayBudget,
    footprint: VehicleFootprint | None = None,
    a_brake: float = BRAKE_DECEL,
    cell_size: float = 0.1,
) -> bool:
    """Re-simulate the naive rollout, recomputing visibility each step; from
    the first step the colliding pair is mutually unoccluded both brake at
    a_brake. Retain (True) iff a collision still occurs; retained records get
    resolution_to_impact filled in."""
    footprint = footprint or VehicleFootprint()
    scene = record.scene
    trajs = record.dor_result.naive_profile.trajectories()
    a, b = record.impact.pair
    rollout = forward_simulate(scene, trajs, HORIZON, footprint=footprint)
    t_r = None
    for k, rolled in enumerate(rollout):
        if mutually_visible(rolled, a, b, budget, footprint, cell_size):
            t_r = k * DT
            break
    if t_r is None:
        record.resolution_to_impact = 0.0
        record.resolution_time = None
        return True
    braked = forward_simulate(
        scene,
        trajs,
        HORIZON,
        intervention=BrakeIntervention(frozenset((a, b)), t_r, a_brake),
        footprint=footprint,
    )
    retained = find_overlap(braked[-1], footprint) is not None
    if retained:
        record.resolution_time = scene.time + t_r
        record.resolution_to_impact = record.impact.time - record.resolution_time
    return retained
