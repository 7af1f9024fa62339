"""Occlusion-guided random search: grid-sample candidate occluding vehicles
along lane centerlines, inject the ones that create an occlusion among the
original vehicles, and accumulate the occlusion scene set."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .occlusion import OccupancyGrid, RayBudget, occlusion_indicator, rasterize
from .scene_model import (
    ROLE_INJECTED,
    LaneMap,
    Scene,
    SceneVehicle,
    TrackDataset,
    VehicleFootprint,
    VehicleState,
)

SPEED_BIN = 1.0


@dataclass
class SpeedSampler:
    """Empirical 1 m/s-bin speed histogram per lane, built from ingested data;
    lanes without observations fall back to uniform[0, speed_limit]."""

    histograms: dict[str, np.ndarray]  # lane_id -> bin probabilities
    speed_limits: dict[str, float]
    bin_width: float = SPEED_BIN

    def __post_init__(self):
        for lane_id, probs in self.histograms.items():
            total = float(np.sum(probs))
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"lane {lane_id}: histogram probabilities sum to {total}")

    def sample(self, lane_id: str, rng: np.random.Generator) -> float:
        probs = self.histograms.get(lane_id)
        if probs is None or len(probs) == 0:
            return float(rng.random() * self.speed_limits[lane_id])
        u = rng.random()
        acc = 0.0
        idx = len(probs) - 1
        for i, p in enumerate(probs):
            acc += float(p)
            if u < acc:
                idx = i
                break
        return float((idx + rng.random()) * self.bin_width)

    def to_dict(self) -> dict:
        return {
            "bin_width": self.bin_width,
            "histograms": {k: [float(p) for p in v] for k, v in sorted(self.histograms.items())},
            "speed_limits": {k: float(v) for k, v in sorted(self.speed_limits.items())},
        }


def build_speed_sampler(ds: TrackDataset, lane_map: LaneMap) -> SpeedSampler:
    speeds: dict[str, list[float]] = {}
    for vid in sorted(ds.tracks):
        tr = ds.tracks[vid]
        for st, lane_id in zip(tr.states, tr.lane_ids):
            speeds.setdefault(lane_id, []).append(st.speed)
    histograms = {}
    for lane_id, vals in speeds.items():
        n_bins = int(math.floor(max(vals) / SPEED_BIN)) + 1
        hist = np.zeros(n_bins)
        for v in vals:
            hist[min(int(v // SPEED_BIN), n_bins - 1)] += 1.0
        histograms[lane_id] = hist / hist.sum()
    limits = {lid: lane_map.lanes[lid].speed_limit for lid in lane_map.lanes}
    return SpeedSampler(histograms=histograms, speed_limits=limits)


@dataclass(frozen=True)
class InjectionConfig:
    spacing: float = 2.0
    min_gap: float = 1.0
    speed_sampler: SpeedSampler | None = None
    rng_seed: int = 0
    region_pad: float = 50.0

    def __post_init__(self):
        if self.spacing <= 0 or self.min_gap < 0:
            raise ValueError("spacing must be > 0 and min_gap >= 0")


@dataclass(frozen=True)
class CandidateOV:
    index: int
    lane_id: str
    arclength: float
    state: VehicleState


def _candidate_rng(seed: int, scene_index: int, candidate_index: int) -> np.random.Generator:
    # split per (scene, candidate) so parallel and serial runs agree
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(scene_index, candidate_index))
    return np.random.default_rng(ss)


def sample_candidates(
    scene: Scene,
    lane_map: LaneMap,
    cfg: InjectionConfig,
    footprint: VehicleFootprint | None = None,
) -> list[CandidateOV]:
    """Grid positions every `spacing` meters along each lane centerline inside
    the scene's bounding region, keeping those min_gap clear of every existing
    footprint; speeds come from the per-lane sampler with a seeded RNG."""
    footprint = footprint or VehicleFootprint()
    scene_index = int(scene.provenance.get("source_index", 0))
    xs = [v.state.x for v in scene.vehicles]
    ys = [v.state.y for v in scene.vehicles]
    x_lo, x_hi = min(xs) - cfg.region_pad, max(xs) + cfg.region_pad
    y_lo, y_hi = min(ys) - cfg.region_pad, max(ys) + cfg.region_pad

    out: list[CandidateOV] = []
    counter = 0
    for lane_id in sorted(lane_map.lanes):
        path = lane_map.lanes[lane_id].centerline
        n_pos = int(math.floor(path.length / cfg.spacing + 1e-9)) + 1
        for k in range(n_pos):
            s = k * cfg.spacing
            x, y = path.point_at(s)
            idx = counter
            counter += 1
            if not (x_lo <= x <= x_hi and y_lo <= y <= y_hi):
                continue
            yaw = path.heading_at(s)
            clear = True
            for v in scene.vehicles:
                c = _kernels.rect_clearance(
                    x, y, yaw, footprint.length, footprint.width,
                    v.state.x, v.state.y, v.state.yaw, footprint.length, footprint.width,
                )
                if c < cfg.min_gap:
                    clear = False
                    break
            if not clear:
                continue
            rng = _candidate_rng(cfg.rng_seed, scene_index, idx)
            if cfg.speed_sampler is not None:
                speed = cfg.speed_sampler.sample(lane_id, rng)
            else:
                speed = float(rng.random() * lane_map.lanes[lane_id].speed_limit)
            state = VehicleState(x=x, y=y, vx=0.0, vy=speed, ax=0.0, ay=0.0, yaw=yaw)
            out.append(CandidateOV(index=idx, lane_id=lane_id, arclength=s, state=state))
    return out


def _inject(scene: Scene, cand: CandidateOV, cfg: InjectionConfig) -> tuple[Scene, int]:
    ov_id = max(scene.ids()) + 1
    augmented = scene.with_vehicle(
        SceneVehicle(vehicle_id=ov_id, state=cand.state, lane_id=cand.lane_id, role=ROLE_INJECTED)
    )
    prov = dict(scene.provenance)
    prov["candidate_index"] = cand.index
    prov["seed"] = cfg.rng_seed
    augmented.provenance.clear()
    augmented.provenance.update(prov)
    return augmented, ov_id


def occlusion_caused_by(
    scene: Scene,
    cand: CandidateOV,
    cfg: InjectionConfig,
    budget: RayBudget,
    footprint: VehicleFootprint,
    grid: OccupancyGrid,
) -> Scene | None:
    """Emitted scene copy iff injecting the candidate occludes some original
    pair with the candidate as the plurality occluder. The candidate is
    rasterized into the shared grid and erased before returning."""
    augmented, ov_id = _inject(scene, cand, cfg)
    grid_ids = grid.id_map + (ov_id,)
    aug_grid = OccupancyGrid(grid.cell_size, grid.origin, grid.cells, grid_ids)
    ov_idx = len(grid_ids) - 1
    _kernels.rasterize_rect(
        grid.cells, grid.origin[0], grid.origin[1], grid.cell_size,
        cand.state.x, cand.state.y, cand.state.yaw,
        footprint.length, footprint.width, ov_idx,
    )
    try:
        ids = scene.ids()
        pairs = [(i, k) for i in ids for k in ids if i != k]
        report = occlusion_indicator(
            augmented, budget, footprint, grid.cell_size, grid=aug_grid, pairs=pairs
        )
        for (i, k) in pairs:
            e = report.entries[(i, k)]
            if e.occluded and e.occluder == ov_id:
                augmented.check_disjoint(footprint)
                return augmented
        return None
    finally:
        _kernels.rasterize_rect(
            grid.cells, grid.origin[0], grid.origin[1], grid.cell_size,
            cand.state.x, cand.state.y, cand.state.yaw,
            footprint.length, footprint.width, -1,
        )


def occlusion_guided_search(
    scenes,
    lane_map: LaneMap,
    cfg: InjectionConfig,
    budget: RayBudget,
    footprint: VehicleFootprint | None = None,
    cell_size: float = 0.1,
) -> list[Scene]:
    """Algorithm: for every scene and candidate, inject the candidate when it
    occludes an original pair; one emitted copy per occluding candidate."""
    footprint = footprint or VehicleFootprint()
    out: list[Scene] = []
    for scene in scenes:
        candidates = sample_candidates(scene, lane_map, cfg, footprint)
        if not candidates:
            continue
        grid = _region_grid(scene, candidates, footprint, cell_size)
        for cand in candidates:
            emitted = occlusion_caused_by(scene, cand, cfg, budget, footprint, grid)
            if emitted is not None:
                out.append(emitted)
    return out


def _region_grid(scene, candidates, footprint, cell_size) -> OccupancyGrid:
    """One grid covering the scene and every candidate (plus ray margin), so
    candidate tests rasterize into a shared lattice-aligned canvas."""
    from .occlusion import MAX_GRID_CELLS, GridTooLargeError

    pad = 2.0 * footprint.diagonal + 1.0
    xs = [v.state.x for v in scene.vehicles] + [c.state.x for c in candidates]
    ys = [v.state.y for v in scene.vehicles] + [c.state.y for c in candidates]
    minx = math.floor((min(xs) - pad - footprint.diagonal) / cell_size) * cell_size
    miny = math.floor((min(ys) - pad - footprint.diagonal) / cell_size) * cell_size
    maxx = max(xs) + pad + footprint.diagonal
    maxy = max(ys) + pad + footprint.diagonal
    w = int(math.ceil((maxx - minx) / cell_size)) + 1
    h = int(math.ceil((maxy - miny) / cell_size)) + 1
    if h * w > MAX_GRID_CELLS:
        raise GridTooLargeError(f"grid {h}x{w} exceeds {MAX_GRID_CELLS} cells")
    cells = np.full((h, w), -1, dtype=np.int32)
    ids = tuple(v.vehicle_id for v in scene.vehicles)
    for idx, v in enumerate(scene.vehicles):
        _kernels.rasterize_rect(
            cells, minx, miny, cell_size,
            v.state.x, v.state.y, v.state.yaw,
            footprint.length, footprint.width, idx,
        )
    return OccupancyGrid(cell_size, (minx, miny), cells, ids)


def scan_naturalistic(
    scenes,
    budget: RayBudget,
    footprint: VehicleFootprint | None = None,
    cell_size: float = 0.1,
) -> list[Scene]:
    """Scenes already containing a dynamic occlusion, without any injection
    (the baseline arm of the comparison)."""
    footprint = footprint or VehicleFootprint()
    out = []
    for scene in scenes:
        if len(scene.vehicles) < 2:
            continue
        report = occlusion_indicator(scene, budget, footprint, cell_size)
        if report.any_occlusion():
            out.append(scene)
    return out
