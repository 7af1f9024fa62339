"""Occlusion detection: occupancy-grid rasterization, grid raycasting, and the
per-pair visibility report with distance-scaled ray budgets."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .geometry import normalize_angle, rect_corners
from .scene_model import Scene, VehicleFootprint

MAX_GRID_CELLS = 400_000_000
DEFAULT_CELL_SIZE = 0.1


class GridTooLargeError(MemoryError):
    pass


@dataclass(frozen=True)
class RayBudget:
    """Raycasting parameters; n(i,k) = clamp(round(k_att/dist), n_min, n_max)."""

    n_min: int = 5
    n_max: int = 64
    k_att: float = 400.0
    epsilon: int = 3

    def __post_init__(self):
        if not (1 <= self.n_min <= self.n_max):
            raise ValueError("require 1 <= n_min <= n_max")
        if self.epsilon < 1:
            raise ValueError("epsilon must be >= 1")

    def n_rays(self, dist: float) -> int:
        if dist <= 0.0:
            return self.n_max
        n = int(math.floor(self.k_att / dist + 0.5))
        return min(self.n_max, max(self.n_min, n))


@dataclass
class OccupancyGrid:
    """Int grid of vehicle indices (-1 empty); origin snapped to the cell
    lattice so adding vehicles never moves existing cell boundaries."""

    cell_size: float
    origin: tuple[float, float]
    cells: np.ndarray  # int32 (h, w)
    id_map: tuple[int, ...]  # cell value -> vehicle id

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def index_of(self, vehicle_id: int) -> int:
        return self.id_map.index(vehicle_id)

    def occupied_count(self) -> int:
        return int(np.count_nonzero(self.cells >= 0))

    def contains_point(self, x: float, y: float) -> bool:
        ox, oy = self.origin
        h, w = self.cells.shape
        return ox <= x < ox + w * self.cell_size and oy <= y < oy + h * self.cell_size


def grid_bounds_for(
    scene: Scene,
    footprint: VehicleFootprint,
    cell_size: float,
    pad: float,
):
    xs, ys = [], []
    for v in scene.vehicles:
        for cx, cy in footprint.corners(v.state):
            xs.append(cx)
            ys.append(cy)
    minx = math.floor((min(xs) - pad) / cell_size) * cell_size
    miny = math.floor((min(ys) - pad) / cell_size) * cell_size
    maxx = max(xs) + pad
    maxy = max(ys) + pad
    w = int(math.ceil((maxx - minx) / cell_size)) + 1
    h = int(math.ceil((maxy - miny) / cell_size)) + 1
    return (minx, miny), (h, w)


def rasterize(
    scene: Scene,
    cell_size: float = DEFAULT_CELL_SIZE,
    footprint: VehicleFootprint | None = None,
    pad: float | None = None,
    max_cells: int = MAX_GRID_CELLS,
) -> OccupancyGrid:
    """Mark every cell whose center lies inside a vehicle footprint."""
    footprint = footprint or VehicleFootprint()
    if pad is None:
        pad = 2.0 * footprint.diagonal + 1.0
    if not scene.vehicles:
        return OccupancyGrid(cell_size, (0.0, 0.0), np.full((1, 1), -1, np.int32), ())
    origin, (h, w) = grid_bounds_for(scene, footprint, cell_size, pad)
    if h * w > max_cells:
        raise GridTooLargeError(f"grid {h}x{w} exceeds {max_cells} cells")
    cells = np.full((h, w), -1, dtype=np.int32)
    ids = tuple(v.vehicle_id for v in scene.vehicles)
    for idx, v in enumerate(scene.vehicles):
        _kernels.rasterize_rect(
            cells, origin[0], origin[1], cell_size,
            v.state.x, v.state.y, v.state.yaw,
            footprint.length, footprint.width, idx,
        )
    return OccupancyGrid(cell_size, origin, cells, ids)


def cast_ray(grid: OccupancyGrid, frm, to, ignore=frozenset()):
    """First non-ignored vehicle hit along the segment, else None."""
    if frm == to:
        raise ValueError("degenerate ray")
    ignore_idx = np.array(
        sorted(grid.id_map.index(v) for v in ignore if v in grid.id_map),
        dtype=np.int64,
    )
    hit = _kernels.raycast_first_hit(
        grid.cells, grid.origin[0], grid.origin[1], grid.cell_size,
        frm[0], frm[1], to[0], to[1], ignore_idx,
    )
    return None if hit < 0 else grid.id_map[hit]


def fan_inset(cell_size: float) -> float:
    """Erosion applied to the target footprint when computing the fan's
    subtended interval: two cells keeps the extreme rays clear of the
    rasterization's receding corners (occupied cells can fall short of the
    true boundary by up to cell/sqrt(2))."""
    return 2.0 * cell_size


def ray_fan(observer_xy, target_state, footprint: VehicleFootprint, n: int,
            inset: float = 0.0):
    """n ray segments from the observer centroid spread uniformly (endpoints
    inclusive) across the angular interval subtended by the target footprint,
    optionally eroded by `inset` for discretization safety."""
    ox, oy = observer_xy
    tx, ty = target_state.x, target_state.y
    center = math.atan2(ty - oy, tx - ox)
    dist = math.sqrt((tx - ox) ** 2 + (ty - oy) ** 2)
    length = max(footprint.length - 2.0 * inset, 0.5 * footprint.length)
    width = max(footprint.width - 2.0 * inset, 0.5 * footprint.width)
    lo, hi = 0.0, 0.0
    for cx, cy in rect_corners(tx, ty, target_state.yaw, length, width):
        d = normalize_angle(math.atan2(cy - oy, cx - ox) - center)
        lo = min(lo, d)
        hi = max(hi, d)
    ray_len = dist + footprint.diagonal
    rays = []
    for j in range(n):
        frac = 0.5 if n == 1 else j / (n - 1)
        ang = center + lo + frac * (hi - lo)
        rays.append((ox, oy, ox + ray_len * math.cos(ang), oy + ray_len * math.sin(ang)))
    return rays


@dataclass(frozen=True)
class PairVisibility:
    n_rays: int
    hit_count: int
    occluded: bool
    occluder: int | None


@dataclass
class VisibilityReport:
    """Visibility of every ordered (observer, target) pair in one scene."""

    epsilon: int
    entries: dict[tuple[int, int], PairVisibility] = field(default_factory=dict)

    def occluded(self, observer: int, target: int) -> bool:
        return self.entries[(observer, target)].occluded

    def occluder_of(self, observer: int, target: int):
        return self.entries[(observer, target)].occluder

    def hidden_from(self, observer: int) -> set[int]:
        return {
            k for (i, k), e in self.entries.items() if i == observer and e.occluded
        }

    def any_occlusion(self) -> bool:
        return any(e.occluded for e in self.entries.values())

    def occluded_pairs(self) -> list[tuple[int, int]]:
        return sorted(k for k, e in self.entries.items() if e.occluded)


def _pair_visibility(
    scene: Scene,
    grid: OccupancyGrid,
    observer_id: int,
    target_id: int,
    budget: RayBudget,
    footprint: VehicleFootprint,
) -> PairVisibility:
    obs = scene.get(observer_id).state
    tgt = scene.get(target_id)
    dist = math.sqrt((tgt.state.x - obs.x) ** 2 + (tgt.state.y - obs.y) ** 2)
    n = budget.n_rays(dist)
    if dist < footprint.length:
        # degenerate fan: adjacent targets are always visible
        return PairVisibility(n_rays=n, hit_count=n, occluded=False, occluder=None)
    hits = 0
    blockers: dict[int, int] = {}
    inset = fan_inset(grid.cell_size)
    for x0, y0, x1, y1 in ray_fan((obs.x, obs.y), tgt.state, footprint, n, inset):
        first = cast_ray(grid, (x0, y0), (x1, y1), ignore={observer_id})
        if first == target_id:
            hits += 1
        elif first is not None:
            blockers[first] = blockers.get(first, 0) + 1
    occluded = hits < budget.epsilon
    occluder = None
    if occluded and blockers:
        occluder = max(sorted(blockers), key=lambda v: blockers[v])
    return PairVisibility(n_rays=n, hit_count=hits, occluded=occluded, occluder=occluder)


def occlusion_indicator(
    scene: Scene,
    budget: RayBudget,
    footprint: VehicleFootprint | None = None,
    cell_size: float = DEFAULT_CELL_SIZE,
    grid: OccupancyGrid | None = None,
    pairs=None,
) -> VisibilityReport:
    """Raycast visibility for every ordered pair (or the given pairs)."""
    footprint = footprint or VehicleFootprint()
    if grid is None:
        grid = rasterize(scene, cell_size, footprint)
    report = VisibilityReport(epsilon=budget.epsilon)
    ids = scene.ids()
    if pairs is None:
        pairs = [(i, k) for i in ids for k in ids if i != k]
    for i, k in pairs:
        report.entries[(i, k)] = _pair_visibility(scene, grid, i, k, budget, footprint)
    return report


def mutually_visible(
    scene: Scene,
    a: int,
    b: int,
    budget: RayBudget,
    footprint: VehicleFootprint | None = None,
    cell_size: float = DEFAULT_CELL_SIZE,
) -> bool:
    rep = occlusion_indicator(
        scene, budget, footprint, cell_size, pairs=[(a, b), (b, a)]
    )
    return not rep.occluded(a, b) and not rep.occluded(b, a)


def dump_debug(
    scene: Scene,
    grid: OccupancyGrid,
    report: VisibilityReport,
    budget: RayBudget,
    footprint: VehicleFootprint,
    pgm_path,
    rays_path,
):
    """Grid as PGM plus the ray fans with first hits, for visual inspection."""
    h, w = grid.cells.shape
    with open(pgm_path, "wb") as fh:
        fh.write(f"P5 {w} {h} 255\n".encode())
        img = np.where(grid.cells >= 0, 0, 255).astype(np.uint8)
        fh.write(img[::-1].tobytes())  # north-up
    rays_out = []
    for (i, k), entry in sorted(report.entries.items()):
        obs = scene.get(i).state
        tgt = scene.get(k)
        for x0, y0, x1, y1 in ray_fan(
            (obs.x, obs.y), tgt.state, footprint, entry.n_rays, fan_inset(grid.cell_size)
        ):
            first = cast_ray(grid, (x0, y0), (x1, y1), ignore={i})
            rays_out.append(
                {
                    "observer": i,
                    "target": k,
                    "origin": [x0, y0],
                    "end": [x1, y1],
                    "first_hit": first,
                }
            )
    with open(rays_path, "w") as fh:
        json.dump(rays_out, fh, indent=1, sort_keys=True)
