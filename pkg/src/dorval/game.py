"""Simultaneous-move game construction over maneuver-expanded trajectory sets,
multi-objective utilities with lexicographic thresholding, and the two-level
solution concept: pure Nash over maneuvers, maxmax over trajectories."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .motion import Maneuver, Trajectory, admissible_maneuvers, gap_profile, generate_trajectories
from .scene_model import LaneMap, Scene, VehicleFootprint

SOCIAL_PROGRESS_WEIGHT = 1e-3


class DegeneratePlayerError(ValueError):
    def __init__(self, vehicle_id: int):
        super().__init__(f"vehicle {vehicle_id} has no feasible trajectory")
        self.vehicle_id = vehicle_id


@dataclass(frozen=True)
class UtilityParams:
    gamma: float = 0.5
    sigmoid_midpoint: float = 1.0
    sigmoid_slope: float = 1.5
    progress_norm: float = 132.0  # v_max * horizon

    def __post_init__(self):
        if not (-1.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (-1, 1)")
        if self.sigmoid_slope <= 0 or self.progress_norm <= 0:
            raise ValueError("sigmoid_slope and progress_norm must be positive")


def safety_utility(min_clearance: float, p: UtilityParams) -> float:
    """Sigmoid of the minimum clearance, mapped into (-1, 1)."""
    z = -p.sigmoid_slope * (min_clearance - p.sigmoid_midpoint)
    if z > 700.0:
        return -1.0
    return 2.0 / (1.0 + math.exp(z)) - 1.0


def progress_utility(traj: Trajectory, p: UtilityParams) -> float:
    return min(1.0, max(0.0, traj.arclength / p.progress_norm))


def lex_key(utility: tuple[float, float], gamma: float) -> tuple[float, float]:
    """Sort key realizing satisficing-at-gamma: safety is compared truncated
    at gamma; progress breaks ties among safety-satisficed outcomes."""
    safety, progress = utility
    return (min(safety, gamma), progress)


def lex_compare(a: tuple[float, float], b: tuple[float, float], gamma: float) -> int:
    """-1, 0, or 1 as a is worse than, equal to, or better than b."""
    ka, kb = lex_key(a, gamma), lex_key(b, gamma)
    if ka < kb:
        return -1
    if ka > kb:
        return 1
    return 0


@dataclass
class GameView:
    """One perspective's game: sorted players, maneuver-grouped trajectory
    actions, a shared per-cell safety table, and per-action progress."""

    players: tuple[int, ...]
    actions: dict[int, list[tuple[Maneuver, list[Trajectory]]]]
    safety: np.ndarray  # shape: (n_actions(p) for p in players)
    progress: dict[int, np.ndarray]
    params: UtilityParams

    def n_actions(self, pid: int) -> int:
        return sum(len(trajs) for _, trajs in self.actions[pid])

    def flat_actions(self, pid: int) -> list[tuple[int, int]]:
        out = []
        for mi, (_, trajs) in enumerate(self.actions[pid]):
            for ti in range(len(trajs)):
                out.append((mi, ti))
        return out

    def maneuver_groups(self, pid: int) -> list[list[int]]:
        groups = []
        base = 0
        for _, trajs in self.actions[pid]:
            groups.append(list(range(base, base + len(trajs))))
            base += len(trajs)
        return groups

    def action(self, pid: int, flat_idx: int) -> tuple[Maneuver, Trajectory]:
        mi, ti = self.flat_actions(pid)[flat_idx]
        man, trajs = self.actions[pid][mi]
        return man, trajs[ti]

    def cell_utility(self, pid: int, cell: tuple[int, ...]) -> tuple[float, float]:
        i = self.players.index(pid)
        return (float(self.safety[cell]), float(self.progress[pid][cell[i]]))


@dataclass(frozen=True)
class StrategyChoice:
    maneuver: Maneuver
    trajectory: Trajectory
    maneuver_index: int
    trajectory_index: int  # flat action index


@dataclass
class StrategyProfile:
    players: tuple[int, ...]
    choices: dict[int, StrategyChoice]
    fallback: bool = False
    equilibrium_count: int = 0
    maneuver_cell: tuple[int, ...] | None = None

    def trajectories(self) -> dict[int, Trajectory]:
        return {pid: c.trajectory for pid, c in self.choices.items()}


def build_game(
    scene: Scene,
    players,
    lane_map: LaneMap,
    params: UtilityParams,
    footprint: VehicleFootprint | None = None,
) -> GameView:
    """Action sets from maneuver-conditioned trajectory generation; the safety
    component of every joint cell is the sigmoid of the cell's minimum
    pairwise clearance (1.0 when the view has no pairs)."""
    footprint = footprint or VehicleFootprint()
    players = tuple(sorted(players))
    view = scene.restrict(players)
    actions: dict[int, list[tuple[Maneuver, list[Trajectory]]]] = {}
    flat_trajs: dict[int, list[Trajectory]] = {}
    for pid in players:
        vehicle = view.get(pid)
        groups = []
        for man in admissible_maneuvers(vehicle, view, lane_map):
            trajs = generate_trajectories(pid, view, man, lane_map, footprint)
            if trajs:
                groups.append((man, trajs))
        if not groups:
            raise DegeneratePlayerError(pid)
        actions[pid] = groups
        flat_trajs[pid] = [t for _, trajs in groups for t in trajs]

    dims = tuple(len(flat_trajs[pid]) for pid in players)
    min_clear = np.full(dims, np.inf)
    for i in range(len(players)):
        for j in range(i + 1, len(players)):
            pa, pb = players[i], players[j]
            mat = np.empty((dims[i], dims[j]))
            for a, ta in enumerate(flat_trajs[pa]):
                for b, tb in enumerate(flat_trajs[pb]):
                    mat[a, b] = gap_profile(ta, tb, footprint).min_clearance
            shape = [1] * len(players)
            shape[i], shape[j] = dims[i], dims[j]
            min_clear = np.minimum(min_clear, mat.reshape(shape))

    flat_vals = [safety_utility(g, params) for g in min_clear.ravel()]
    safety = np.array(flat_vals, dtype=np.float64).reshape(dims)
    progress = {
        pid: np.array([progress_utility(t, params) for t in flat_trajs[pid]])
        for pid in players
    }
    return GameView(players=players, actions=actions, safety=safety, progress=progress, params=params)


def _profile_from_cell(g: GameView, cell: tuple[int, ...], *, fallback: bool,
                       equilibrium_count: int, maneuver_cell=None) -> StrategyProfile:
    choices = {}
    for i, pid in enumerate(g.players):
        man, traj = g.action(pid, cell[i])
        mi, _ = g.flat_actions(pid)[cell[i]]
        choices[pid] = StrategyChoice(
            maneuver=man, trajectory=traj, maneuver_index=mi, trajectory_index=cell[i]
        )
    return StrategyProfile(
        players=g.players,
        choices=choices,
        fallback=fallback,
        equilibrium_count=equilibrium_count,
        maneuver_cell=maneuver_cell,
    )


def _maxmax_cell(g: GameView, index_lists) -> tuple[int, ...]:
    """Each player's component of its own lex-best joint cell; cells iterate in
    lexicographic index order so ties resolve to the lowest trajectory index."""
    gamma = g.params.gamma
    best_key = {pid: None for pid in g.players}
    best_cell = {pid: None for pid in g.players}
    for cell in itertools.product(*index_lists):
        s = float(g.safety[cell])
        for i, pid in enumerate(g.players):
            key = lex_key((s, float(g.progress[pid][cell[i]])), gamma)
            if best_key[pid] is None or key > best_key[pid]:
                best_key[pid] = key
                best_cell[pid] = cell
    return tuple(best_cell[pid][i] for i, pid in enumerate(g.players))


def solve_maxmax(g: GameView, within: tuple[int, ...] | None = None) -> StrategyProfile:
    """Optimistic trajectory selection inside a joint maneuver cell (or the
    whole game when `within` is None)."""
    if within is None:
        index_lists = [range(len(g.flat_actions(pid))) for pid in g.players]
    else:
        index_lists = [
            g.maneuver_groups(pid)[within[i]] for i, pid in enumerate(g.players)
        ]
    cell = _maxmax_cell(g, index_lists)
    return _profile_from_cell(
        g, cell, fallback=False, equilibrium_count=0, maneuver_cell=within
    )


def _maneuver_table(g: GameView):
    """Maneuver-level payoffs at each cell's maxmax trajectory resolution."""
    groups = [g.maneuver_groups(pid) for pid in g.players]
    man_dims = [len(gr) for gr in groups]
    table: dict[tuple[int, ...], dict] = {}
    for man_cell in itertools.product(*(range(d) for d in man_dims)):
        index_lists = [groups[i][man_cell[i]] for i in range(len(g.players))]
        resolved = _maxmax_cell(g, index_lists)
        s = float(g.safety[resolved])
        payoffs = tuple(
            (s, float(g.progress[pid][resolved[i]])) for i, pid in enumerate(g.players)
        )
        table[man_cell] = {"resolved": resolved, "payoffs": payoffs}
    return table, man_dims


def enumerate_pure_nash(g: GameView) -> list[tuple[int, ...]]:
    """All pure-strategy maneuver-level Nash equilibria under lex_compare."""
    table, man_dims = _maneuver_table(g)
    gamma = g.params.gamma
    out = []
    for cell, info in sorted(table.items()):
        is_ne = True
        for i in range(len(g.players)):
            here = info["payoffs"][i]
            for alt in range(man_dims[i]):
                if alt == cell[i]:
                    continue
                dev = list(cell)
                dev[i] = alt
                dev_pay = table[tuple(dev)]["payoffs"][i]
                if lex_compare(dev_pay, here, gamma) > 0:
                    is_ne = False
                    break
            if not is_ne:
                break
        if is_ne:
            out.append(cell)
    return out


def solve_nash_maneuvers(g: GameView) -> StrategyProfile:
    """Pure Nash over maneuvers with maxmax trajectory resolution; equilibrium
    multiplicity resolved by maximal scalarized social welfare then lowest
    maneuver index; no pure equilibrium falls back to full-game maxmax."""
    table, _ = _maneuver_table(g)
    equilibria = enumerate_pure_nash(g)
    if not equilibria:
        profile = solve_maxmax(g, within=None)
        profile.fallback = True
        profile.equilibrium_count = 0
        return profile
    best_cell, best_social = None, -math.inf
    for cell in equilibria:  # already in lexicographic order
        payoffs = table[cell]["payoffs"]
        social = 0.0
        for s, pr in payoffs:
            social += s + SOCIAL_PROGRESS_WEIGHT * pr
        if social > best_social:
            best_social = social
            best_cell = cell
    resolved = table[best_cell]["resolved"]
    return _profile_from_cell(
        g,
        resolved,
        fallback=False,
        equilibrium_count=len(equilibria),
        maneuver_cell=best_cell,
    )


def game_to_dict(g: GameView) -> dict:
    """White-box dump: players, maneuver sets, per-cell utilities."""
    cells = []
    for cell in itertools.product(*(range(len(g.flat_actions(p))) for p in g.players)):
        cells.append(
            {
                "cell": list(cell),
                "safety": float(g.safety[cell]),
                "progress": [
                    float(g.progress[pid][cell[i]]) for i, pid in enumerate(g.players)
                ],
            }
        )
    return {
        "players": list(g.players),
        "actions": {
            str(pid): [
                {"maneuver": man.kind, "trajectories": len(trajs)}
                for man, trajs in g.actions[pid]
            ]
            for pid in g.players
        },
        "cells": cells,
        "params": {
            "gamma": g.params.gamma,
            "sigmoid_midpoint": g.params.sigmoid_midpoint,
            "sigmoid_slope": g.params.sigmoid_slope,
            "progress_norm": g.params.progress_norm,
        },
    }
