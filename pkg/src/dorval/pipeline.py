"""Pipeline orchestration: ingest, extract, scan/inject, hypergame validation
with the resolution check, and report emission. Output ordering is canonical
so parallel and serial runs produce identical bytes."""

from __future__ import annotations

import json
import multiprocessing
import traceback
from pathlib import Path

from .analysis import aggregate, annotate, emit_plots
from .config import RunConfig
from .game import game_to_dict
from .generator import build_speed_sampler, occlusion_guided_search, scan_naturalistic
from .hypergame import (
    OccRecord,
    build_hypergame,
    classify_occ,
    compute_dor,
    resolution_check,
)
from .motion import dump_trajectories
from .occlusion import occlusion_indicator
from .scene_model import (
    LaneMap,
    Scene,
    extract_situations,
    ingest_tracks,
    load_map,
    scene_from_dict,
    scene_to_dict,
    serialize_tracks,
)

FAILED_MARKER = "FAILED"


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def _choice_dict(choice) -> dict:
    return {
        "maneuver": choice.maneuver.kind,
        "lane": choice.maneuver.lane_id,
        "maneuver_index": choice.maneuver_index,
        "trajectory_index": choice.trajectory_index,
        "end_speed": choice.trajectory.end_speed if choice.trajectory is not None else None,
    }


def _profile_dict(profile) -> dict:
    return {
        "choices": {str(pid): _choice_dict(c) for pid, c in sorted(profile.choices.items())},
        "fallback": profile.fallback,
        "equilibrium_count": profile.equilibrium_count,
    }


def record_to_dict(rec: OccRecord) -> dict:
    state_dict = lambda st: {
        "x": st.x, "y": st.y, "vx": st.vx, "vy": st.vy,
        "ax": st.ax, "ay": st.ay, "yaw": st.yaw,
    }
    return {
        "scene": scene_to_dict(rec.scene),
        "views": {
            str(k): list(v) for k, v in sorted((rec.visible_sets or {}).items())
        },
        "dor": rec.dor_result.dor,
        "s_resolved": rec.dor_result.s_resolved,
        "s_naive": rec.dor_result.s_naive,
        "resolved_profile": _profile_dict(rec.dor_result.resolved_profile),
        "naive_profile": _profile_dict(rec.dor_result.naive_profile),
        "impact": {
            "time": rec.impact.time,
            "pair": list(rec.impact.pair),
            "states": {str(vid): state_dict(st) for vid, st in sorted(rec.impact.states.items())},
        },
        "occluder_id": rec.occluder_id,
        "tagging_on": rec.tagging_on,
        "resolution_time": rec.resolution_time,
        "resolution_to_impact": rec.resolution_to_impact,
        "severity": rec.severity,
        "collision_type": rec.collision_type,
    }


def validate_scene(scene: Scene, lane_map: LaneMap, cfg: RunConfig):
    """Full per-scene check: visibility, hypergame, DOR, OCC classification,
    resolution check. Returns (OccRecord | None, hypergame | None)."""
    if len(scene.vehicles) < 2:
        return None, None
    budget = cfg.ray_budget()
    params = cfg.utility_params()
    fp = cfg.footprint()
    report = occlusion_indicator(scene, budget, fp, cfg.cell_size)
    h = build_hypergame(scene, report, params, lane_map, fp)
    dor = compute_dor(h, fp)
    rec = classify_occ(scene, dor, cfg.theta, lane_map, report, fp)
    if rec is None:
        return None, h
    rec.visible_sets = h.visible_sets
    if not resolution_check(rec, budget, fp, cfg.a_brake, cfg.cell_size):
        return None, h
    annotate(rec, fp)
    return rec, h


_WORKER_CTX: dict = {}


def _init_worker(map_path: str, cfg_dict: dict):
    _WORKER_CTX["lane_map"] = load_map(map_path)
    _WORKER_CTX["cfg"] = RunConfig(**cfg_dict)


def _worker(args):
    idx, scene_dict = args
    scene = scene_from_dict(scene_dict)
    rec, _ = validate_scene(scene, _WORKER_CTX["lane_map"], _WORKER_CTX["cfg"])
    return idx, (record_to_dict(rec) if rec is not None else None)


def validate_scenes(
    scenes: list[Scene],
    lane_map: LaneMap,
    cfg: RunConfig,
    map_path=None,
) -> list[dict]:
    """Order-canonical validation of a scene list; `jobs` > 1 fans out across
    processes (map_path required so workers can rebuild the lane map)."""
    if cfg.jobs > 1 and map_path is not None and len(scenes) > 1:
        args = [(i, scene_to_dict(s)) for i, s in enumerate(scenes)]
        with multiprocessing.Pool(
            processes=cfg.jobs,
            initializer=_init_worker,
            initargs=(str(map_path), cfg.to_dict()),
        ) as pool:
            results = pool.map(_worker, args, chunksize=1)
        results.sort(key=lambda r: r[0])
        return [r[1] for r in results if r[1] is not None]
    out = []
    for scene in scenes:
        rec, _ = validate_scene(scene, lane_map, cfg)
        if rec is not None:
            out.append(record_to_dict(rec))
    return out


def write_jsonl(path, dicts):
    with open(path, "w") as fh:
        for d in dicts:
            fh.write(json.dumps(d, sort_keys=True) + "\n")


def read_scenes_jsonl(path) -> list[Scene]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(scene_from_dict(json.loads(line)))
    return out


def _write_failed(out_dir: Path, stage: str, exc: BaseException):
    out_dir.mkdir(parents=True, exist_ok=True)
    err = {
        "stage": stage,
        "error": str(exc),
        "type": type(exc).__name__,
        "traceback": traceback.format_exc(),
    }
    with open(out_dir / "error.json", "w") as fh:
        json.dump(err, fh, indent=1, sort_keys=True)
    (out_dir / FAILED_MARKER).write_text(f"{stage}: {exc}\n")


def run_pipeline(cfg: RunConfig, tracks_path, map_path, out_dir) -> int:
    """Full run: situations, baseline scan, injection, validation of both arms,
    aggregate report and plots. Returns the process exit status."""
    out = Path(out_dir)
    stage = "setup"
    try:
        out.mkdir(parents=True, exist_ok=True)
        failed = out / FAILED_MARKER
        if failed.exists():
            failed.unlink()

        stage = "ingest"
        lane_map = load_map(map_path)
        ds = ingest_tracks(
            tracks_path, lane_map, resample_dt=cfg.dt, v_max=cfg.v_max
        )

        stage = "extract"
        situations = extract_situations(ds, lane_map)
        if cfg.limit_scenes is not None:
            situations = situations[: cfg.limit_scenes]
        write_jsonl(out / "situations.jsonl", [scene_to_dict(s) for s in situations])

        budget = cfg.ray_budget()
        fp = cfg.footprint()

        stage = "scan"
        baseline_scenes = scan_naturalistic(situations, budget, fp, cfg.cell_size)
        write_jsonl(
            out / "baseline_occlusion_scenes.jsonl",
            [scene_to_dict(s) for s in baseline_scenes],
        )

        stage = "inject"
        sampler = build_speed_sampler(ds, lane_map)
        inj_cfg = cfg.injection_config(sampler)
        occlusion_scenes = occlusion_guided_search(
            situations, lane_map, inj_cfg, budget, fp, cfg.cell_size
        )
        write_jsonl(
            out / "occlusion_scenes.jsonl", [scene_to_dict(s) for s in occlusion_scenes]
        )
        with open(out / "speed_sampler.json", "w") as fh:
            json.dump(sampler.to_dict(), fh, indent=1, sort_keys=True)

        stage = "validate"
        records = validate_scenes(occlusion_scenes, lane_map, cfg, map_path)
        write_jsonl(out / "occ_records.jsonl", records)
        baseline_records = validate_scenes(baseline_scenes, lane_map, cfg, map_path)
        write_jsonl(out / "baseline_occ_records.jsonl", baseline_records)

        stage = "analyze"
        report = aggregate(
            [_rec_from_dict_for_report(r) for r in records],
            occlusion_scenes,
            [_rec_from_dict_for_report(r) for r in baseline_records],
            baseline_scenes,
            parameters=cfg.to_dict(),
        )
        emit_plots(report, [_rec_from_dict_for_report(r) for r in records], out, lane_map)
        with open(out / "run_config.json", "w") as fh:
            json.dump(cfg.to_dict(), fh, indent=1, sort_keys=True)

        manifest = {
            "status": "ok",
            "outputs": {
                "situations": str(out / "situations.jsonl"),
                "occlusion_scenes": str(out / "occlusion_scenes.jsonl"),
                "baseline_occlusion_scenes": str(out / "baseline_occlusion_scenes.jsonl"),
                "occ_records": str(out / "occ_records.jsonl"),
                "baseline_occ_records": str(out / "baseline_occ_records.jsonl"),
                "report": str(out / "report.json"),
                "summary": str(out / "summary.txt"),
                "plots": str(out / "plots"),
                "run_config": str(out / "run_config.json"),
            },
            "config": cfg.to_dict(),
        }
        with open(out / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)
        print(json.dumps(manifest, sort_keys=True))
        return 0
    except Exception as exc:  # structured failure surface for the CLI
        _write_failed(out, stage, exc)
        print(json.dumps({"status": "failed", "stage": stage, "error": str(exc)}))
        return 1


def _rec_from_dict_for_report(d: dict) -> OccRecord:
    """Rehydrate the fields aggregate/emit_plots need from a record dict
    (profiles are not reconstructed; dor_result stays None)."""
    from .hypergame import ImpactInfo
    from .scene_model import VehicleState

    impact = ImpactInfo(
        time=d["impact"]["time"],
        pair=tuple(d["impact"]["pair"]),
        states={int(v): VehicleState(**st) for v, st in d["impact"]["states"].items()},
    )
    return OccRecord(
        scene=scene_from_dict(d["scene"]),
        dor_result=None,
        impact=impact,
        occluder_id=d["occluder_id"],
        tagging_on=d["tagging_on"],
        visible_sets={int(k): tuple(v) for k, v in d.get("views", {}).items()},
        resolution_to_impact=d["resolution_to_impact"],
        resolution_time=d["resolution_time"],
        severity=d["severity"],
        collision_type=d["collision_type"],
    )


def dump_record_games(records_with_games, out_dir):
    """White-box audit trail: resolved and per-view game tables per record."""
    games_dir = Path(out_dir) / "games"
    games_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, (rec, h) in enumerate(records_with_games):
        payload = {
            "resolved": game_to_dict(h.resolved_game),
            "views": {str(pid): game_to_dict(g) for pid, g in sorted(h.views.items())},
            "dor": rec.dor_result.dor,
        }
        p = games_dir / f"record_{k:04d}.json"
        with open(p, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
        paths.append(str(p))
    return paths


def dump_record_trajectories(records: list[OccRecord], out_dir):
    traj_dir = Path(out_dir) / "trajectories"
    traj_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, rec in enumerate(records):
        p = traj_dir / f"record_{k:04d}_naive.csv"
        dump_trajectories(rec.dor_result.naive_profile.trajectories(), p)
        paths.append(str(p))
    return paths
