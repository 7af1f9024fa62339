"""Command-line surface: staged subcommands plus the full pipeline runner.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analysis import aggregate, emit_plots
from .config import make_config
from .generator import build_speed_sampler, occlusion_guided_search, scan_naturalistic
from .occlusion import dump_debug, occlusion_indicator, rasterize
from .pipeline import (
    _rec_from_dict_for_report,
    read_scenes_jsonl,
    run_pipeline,
    validate_scenes,
    write_jsonl,
)
from .scene_model import (
    extract_situations,
    ingest_tracks,
    load_map,
    scene_to_dict,
    serialize_tracks,
)


def _add_common(p: argparse.ArgumentParser, *, tracks=True, needs_map=True):
    if tracks:
        p.add_argument("--tracks", required=True, help="track CSV file")
    if needs_map:
        p.add_argument("--map", required=True, dest="map_path", help="lane map JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--epsilon", type=int, default=None)
    p.add_argument("--grid-size", type=float, default=None, dest="cell_size")
    p.add_argument("--spacing", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--limit-scenes", type=int, default=None, dest="limit_scenes")


def _config_from(args) -> "RunConfig":
    overrides = {
        key: getattr(args, key, None)
        for key in ("seed", "epsilon", "cell_size", "spacing", "theta", "jobs", "limit_scenes")
    }
    return make_config(args.config, overrides)


def _prepare(args, cfg):
    lane_map = load_map(args.map_path)
    ds = ingest_tracks(args.tracks, lane_map, resample_dt=cfg.dt, v_max=cfg.v_max)
    situations = extract_situations(ds, lane_map)
    if cfg.limit_scenes is not None:
        situations = situations[: cfg.limit_scenes]
    return lane_map, ds, situations


def cmd_ingest(args) -> int:
    cfg = _config_from(args)
    lane_map = load_map(args.map_path)
    ds = ingest_tracks(args.tracks, lane_map, resample_dt=cfg.dt, v_max=cfg.v_max)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    canonical = out / "tracks_canonical.csv"
    serialize_tracks(ds, canonical)
    sampler = build_speed_sampler(ds, lane_map)
    with open(out / "speed_sampler.json", "w") as fh:
        json.dump(sampler.to_dict(), fh, indent=1, sort_keys=True)
    print(json.dumps({"status": "ok", "tracks": str(canonical), "vehicles": len(ds.tracks)}, sort_keys=True))
    return 0


def cmd_extract(args) -> int:
    cfg = _config_from(args)
    _, _, situations = _prepare(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "situations.jsonl"
    write_jsonl(path, [scene_to_dict(s) for s in situations])
    print(json.dumps({"status": "ok", "situations": str(path), "count": len(situations)}, sort_keys=True))
    return 0


def cmd_scan(args) -> int:
    cfg = _config_from(args)
    lane_map, _, situations = _prepare(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    budget, fp = cfg.ray_budget(), cfg.footprint()
    scenes = scan_naturalistic(situations, budget, fp, cfg.cell_size)
    path = out / "occlusion_scenes.jsonl"
    write_jsonl(path, [scene_to_dict(s) for s in scenes])
    if args.debug_dump:
        dbg = out / "debug"
        dbg.mkdir(exist_ok=True)
        for i, scene in enumerate(scenes):
            grid = rasterize(scene, cfg.cell_size, fp)
            report = occlusion_indicator(scene, budget, fp, cfg.cell_size, grid=grid)
            dump_debug(
                scene, grid, report, budget, fp,
                dbg / f"scene_{i:04d}.pgm", dbg / f"scene_{i:04d}_rays.json",
            )
    print(json.dumps({"status": "ok", "occlusion_scenes": str(path), "count": len(scenes)}, sort_keys=True))
    return 0


def cmd_inject(args) -> int:
    cfg = _config_from(args)
    lane_map, ds, situations = _prepare(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sampler = build_speed_sampler(ds, lane_map)
    scenes = occlusion_guided_search(
        situations, lane_map, cfg.injection_config(sampler), cfg.ray_budget(),
        cfg.footprint(), cfg.cell_size,
    )
    path = out / "occlusion_scenes.jsonl"
    write_jsonl(path, [scene_to_dict(s) for s in scenes])
    print(json.dumps({"status": "ok", "occlusion_scenes": str(path), "count": len(scenes)}, sort_keys=True))
    return 0


def cmd_validate(args) -> int:
    cfg = _config_from(args)
    lane_map = load_map(args.map_path)
    scenes = read_scenes_jsonl(args.scenes)
    if cfg.limit_scenes is not None:
        scenes = scenes[: cfg.limit_scenes]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = validate_scenes(scenes, lane_map, cfg, args.map_path)
    path = out / "occ_records.jsonl"
    write_jsonl(path, records)
    print(json.dumps({"status": "ok", "occ_records": str(path), "count": len(records)}, sort_keys=True))
    return 0


def cmd_analyze(args) -> int:
    cfg = _config_from(args)
    lane_map = load_map(args.map_path) if args.map_path else None

    def read_records(path):
        if not path:
            return []
        with open(path) as fh:
            return [_rec_from_dict_for_report(json.loads(ln)) for ln in fh if ln.strip()]

    records = read_records(args.records)
    scenes = read_scenes_jsonl(args.scenes) if args.scenes else []
    baseline_records = read_records(args.baseline_records)
    baseline_scenes = read_scenes_jsonl(args.baseline_scenes) if args.baseline_scenes else []
    report = aggregate(records, scenes, baseline_records, baseline_scenes, cfg.to_dict())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = emit_plots(report, records, out, lane_map)
    print(json.dumps({"status": "ok", "files": files}, sort_keys=True))
    return 0


def cmd_run(args) -> int:
    cfg = _config_from(args)
    return run_pipeline(cfg, args.tracks, args.map_path, args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dorval",
        description="Dynamic-occlusion risk validation over naturalistic intersection data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse tracks, emit canonical CSV + speed histograms")
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract", help="extract LTAP/RT situations")
    _add_common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("scan", help="detect naturalistic dynamic occlusions (no injection)")
    _add_common(p)
    p.add_argument("--debug-dump", action="store_true", help="write grid PGMs and ray JSON")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("inject", help="occlusion-guided vehicle injection")
    _add_common(p)
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("validate", help="hypergame DOR validation of occlusion scenes")
    _add_common(p, tracks=False)
    p.add_argument("--scenes", required=True, help="occlusion scenes JSONL")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", help="aggregate records into report and plots")
    _add_common(p, tracks=False, needs_map=False)
    p.add_argument("--map", default=None, dest="map_path", help="lane map JSON (for plots)")
    p.add_argument("--records", default=None, help="occ records JSONL")
    p.add_argument("--scenes", default=None, help="occlusion scenes JSONL")
    p.add_argument("--baseline-records", default=None)
    p.add_argument("--baseline-scenes", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("run", help="full pipeline incl. no-injection baseline")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(json.dumps({"status": "failed", "error": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
