"""Command line driver: slm synth|preprocess|detect|fuse|track|eval|serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path


def _add_common(p):
    p.add_argument("--session", help="session directory")
    p.add_argument("--config", help="JSON config file (per-stage sections)")
    p.add_argument("--seed", type=int, default=0)


def _load_config(args) -> dict:
    if getattr(args, "config", None):
        return json.loads(Path(args.config).read_text())
    return {}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slm",
        description="whole-body skin lesion mapping pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a ground-truth rig session")
    _add_common(p)
    p.add_argument("--mesh", help="canonical OBJ mesh; default: capsule phantom")
    p.add_argument("--lesions", type=int, default=20,
                   help="number of random synthetic lesions")
    p.add_argument("--res-scale", type=float, default=0.25,
                   help="rig resolution multiplier (1.0 = 4000x6000)")
    p.add_argument("--subject", default="phantom")

    p = sub.add_parser("preprocess", help="render depth images and masks")
    _add_common(p)

    p = sub.add_parser("detect", help="run the LoG baseline detector")
    _add_common(p)
    p.add_argument("--tile", type=int, default=608)
    p.add_argument("--overlap", type=float, default=0.5)
    p.add_argument("--scales", type=float, nargs="+")
    p.add_argument("--threshold", type=float, default=0.05)

    p = sub.add_parser("fuse", help="lift detections and build the registry")
    _add_common(p)
    p.add_argument("--threshold", type=float, default=0.02,
                   help="cluster distance threshold, meters")
    p.add_argument("--min-cluster", type=int, default=3)

    p = sub.add_parser("track", help="match lesions across two sessions")
    _add_common(p)
    p.add_argument("--session-a", required=True)
    p.add_argument("--session-b", required=True)
    p.add_argument("--corr", required=True, help="correspondence JSON file")
    p.add_argument("--max-geodesic", type=float, default=0.05)
    p.add_argument("--out", help="tracks.json path; default: session-b")

    p = sub.add_parser("eval", help="evaluate detections against ground truth")
    _add_common(p)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--score-threshold", type=float, default=0.0)
    p.add_argument("--out", help="write metrics JSON here as well")

    p = sub.add_parser("serve", help="serve the review API")
    _add_common(p)
    p.add_argument("--root", required=True, help="directory of sessions")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--ui", help="built review-ui directory to mount at /ui")
    return parser


def cmd_synth(args) -> int:
    from . import session as sessionmod
    from .meshops import TriMesh
    from .rigsim import RigConfig, random_lesions, synthesize_session
    from .shapes import capsule, skin_texture

    if not args.session:
        print("synth requires --session OUTPUT_DIR", file=sys.stderr)
        return 2
    cfg_doc = _load_config(args).get("rig", {})
    cfg = RigConfig(**cfg_doc).scaled(args.res_scale)
    if args.mesh:
        mesh = TriMesh.load(args.mesh)
    else:
        mesh = capsule(radius=0.15, height=1.75, n_theta=180, n_profile=360,
                       texture=skin_texture(2048))
    lesions = random_lesions(mesh, args.lesions, seed=args.seed)
    out = Path(args.session)
    info = synthesize_session(mesh, cfg, lesions, seed=args.seed,
                              out_dir=out, subject_id=args.subject)
    sessionmod.init_session(
        out, session_id=out.name, subject_id=args.subject,
        images=info["images"], rendered=True,
        extra={"synth": {"params": info["rig"], "seed": args.seed}})
    print(f"synthesized session {out} with {len(lesions)} lesions")
    return 0


def _stage_command(args, stage: str) -> int:
    from .session import run_pipeline

    if not args.session:
        print(f"{stage} requires --session", file=sys.stderr)
        return 2
    config = _load_config(args)
    if stage == "detect":
        section = config.setdefault("detect", {})
        section.setdefault("tile", args.tile)
        section.setdefault("overlap", args.overlap)
        section.setdefault("threshold", args.threshold)
        if args.scales:
            section.setdefault("scales", args.scales)
    elif stage == "fuse":
        section = config.setdefault("fuse", {})
        section.setdefault("threshold", args.threshold)
        section.setdefault("min_cluster", args.min_cluster)
    m = run_pipeline(args.session, stages=(stage,), config=config)
    print(f"{stage}: done; stages now {m.stages}")
    return 0


def cmd_track(args) -> int:
    from . import session as sessionmod
    from .fuse3d import load_registry
    from .meshops import TriMesh
    from .track import CorrespondenceMap, match_lesions, save_tracks

    reg_a = load_registry(Path(args.session_a) / "lesions3d.json")
    reg_b = load_registry(Path(args.session_b) / "lesions3d.json")
    manifest_b = sessionmod.load_manifest(args.session_b)
    mesh_b = TriMesh.load(Path(args.session_b) / manifest_b.mesh_file)
    corr = CorrespondenceMap.load(args.corr)
    matches = match_lesions(reg_a, reg_b, corr, mesh_b,
                            max_geodesic=args.max_geodesic)
    out = Path(args.out) if args.out else Path(args.session_b) / "tracks.json"
    save_tracks(out, matches)
    if out == Path(args.session_b) / "tracks.json":
        sessionmod.record_tracked(args.session_b, {
            "session_a": str(args.session_a), "corr": str(args.corr),
            "max_geodesic": args.max_geodesic})
    n_ok = sum(m.matched for m in matches)
    print(f"tracked {n_ok}/{len(matches)} pairs within "
          f"{args.max_geodesic} m -> {out}")
    return 0


def cmd_eval(args) -> int:
    from .detect import evaluate, load_detections

    root = Path(args.session)
    dets = load_detections(root / "detections.json")
    gts = load_detections(root / "gt" / "detections.json")
    metrics = evaluate(dets, gts, iou_threshold=args.iou,
                       score_threshold=args.score_threshold)
    summary = {k: metrics[k] for k in ("map50", "precision", "recall")}
    print(json.dumps(summary, indent=1))
    if args.out:
        from . import fileio
        fileio.write_json_atomic(args.out, {**summary,
                                            "per_image": metrics["per_image"]})
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    serve(args.root, host=args.host, port=args.port, ui_dir=args.ui)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "synth":
        return cmd_synth(args)
    if args.command in ("preprocess", "detect", "fuse"):
        return _stage_command(args, args.command)
    if args.command == "track":
        return cmd_track(args)
    if args.command == "eval":
        return cmd_eval(args)
    if args.command == "serve":
        return cmd_serve(args)
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
