"""Command-line surface for the drawing restoration toolkit.

Exit codes: 0 success, 2 usage error, 3 input/parse error, 4 plug-in error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ToolkitConfig, dump_defaults, load_config
from .degrade import generate_pairs
from .errors import (
    ConfigError,
    EdrestoreError,
    ParseError,
    PluginError,
    ProtocolError,
)
from .evaluate import match_and_score
from .pipeline import (
    BUILTIN_RESTORERS,
    PluginSpec,
    detect_symbols,
    restore_drawing,
    run_end_to_end,
    triage_grid,
)
from .raster import extract_central_part, load_gray, save_png, slice_patches
from .xmlio import (
    DrawingDescription,
    load_annotations,
    save_detections,
    write_xml,
)

log = logging.getLogger("edrestore")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_PLUGIN = 4


def _restorer_arg(value: str, cfg: ToolkitConfig):
    if value in BUILTIN_RESTORERS:
        return value
    return PluginSpec(path=value, kind="restorer", timeout=cfg.pipeline.plugin_timeout)


def _detector_arg(value: str, cfg: ToolkitConfig) -> PluginSpec:
    return PluginSpec(path=value, kind="detector", timeout=cfg.pipeline.plugin_timeout)


def _apply_seed(cfg: ToolkitConfig, seed: int | None) -> ToolkitConfig:
    if seed is not None:
        cfg.pipeline = replace(cfg.pipeline, seed=seed)
    return cfg


def cmd_config(args, cfg: ToolkitConfig) -> int:
    if args.dump_defaults:
        print(dump_defaults())
    else:
        print(json.dumps(cfg.to_dict(), indent=2))
    return EXIT_OK


def cmd_degrade(args, cfg: ToolkitConfig) -> int:
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",")]
    else:
        base = args.seed if args.seed is not None else 0
        seeds = list(range(base, base + args.count))
    manifest = generate_pairs(args.hq_dir, args.out_dir, seeds, cfg.degrade, jobs=args.jobs)
    log.info("wrote %d pairs to %s", len(manifest["pairs"]), args.out_dir)
    print(f"{len(manifest['pairs'])} pairs -> {args.out_dir}")
    return EXIT_OK


def cmd_triage(args, cfg: ToolkitConfig) -> int:
    img = load_gray(args.input)
    pcfg = cfg.pipeline
    central, crop = extract_central_part(
        img,
        denoise=pcfg.central_denoise,
        binarize=pcfg.central_binarize,
        sharpen=pcfg.central_sharpen,
        margin=pcfg.margin,
        canny_low=pcfg.canny_low,
        canny_high=pcfg.canny_high,
    )
    w1 = min(pcfg.restore_patch_size, *central.shape)
    p1 = min(pcfg.restore_overlap, w1 - 1)
    grid = slice_patches(central, w1, p1)
    result, feats = triage_grid(grid, cfg, jobs=args.jobs)
    doc = {
        "input": str(args.input),
        "crop": {"x": crop.x, "y": crop.y, "width": crop.width, "height": crop.height},
        "patch_size": grid.patch_size,
        "overlap": grid.overlap,
        "origins": [list(o) for o in grid.origins],
        "stp_ids": result.stp_ids,
        "ctp_ids": result.ctp_ids,
        "iterations": result.iterations,
        "seed": result.seed,
        "features": [[round(float(v), 9) for v in row] for row in feats],
    }
    if args.report:
        Path(args.report).write_text(json.dumps(doc, indent=2), encoding="utf-8")
    print(
        f"{len(grid.patches)} patches: {len(result.stp_ids)} STP, {len(result.ctp_ids)} CTP"
    )
    if args.overlay:
        overlay = np.stack([central] * 3, axis=-1).astype(np.float64)
        tint = {True: (0.0, 200.0, 0.0), False: (220.0, 0.0, 0.0)}
        stp_set = set(result.stp_ids)
        w = grid.patch_size
        for i, (r, c) in enumerate(grid.origins):
            color = np.array(tint[i in stp_set])
            region = overlay[r : r + w, c : c + w]
            region *= 0.75
            region += 0.25 * color
        save_png(args.overlay, np.clip(overlay, 0, 255).astype(np.uint8))
    return EXIT_OK


def cmd_restore(args, cfg: ToolkitConfig) -> int:
    img = load_gray(args.input)
    restored, report = restore_drawing(
        img, cfg, restorer=_restorer_arg(args.restorer, cfg), jobs=args.jobs
    )
    save_png(args.output, restored)
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8")
    print(
        f"restored {args.input} -> {args.output} "
        f"({report.stp_count} STP, {report.ctp_count} CTP, x{report.scale})"
    )
    return EXIT_OK


def cmd_detect(args, cfg: ToolkitConfig) -> int:
    img = load_gray(args.input)
    dets = detect_symbols(img, cfg, _detector_arg(args.detector, cfg))
    save_detections(args.output, dets)
    print(f"{len(dets)} detections -> {args.output}")
    return EXIT_OK


def cmd_run(args, cfg: ToolkitConfig) -> int:
    img = load_gray(args.input)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = run_end_to_end(
        img,
        cfg,
        restorer=_restorer_arg(args.restorer, cfg),
        detector=_detector_arg(args.detector, cfg),
        jobs=args.jobs,
    )
    save_png(out_dir / "restored.png", report.restored)
    save_detections(out_dir / "detections.json", report.detections)
    (out_dir / "report.json").write_text(
        json.dumps(report.to_dict(), indent=2), encoding="utf-8"
    )
    desc = DrawingDescription(
        name=Path(args.input).stem,
        width=report.restored.shape[1],
        height=report.restored.shape[0],
        scale=report.scale,
        symbols=report.detections,
    )
    write_xml(out_dir / "description.xml", desc, cfg.pipeline.classes)
    print(
        f"run complete: {report.total_patches} patches "
        f"({report.stp_count} STP / {report.ctp_count} CTP), "
        f"{len(report.detections)} symbols -> {out_dir}"
    )
    return EXIT_OK


def cmd_eval(args, cfg: ToolkitConfig) -> int:
    preds = load_annotations(args.pred)
    gts = load_annotations(args.gt)
    thresh = args.iou if args.iou is not None else cfg.pipeline.iou_thresh
    _, table = match_and_score(preds, gts, thresh)
    doc = {
        "iou_thresh": thresh,
        "per_class": {
            cls: {"precision": s.precision, "recall": s.recall, "f1": s.f1}
            for cls, s in sorted(table.per_class.items())
        },
        "macro": {
            "precision": table.macro.precision,
            "recall": table.macro.recall,
            "f1": table.macro.f1,
        },
        "micro": {
            "precision": table.micro.precision,
            "recall": table.micro.recall,
            "f1": table.micro.f1,
        },
    }
    text = json.dumps(doc, indent=2)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_export_xml(args, cfg: ToolkitConfig) -> int:
    dets = load_annotations(args.detections)
    desc = DrawingDescription(
        name=args.name,
        width=args.width,
        height=args.height,
        scale=args.scale,
        symbols=dets,
    )
    write_xml(args.output, desc, cfg.pipeline.classes)
    print(f"{len(dets)} symbols -> {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edrestore",
        description="Restore low-quality engineering drawings and recognize their symbols.",
    )
    parser.add_argument("--config", help="JSON config file (defaults merged in)")
    parser.add_argument("--seed", type=int, help="seed for clustering and corpus generation")
    parser.add_argument("--jobs", type=int, default=1, help="parallel worker count")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("config", help="show configuration")
    p.add_argument("--dump-defaults", action="store_true", help="print the default config")
    p.set_defaults(fn=cmd_config)

    p = sub.add_parser("degrade", help="generate a degraded training corpus")
    p.add_argument("--hq-dir", required=True, help="directory of high-quality drawings")
    p.add_argument("--out-dir", required=True, help="output dataset directory")
    p.add_argument("--count", type=int, default=1, help="seeds per image (from --seed)")
    p.add_argument("--seeds", help="explicit comma-separated seed list")
    p.set_defaults(fn=cmd_degrade)

    p = sub.add_parser("triage", help="report the STP/CTP patch split")
    p.add_argument("--input", required=True)
    p.add_argument("--report", help="write the patch map as JSON")
    p.add_argument("--overlay", help="write a color-coded overlay PNG")
    p.set_defaults(fn=cmd_triage)

    p = sub.add_parser("restore", help="restore a drawing")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument(
        "--restorer",
        default="identity-bicubic",
        help=f"builtin ({', '.join(BUILTIN_RESTORERS)}) or plug-in executable",
    )
    p.add_argument("--report", help="write run counters as JSON")
    p.set_defaults(fn=cmd_restore)

    p = sub.add_parser("detect", help="detect symbols on a restored drawing")
    p.add_argument("--input", required=True)
    p.add_argument("--detector", required=True, help="detector plug-in executable")
    p.add_argument("--output", required=True, help="detections JSON path")
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("run", help="restore then detect, end to end")
    p.add_argument("--input", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--restorer", default="identity-bicubic")
    p.add_argument("--detector", required=True)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("eval", help="score detections against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--iou", type=float, help="IoU match threshold")
    p.add_argument("--output", help="write the score table as JSON")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("export-xml", help="export detections as a description file")
    p.add_argument("--detections", required=True)
    p.add_argument("--name", required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--scale", type=int, default=1)
    p.add_argument("--output", required=True)
    p.set_defaults(fn=cmd_export_xml)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config)
        _apply_seed(cfg, args.seed)
        return args.fn(args, cfg)
    except (PluginError, ProtocolError) as exc:
        log.error("%s", exc)
        return EXIT_PLUGIN
    except (ParseError, ConfigError, EdrestoreError, FileNotFoundError, IOError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
