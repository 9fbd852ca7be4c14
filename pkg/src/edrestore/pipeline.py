"""End-to-end orchestration: preprocess, triage, dual-path restoration
(heuristics for simple patches, an external restorer plug-in for complex
ones), merge, re-slice, external detection, and global deduplication.

Plug-in wire protocol (file based, one subprocess call per patch batch):

    <exe> --input-dir IN --output-dir OUT --scale R --kind restorer|detector [extra]

``IN`` holds ``manifest.json`` (grid geometry: source size, patch size,
overlap, origins as [row, col] pixel anchors, scale) plus one
``patch_<row>_<col>.png`` per origin. A restorer writes same-named PNGs at
R-times size to ``OUT``; a detector writes ``detections.json`` to ``OUT``:
a list of {patch: "row_col", class, x, y, w, h, score} in patch-local
pixels. Exit code 0 means success; anything else fails with stderr captured.
"""
from __future__ import annotations

import json
import os
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import stp as stp_mod
from . import texture, triage
from .config import ToolkitConfig
from .errors import (
    DimensionError,
    FrameError,
    GeometryError,
    PluginError,
    ProtocolError,
)
from .evaluate import iou
from .raster import (
    CropRect,
    GrayImage,
    PatchGrid,
    binarize,
    ensure_gray,
    extract_central_part,
    load_gray,
    merge_patches,
    save_png,
    slice_patches,
)

FRAME_PATCH = "patch"
FRAME_GLOBAL = "global"

BUILTIN_RESTORERS = ("identity-bicubic", "stp-chain")


@dataclass(frozen=True)
class Detection:
    """One recognized symbol: class, axis-aligned box, confidence, frame."""

    class_label: str
    x: int
    y: int
    w: int
    h: int
    score: float
    frame: str = FRAME_GLOBAL

    def __post_init__(self) -> None:
        if self.w < 1 or self.h < 1:
            raise DimensionError(f"detection box must be at least 1x1, got {self}")
        if not 0.0 <= self.score <= 1.0:
            raise DimensionError(f"detection score must be in [0, 1], got {self.score}")
        if self.frame not in (FRAME_PATCH, FRAME_GLOBAL):
            raise FrameError(f"unknown coordinate frame {self.frame!r}")

    @property
    def box(self) -> tuple[int, int, int, int]:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class PluginSpec:
    """External restorer/detector executable and how to run it."""

    path: str
    kind: str
    timeout: float = 300.0
    extra_args: tuple[str, ...] = ()

    def validate(self) -> None:
        if self.kind not in ("restorer", "detector"):
            raise PluginError(f"plugin kind must be restorer or detector, got {self.kind!r}")
        p = Path(self.path)
        if not p.exists() or not os.access(p, os.X_OK):
            raise PluginError(f"plugin executable not found or not runnable: {self.path}")


@dataclass
class PipelineReport:
    """Counters, timings, and outputs of a pipeline run."""

    total_patches: int = 0
    stp_count: int = 0
    ctp_count: int = 0
    restorer_invocations: int = 0
    durations: dict[str, float] = field(default_factory=dict)
    crop: CropRect | None = None
    scale: int = 1
    restored: GrayImage | None = None
    detections: list[Detection] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "total_patches": self.total_patches,
            "stp_count": self.stp_count,
            "ctp_count": self.ctp_count,
            "restorer_invocations": self.restorer_invocations,
            "durations": {k: round(v, 6) for k, v in self.durations.items()},
            "crop": None
            if self.crop is None
            else {
                "x": self.crop.x,
                "y": self.crop.y,
                "width": self.crop.width,
                "height": self.crop.height,
            },
            "scale": self.scale,
            "detections": [
                {
                    "class": d.class_label,
                    "x": d.x,
                    "y": d.y,
                    "w": d.w,
                    "h": d.h,
                    "score": d.score,
                }
                for d in self.detections
            ],
        }


def _origin_key(origin: tuple[int, int]) -> str:
    return f"{origin[0]}_{origin[1]}"


def invoke_plugin(
    spec: PluginSpec,
    patches: list[GrayImage],
    origins: list[tuple[int, int]],
    *,
    source_size: tuple[int, int],
    patch_size: int,
    overlap: int,
    scale: int = 1,
    workdir: str | Path | None = None,
):
    """Run one plug-in call over a patch batch.

    Returns restored patches (aligned with ``origins``) for a restorer, or
    a list of (origin, patch-local Detection) tuples for a detector.
    """
    spec.validate()
    if len(patches) != len(origins):
        raise GeometryError("patch and origin counts differ")

    with tempfile.TemporaryDirectory(prefix="edrestore-plugin-", dir=workdir) as tmp:
        in_dir = Path(tmp) / "in"
        out_dir = Path(tmp) / "out"
        in_dir.mkdir()
        out_dir.mkdir()
        manifest = {
            "source_height": source_size[0],
            "source_width": source_size[1],
            "patch_size": patch_size,
            "overlap": overlap,
            "scale": scale,
            "origins": [list(o) for o in origins],
        }
        with open(in_dir / "manifest.json", "w", encoding="utf-8") as f:
            json.dump(manifest, f)
        for origin, patch in zip(origins, patches):
            save_png(in_dir / f"patch_{_origin_key(origin)}.png", patch)

        cmd = [
            spec.path,
            "--input-dir",
            str(in_dir),
            "--output-dir",
            str(out_dir),
            "--scale",
            str(scale),
            "--kind",
            spec.kind,
            *spec.extra_args,
        ]
        try:
            proc = subprocess.run(cmd, capture_output=True, timeout=spec.timeout)
        except subprocess.TimeoutExpired as exc:
            raise PluginError(f"plugin {spec.path} timed out after {spec.timeout}s") from exc
        except OSError as exc:
            raise PluginError(f"plugin {spec.path} failed to launch: {exc}") from exc
        if proc.returncode != 0:
            stderr = proc.stderr.decode(errors="replace").strip()
            raise PluginError(
                f"plugin {spec.path} exited with status {proc.returncode}: {stderr}"
            )

        if spec.kind == "restorer":
            return _collect_restored(out_dir, patches, origins, scale)
        return _collect_detections(out_dir, origins, patch_size, scale)


def _collect_restored(out_dir, patches, origins, scale):
    restored = []
    for origin, patch in zip(origins, patches):
        path = out_dir / f"patch_{_origin_key(origin)}.png"
        if not path.exists():
            raise ProtocolError(f"restorer did not write {path.name}")
        out = load_gray(path)
        expected = (patch.shape[0] * scale, patch.shape[1] * scale)
        if out.shape != expected:
            raise ProtocolError(
                f"restored {path.name} is {out.shape}, expected {expected} at scale {scale}"
            )
        restored.append(out)
    return restored


def _collect_detections(out_dir, origins, patch_size, scale):
    path = out_dir / "detections.json"
    if not path.exists():
        raise ProtocolError("detector did not write detections.json")
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"detections.json is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise ProtocolError("detections.json must hold a list")
    by_key = {_origin_key(o): o for o in origins}
    limit = patch_size * scale
    out = []
    for i, entry in enumerate(raw):
        try:
            origin = by_key[entry["patch"]]
            det = Detection(
                class_label=str(entry["class"]),
                x=int(entry["x"]),
                y=int(entry["y"]),
                w=int(entry["w"]),
                h=int(entry["h"]),
                score=float(entry["score"]),
                frame=FRAME_PATCH,
            )
        except (KeyError, TypeError, ValueError, DimensionError, FrameError) as exc:
            raise ProtocolError(f"detections.json entry {i} is malformed: {exc}") from exc
        if det.x < 0 or det.y < 0 or det.x + det.w > limit or det.y + det.h > limit:
            raise ProtocolError(
                f"detections.json entry {i} lies outside its {limit}x{limit} patch"
            )
        out.append((origin, det))
    return out


def _bicubic_restorer(patch: GrayImage, scale: int, cfg: ToolkitConfig) -> GrayImage:
    return stp_mod.bicubic_upscale(patch, scale)


def _stp_chain_restorer(patch: GrayImage, scale: int, cfg: ToolkitConfig) -> GrayImage:
    return stp_mod.restore_stp(patch, replace(cfg.stp, scale=scale))


_BUILTINS = {
    "identity-bicubic": _bicubic_restorer,
    "stp-chain": _stp_chain_restorer,
}


def compute_patch_features(
    patches: list[GrayImage], cfg: ToolkitConfig, jobs: int = 1
) -> np.ndarray:
    """Weighted GLCM feature vectors for binarized patches, order-stable."""
    def one(patch: GrayImage) -> np.ndarray:
        feats = texture.glcm_features(
            patch,
            weights=cfg.texture.weights,
            offsets=cfg.texture.offsets,
            levels=cfg.texture.levels,
        )
        return feats.weighted

    if jobs > 1 and len(patches) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, patches))
    else:
        rows = [one(p) for p in patches]
    return np.vstack(rows) if rows else np.zeros((0, 4))


def triage_grid(
    grid: PatchGrid, cfg: ToolkitConfig, jobs: int = 1
) -> tuple[triage.TriageResult, np.ndarray]:
    """Binarize patches, extract features, and split the grid into STP/CTP."""
    bin_patches = [binarize(p) for p in grid.patches]
    feats = compute_patch_features(bin_patches, cfg, jobs=jobs)
    result = triage.classify_patches(
        feats, seed=cfg.pipeline.seed, max_iter=cfg.triage.max_iter
    )
    return result, feats


def restore_drawing(
    ed: GrayImage,
    cfg: ToolkitConfig | None = None,
    restorer: str | PluginSpec = "identity-bicubic",
    jobs: int = 1,
) -> tuple[GrayImage, PipelineReport]:
    """Restore a drawing: crop to content, slice, triage, restore both patch
    classes at the configured scale, and merge back into one image.

    ``restorer`` names a builtin ("identity-bicubic", "stp-chain") or is an
    external ``PluginSpec``; it receives only complex-texture patches unless
    ``cfg.pipeline.triage_mode`` is "direct", which routes every patch to it.
    """
    cfg = cfg or ToolkitConfig()
    cfg.validate()
    pcfg = cfg.pipeline
    ed = ensure_gray(ed)
    report = PipelineReport(scale=pcfg.scale)

    t0 = time.perf_counter()
    central, crop = extract_central_part(
        ed,
        denoise=pcfg.central_denoise,
        binarize=pcfg.central_binarize,
        sharpen=pcfg.central_sharpen,
        margin=pcfg.margin,
        canny_low=pcfg.canny_low,
        canny_high=pcfg.canny_high,
    )
    report.crop = crop
    w1 = min(pcfg.restore_patch_size, *central.shape)
    p1 = min(pcfg.restore_overlap, w1 - 1)
    grid = slice_patches(central, w1, p1)
    report.total_patches = len(grid.patches)
    report.durations["preprocess"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if pcfg.triage_mode == "direct":
        stp_ids: list[int] = []
        ctp_ids = list(range(len(grid.patches)))
    else:
        result, _ = triage_grid(grid, cfg, jobs=jobs)
        stp_ids, ctp_ids = result.stp_ids, result.ctp_ids
    report.stp_count = len(stp_ids)
    report.ctp_count = len(ctp_ids)
    report.durations["triage"] = time.perf_counter() - t0

    scale = pcfg.scale
    restored: list[GrayImage | None] = [None] * len(grid.patches)

    t0 = time.perf_counter()
    if stp_ids:
        stp_params = replace(cfg.stp, scale=scale)

        def restore_one(i: int) -> None:
            restored[i] = stp_mod.restore_stp(grid.patches[i], stp_params)

        if jobs > 1 and len(stp_ids) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                list(pool.map(restore_one, stp_ids))
        else:
            for i in stp_ids:
                restore_one(i)
    report.durations["restore_stp"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if ctp_ids:
        if isinstance(restorer, PluginSpec):
            outs = invoke_plugin(
                restorer,
                [grid.patches[i] for i in ctp_ids],
                [grid.origins[i] for i in ctp_ids],
                source_size=(grid.source_height, grid.source_width),
                patch_size=grid.patch_size,
                overlap=grid.overlap,
                scale=scale,
            )
            for i, out in zip(ctp_ids, outs):
                restored[i] = out
        else:
            if restorer not in _BUILTINS:
                raise PluginError(
                    f"unknown builtin restorer {restorer!r}; choose from {BUILTIN_RESTORERS}"
                )
            fn = _BUILTINS[restorer]

            def restore_ctp(i: int) -> None:
                restored[i] = fn(grid.patches[i], scale, cfg)

            if jobs > 1 and len(ctp_ids) > 1:
                with ThreadPoolExecutor(max_workers=jobs) as pool:
                    list(pool.map(restore_ctp, ctp_ids))
            else:
                for i in ctp_ids:
                    restore_ctp(i)
        report.restorer_invocations = len(ctp_ids)
    report.durations["restore_ctp"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    merged_grid = PatchGrid(
        source_width=grid.source_width,
        source_height=grid.source_height,
        patch_size=grid.patch_size,
        overlap=grid.overlap,
        origins=grid.origins,
        patches=[p for p in restored],  # type: ignore[misc]
    )
    out = merge_patches(merged_grid, scale=scale)
    report.durations["merge"] = time.perf_counter() - t0
    report.restored = out
    return out, report


def detect_symbols(
    restored: GrayImage, cfg: ToolkitConfig | None = None, detector: PluginSpec | None = None
) -> list[Detection]:
    """Slice the restored drawing, run the detector plug-in per batch, map
    patch-local boxes into the global frame, and deduplicate."""
    cfg = cfg or ToolkitConfig()
    cfg.validate()
    if detector is None:
        raise PluginError("detect_symbols requires a detector plugin")
    pcfg = cfg.pipeline
    restored = ensure_gray(restored)
    w2 = min(pcfg.detect_patch_size, *restored.shape)
    p2 = min(pcfg.detect_overlap, w2 - 1)
    grid = slice_patches(restored, w2, p2)
    results = invoke_plugin(
        detector,
        grid.patches,
        grid.origins,
        source_size=(grid.source_height, grid.source_width),
        patch_size=grid.patch_size,
        overlap=grid.overlap,
        scale=1,
    )
    h, w = restored.shape
    global_dets = []
    for (row, col), det in results:
        g = Detection(
            class_label=det.class_label,
            x=det.x + col,
            y=det.y + row,
            w=det.w,
            h=det.h,
            score=det.score,
            frame=FRAME_GLOBAL,
        )
        if g.x + g.w > w or g.y + g.h > h:
            raise ProtocolError(f"detection {g} exceeds the {w}x{h} drawing bounds")
        global_dets.append(g)
    return dedup_global(global_dets, pcfg.iou_thresh)


def dedup_global(dets: list[Detection], iou_thresh: float = 0.9) -> list[Detection]:
    """Greedy per-class non-maximum suppression by descending score.

    Among the retained detections of one class every pair has IoU below the
    threshold; detections of different classes never suppress each other.
    """
    if not 0 < iou_thresh <= 1:
        raise DimensionError(f"iou threshold must be in (0, 1], got {iou_thresh}")
    for d in dets:
        if d.frame != FRAME_GLOBAL:
            raise FrameError("dedup_global needs detections in the global frame")
    kept: list[Detection] = []
    order = sorted(dets, key=lambda d: (-d.score, d.class_label, d.x, d.y, d.w, d.h))
    for det in order:
        if all(
            k.class_label != det.class_label or iou(k.box, det.box) < iou_thresh
            for k in kept
        ):
            kept.append(det)
    return kept


def run_end_to_end(
    lq_ed: GrayImage,
    cfg: ToolkitConfig | None = None,
    restorer: str | PluginSpec = "identity-bicubic",
    detector: PluginSpec | None = None,
    jobs: int = 1,
) -> PipelineReport:
    """Restore the drawing, then detect symbols on it; one combined report."""
    cfg = cfg or ToolkitConfig()
    restored, report = restore_drawing(lq_ed, cfg, restorer=restorer, jobs=jobs)
    if detector is not None:
        t0 = time.perf_counter()
        report.detections = detect_symbols(restored, cfg, detector)
        report.durations["detect"] = time.perf_counter() - t0
    return report
