"""Quantitative evaluation: IoU box matching, per-class precision/recall/F1,
and image-pair metrics (SSIM, gradient-field L1, content L1).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import cv2
import numpy as np

from .errors import DimensionError
from .raster import GrayImage, ensure_gray

Box = tuple[int, int, int, int]  # x, y, w, h

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def iou(a: Box, b: Box) -> float:
    """Intersection-over-union of two (x, y, w, h) boxes."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    if aw < 1 or ah < 1 or bw < 1 or bh < 1:
        raise DimensionError("boxes must have width and height >= 1")
    ix = max(0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union


@dataclass
class ClassTally:
    tp: int = 0
    fp: int = 0
    fn: int = 0


@dataclass
class MatchResult:
    """Per-class TP/FP/FN tallies and the matched (pred, gt, IoU) pairs."""

    per_class: dict[str, ClassTally] = field(default_factory=dict)
    pairs: list[tuple[int, int, float]] = field(default_factory=list)


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float


@dataclass
class ScoreTable:
    """Per-class scores plus macro (class-averaged) and micro (pooled) rows."""

    per_class: dict[str, Scores]
    macro: Scores
    micro: Scores


def _scores(tp: int, fp: int, fn: int) -> Scores:
    p = tp / (tp + fp) if tp + fp > 0 else 0.0
    r = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return Scores(precision=p, recall=r, f1=f1)


def match_and_score(
    preds: list, gts: list, iou_thresh: float = 0.9
) -> tuple[MatchResult, ScoreTable]:
    """Match predictions to ground truths per class and derive P/R/F1.

    Within a class, candidate (gt, pred) pairs with IoU >= threshold are
    matched greedily in descending IoU order (ties broken by higher
    prediction score, then lower prediction id, then lower gt id), so each
    target keeps the largest-IoU prediction available to it. Unmatched
    predictions count as FP, unmatched ground truths as FN.

    Both lists hold objects with ``class_label``, ``box`` and ``score``
    attributes (``score`` optional on ground truths).
    """
    if not 0 < iou_thresh <= 1:
        raise DimensionError(f"iou threshold must be in (0, 1], got {iou_thresh}")
    result = MatchResult()
    classes = sorted(
        {d.class_label for d in preds} | {g.class_label for g in gts}
    )
    for cls in classes:
        p_ids = [i for i, d in enumerate(preds) if d.class_label == cls]
        g_ids = [i for i, g in enumerate(gts) if g.class_label == cls]
        candidates = []
        for pi in p_ids:
            for gi in g_ids:
                v = iou(preds[pi].box, gts[gi].box)
                if v >= iou_thresh:
                    score = getattr(preds[pi], "score", 0.0)
                    candidates.append((-v, -score, pi, gi))
        candidates.sort()
        matched_p: set[int] = set()
        matched_g: set[int] = set()
        for neg_v, _neg_s, pi, gi in candidates:
            if pi in matched_p or gi in matched_g:
                continue
            matched_p.add(pi)
            matched_g.add(gi)
            result.pairs.append((pi, gi, -neg_v))
        tally = ClassTally(
            tp=len(matched_p),
            fp=len(p_ids) - len(matched_p),
            fn=len(g_ids) - len(matched_g),
        )
        result.per_class[cls] = tally

    per_class = {cls: _scores(t.tp, t.fp, t.fn) for cls, t in result.per_class.items()}
    if per_class:
        macro = Scores(
            precision=float(np.mean([s.precision for s in per_class.values()])),
            recall=float(np.mean([s.recall for s in per_class.values()])),
            f1=float(np.mean([s.f1 for s in per_class.values()])),
        )
    else:
        macro = Scores(0.0, 0.0, 0.0)
    totals = ClassTally(
        tp=sum(t.tp for t in result.per_class.values()),
        fp=sum(t.fp for t in result.per_class.values()),
        fn=sum(t.fn for t in result.per_class.values()),
    )
    micro = _scores(totals.tp, totals.fp, totals.fn)
    return result, ScoreTable(per_class=per_class, macro=macro, micro=micro)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = size // 2
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    k /= k.sum()
    return np.outer(k, k)


def ssim(a: GrayImage, b: GrayImage, data_range: float = 255.0) -> float:
    """Mean local structural similarity with an 11x11 Gaussian window.

    The local map is averaged over the interior region where the window
    fits entirely inside the image, making the result independent of
    border handling.
    """
    a = ensure_gray(a)
    b = ensure_gray(b)
    if a.shape != b.shape:
        raise DimensionError(f"image shapes differ: {a.shape} vs {b.shape}")
    pad = SSIM_WINDOW // 2
    if min(a.shape) < SSIM_WINDOW:
        raise DimensionError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM, got {a.shape}"
        )
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    fa = a.astype(np.float64)
    fb = b.astype(np.float64)

    def filt(img: np.ndarray) -> np.ndarray:
        return cv2.filter2D(img, -1, win, borderType=cv2.BORDER_REFLECT)

    mu_a = filt(fa)
    mu_b = filt(fb)
    var_a = filt(fa * fa) - mu_a * mu_a
    var_b = filt(fb * fb) - mu_b * mu_b
    cov = filt(fa * fb) - mu_a * mu_b
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    smap = num / den
    return float(smap[pad:-pad, pad:-pad].mean())


def gradient_field(img: GrayImage) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel (gx, gy) by central differences with replicated borders."""
    f = ensure_gray(img).astype(np.float64)
    p = np.pad(f, 1, mode="edge")
    gx = (p[1:-1, 2:] - p[1:-1, :-2]) / 2.0
    gy = (p[2:, 1:-1] - p[:-2, 1:-1]) / 2.0
    return gx, gy


def gradient_l1(a: GrayImage, b: GrayImage) -> float:
    """Mean L1 distance between the two images' gradient fields."""
    a = ensure_gray(a)
    b = ensure_gray(b)
    if a.shape != b.shape:
        raise DimensionError(f"image shapes differ: {a.shape} vs {b.shape}")
    gxa, gya = gradient_field(a)
    gxb, gyb = gradient_field(b)
    return float((np.abs(gxa - gxb) + np.abs(gya - gyb)).mean())


def content_l1(a: GrayImage, b: GrayImage) -> float:
    """Mean absolute per-pixel intensity difference."""
    a = ensure_gray(a)
    b = ensure_gray(b)
    if a.shape != b.shape:
        raise DimensionError(f"image shapes differ: {a.shape} vs {b.shape}")
    return float(np.abs(a.astype(np.float64) - b.astype(np.float64)).mean())


def image_metrics(a: GrayImage, b: GrayImage) -> dict[str, float]:
    """SSIM, gradient-field L1 and content L1 for an image pair."""
    return {
        "ssim": ssim(a, b),
        "grad_l1": gradient_l1(a, b),
        "content_l1": content_l1(a, b),
    }
