"""Image and patch primitives: grayscale conversion, binarization, content
cropping, overlapping patch slicing, and exact re-stitching.

A grayscale drawing is a 2-D ``numpy.uint8`` array (``img[row, col]``) where
0 is black ink and 255 is white background. All operations are pure
functions of their inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .errors import (
    DimensionError,
    GeometryError,
    NoContentError,
    OverlapError,
    SizeError,
)

GrayImage = np.ndarray

CANNY_LOW = 50
CANNY_HIGH = 150
DEFAULT_MARGIN = 8


def ensure_gray(img: np.ndarray) -> GrayImage:
    """Validate that ``img`` is a 2-D uint8 raster and return it."""
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D grayscale array, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError("empty image")
    if arr.dtype != np.uint8:
        if not (np.issubdtype(arr.dtype, np.integer) and arr.min() >= 0 and arr.max() <= 255):
            raise DimensionError(f"intensities must be 8-bit, got dtype {arr.dtype}")
        arr = arr.astype(np.uint8)
    return arr


@dataclass(frozen=True)
class CropRect:
    """Axis-aligned crop rectangle in source-image pixel coordinates."""

    x: int
    y: int
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise DimensionError(f"crop rectangle must be at least 1x1, got {self}")


@dataclass
class PatchGrid:
    """A sliced drawing: square patches plus the exact slicing geometry.

    ``origins`` are (row, col) top-left anchors in source coordinates,
    sorted row-major. Keeping the geometry allows a lossless merge.
    """

    source_width: int
    source_height: int
    patch_size: int
    overlap: int
    origins: list[tuple[int, int]] = field(default_factory=list)
    patches: list[GrayImage] = field(default_factory=list)

    def validate(self) -> None:
        w = self.patch_size
        if len(self.origins) != len(self.patches):
            raise GeometryError("origin and patch counts differ")
        if sorted(set(self.origins)) != self.origins:
            raise GeometryError("origins must be row-major sorted and unique")
        covered = np.zeros((self.source_height, self.source_width), bool)
        for (r, c), patch in zip(self.origins, self.patches):
            if patch.shape != (w, w):
                raise GeometryError(f"patch at {(r, c)} is {patch.shape}, expected {(w, w)}")
            if r < 0 or c < 0 or r + w > self.source_height or c + w > self.source_width:
                raise GeometryError(f"origin {(r, c)} out of bounds")
            covered[r : r + w, c : c + w] = True
        if not covered.all():
            raise GeometryError("patch rectangles do not cover the source image")


def to_grayscale(rgb: np.ndarray) -> GrayImage:
    """Collapse an RGB raster to 8-bit gray with BT.601 channel weights."""
    arr = np.asarray(rgb)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionError(f"expected an (H, W, 3) RGB array, got shape {arr.shape}")
    f = arr.astype(np.float64)
    gray = 0.299 * f[..., 0] + 0.587 * f[..., 1] + 0.114 * f[..., 2]
    return np.clip(np.floor(gray + 0.5), 0, 255).astype(np.uint8)


def otsu_threshold(img: GrayImage) -> int:
    """Threshold maximizing between-class variance of the 256-bin histogram.

    Pixels below the returned value are foreground. Returns 0 for a
    constant image so that everything is classified as background.
    """
    img = ensure_gray(img)
    hist = np.bincount(img.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    if np.count_nonzero(hist) < 2:
        return 0
    values = np.arange(256, dtype=np.float64)
    # cum0[t] = pixels with value < t, for thresholds t = 1..255
    cum0 = np.cumsum(hist)[:-1]
    cum1 = total - cum0
    sum0 = np.cumsum(hist * values)[:-1]
    sum1 = (hist * values).sum() - sum0
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = sum0 / cum0
        mu1 = sum1 / cum1
        var_between = cum0 * cum1 * (mu0 - mu1) ** 2
    var_between = np.nan_to_num(var_between, nan=-1.0)
    return int(np.argmax(var_between)) + 1


def _otsu_binarize(img: GrayImage) -> GrayImage:
    t = otsu_threshold(img)
    return np.where(img < t, 0, 255).astype(np.uint8)


def binarize(img: GrayImage) -> GrayImage:
    """Two-level the image with Otsu's threshold: pixels < t -> 0, else 255."""
    return _otsu_binarize(ensure_gray(img))


def _light_denoise(img: GrayImage) -> GrayImage:
    return cv2.bilateralFilter(img, 0, 30, 3)


def _light_sharpen(img: GrayImage) -> GrayImage:
    f = img.astype(np.float64)
    blurred = cv2.GaussianBlur(f, (0, 0), 1.0)
    log = cv2.Laplacian(blurred, cv2.CV_64F, ksize=3)
    return np.clip(np.floor(f - 0.8 * log + 0.5), 0, 255).astype(np.uint8)


def extract_central_part(
    img: GrayImage,
    *,
    denoise: bool = False,
    binarize: bool = False,
    sharpen: bool = False,
    margin: int = DEFAULT_MARGIN,
    canny_low: int = CANNY_LOW,
    canny_high: int = CANNY_HIGH,
) -> tuple[GrayImage, CropRect]:
    """Crop the drawing to the minimal box around its inked content.

    Optional cleanup (denoise, binarize, sharpen, in that order) is applied
    before Canny edge detection. Canny rings sit one pixel outside ink
    boundaries, so the box is snapped to the dark pixels adjacent to the
    detected edges; the rect is then expanded by ``margin`` and clipped.

    Raises ``NoContentError`` when no edge pixel is found.
    """
    img = ensure_gray(img)
    if margin < 0:
        raise DimensionError("margin must be non-negative")
    cleaned = img
    if denoise:
        cleaned = _light_denoise(cleaned)
    if binarize:
        cleaned = _otsu_binarize(cleaned)
    if sharpen:
        cleaned = _light_sharpen(cleaned)

    edges = cv2.Canny(cleaned, canny_low, canny_high)
    if not edges.any():
        raise NoContentError("no drawing content detected")

    near_edges = cv2.dilate(edges, np.ones((3, 3), np.uint8)) > 0
    dark = cleaned < otsu_threshold(cleaned)
    content = near_edges & dark
    if not content.any():
        content = edges > 0

    ys, xs = np.nonzero(content)
    h, w = img.shape
    x0 = max(int(xs.min()) - margin, 0)
    y0 = max(int(ys.min()) - margin, 0)
    x1 = min(int(xs.max()) + margin, w - 1)
    y1 = min(int(ys.max()) + margin, h - 1)
    rect = CropRect(x=x0, y=y0, width=x1 - x0 + 1, height=y1 - y0 + 1)
    crop = cleaned[y0 : y0 + rect.height, x0 : x0 + rect.width].copy()
    return crop, rect


def _axis_anchors(dim: int, w: int, stride: int) -> list[int]:
    anchors = list(range(0, dim - w + 1, stride))
    if anchors[-1] + w < dim:
        anchors.append(dim - w)
    return anchors


def slice_patches(img: GrayImage, w: int, p: int) -> PatchGrid:
    """Cut the image into overlapping w-by-w patches.

    Anchors step by ``w - p``; if the last regular anchor stops short of
    the border, one extra edge-anchored patch is appended so every source
    pixel is covered without padding.
    """
    img = ensure_gray(img)
    h, width = img.shape
    if w < 1 or w > min(h, width):
        raise SizeError(f"patch size {w} does not fit a {width}x{h} image")
    if p < 0 or p >= w:
        raise OverlapError(f"overlap {p} must satisfy 0 <= p < w={w}")
    stride = w - p
    rows = _axis_anchors(h, w, stride)
    cols = _axis_anchors(width, w, stride)
    origins = [(r, c) for r in rows for c in cols]
    patches = [img[r : r + w, c : c + w].copy() for r, c in origins]
    return PatchGrid(
        source_width=width,
        source_height=h,
        patch_size=w,
        overlap=p,
        origins=origins,
        patches=patches,
    )


def expected_patch_count(dim: int, w: int, p: int) -> int:
    """Closed-form per-axis anchor count: ceil((dim - w) / (w - p)) + 1."""
    return math.ceil((dim - w) / (w - p)) + 1


def merge_patches(grid: PatchGrid, scale: int = 1) -> GrayImage:
    """Re-stitch a patch grid into one image, averaging overlaps.

    With ``scale`` r > 1 the grid geometry is scaled by r so that restored
    r-times-larger patches merge into an r-times-larger drawing. Each output
    pixel is the arithmetic mean of all patches covering it, rounded half-up.
    """
    if scale < 1:
        raise GeometryError(f"scale must be >= 1, got {scale}")
    if not grid.patches:
        raise GeometryError("cannot merge an empty grid")
    w = grid.patch_size * scale
    out_h = grid.source_height * scale
    out_w = grid.source_width * scale
    acc = np.zeros((out_h, out_w), np.float64)
    cnt = np.zeros((out_h, out_w), np.uint32)
    if len(grid.origins) != len(grid.patches):
        raise GeometryError("origin and patch counts differ")
    for (r, c), patch in zip(grid.origins, grid.patches):
        patch = ensure_gray(patch)
        if patch.shape != (w, w):
            raise GeometryError(
                f"patch at origin {(r, c)} is {patch.shape}, expected {(w, w)} at scale {scale}"
            )
        rs, cs = r * scale, c * scale
        if rs < 0 or cs < 0 or rs + w > out_h or cs + w > out_w:
            raise GeometryError(f"origin {(r, c)} out of bounds at scale {scale}")
        acc[rs : rs + w, cs : cs + w] += patch
        cnt[rs : rs + w, cs : cs + w] += 1
    if not cnt.all():
        raise GeometryError("patches do not cover the merged image")
    return np.floor(acc / cnt + 0.5).astype(np.uint8)


def load_gray(path: str | Path) -> GrayImage:
    """Read a PNG/JPEG as 8-bit gray, converting RGB inputs by channel weights."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise FileNotFoundError(f"cannot read image: {path}")
    if raw.ndim == 2:
        return ensure_gray(raw)
    if raw.ndim == 3 and raw.shape[2] >= 3:
        return to_grayscale(raw[:, :, 2::-1])  # BGR(A) -> RGB
    raise DimensionError(f"unsupported channel layout {raw.shape} in {path}")


def load_rgb(path: str | Path) -> np.ndarray:
    """Read a 24-bit RGB raster as an (H, W, 3) uint8 array."""
    raw = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if raw is None:
        raise FileNotFoundError(f"cannot read image: {path}")
    return raw[:, :, ::-1].copy()


def save_png(path: str | Path, img: np.ndarray) -> None:
    """Write a grayscale or RGB raster as PNG (lossless)."""
    arr = np.asarray(img)
    if arr.ndim == 3 and arr.shape[2] == 3:
        arr = arr[:, :, ::-1]  # RGB -> BGR for the encoder
    elif arr.ndim == 2:
        arr = ensure_gray(arr)
    else:
        raise DimensionError(f"unsupported image shape {arr.shape}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), arr):
        raise IOError(f"failed to write {path}")
