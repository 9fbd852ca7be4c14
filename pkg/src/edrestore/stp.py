"""Heuristic restoration for simple-texture patches: bilateral denoise,
percentile contrast stretch, Laplacian-of-Gaussian sharpen, and an
edge-directed upscale. Every stage is deterministic and clamps to [0, 255].
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import cv2
import numpy as np

from .errors import ConfigError
from .raster import GrayImage, ensure_gray

# Upscale tuning: Sobel magnitude above which a pixel counts as lying on an
# edge, smoothing weight along the edge tangent, sharpening weight across it.
EDGE_MAG_THRESHOLD = 120.0
ALONG_SMOOTH = 0.35
ACROSS_SHARPEN = 0.6


class StpStep(enum.Enum):
    DENOISE = "denoise"
    STRETCH = "stretch"
    SHARPEN = "sharpen"
    UPSCALE = "upscale"


@dataclass(frozen=True)
class StpParams:
    """Parameters of the four-stage restoration chain."""

    sigma_spatial: float = 3.0
    sigma_range: float = 30.0
    stretch_lo: float = 1.0
    stretch_hi: float = 99.0
    log_sigma: float = 1.0
    sharpen_amount: float = 0.8
    scale: int = 4

    def validate(self) -> None:
        if self.sigma_spatial <= 0 or self.sigma_range <= 0 or self.log_sigma <= 0:
            raise ConfigError("filter sigmas must be positive")
        if not (0 <= self.stretch_lo < self.stretch_hi <= 100):
            raise ConfigError(
                f"stretch percentiles must satisfy 0 <= lo < hi <= 100, "
                f"got ({self.stretch_lo}, {self.stretch_hi})"
            )
        if self.scale < 1:
            raise ConfigError(f"scale must be >= 1, got {self.scale}")


def _denoise(patch: GrayImage, params: StpParams) -> GrayImage:
    return cv2.bilateralFilter(patch, 0, params.sigma_range, params.sigma_spatial)


def _stretch(patch: GrayImage, params: StpParams) -> GrayImage:
    lo, hi = np.percentile(patch, (params.stretch_lo, params.stretch_hi))
    if hi <= lo:
        return patch.copy()
    f = (patch.astype(np.float64) - lo) * 255.0 / (hi - lo)
    return np.clip(np.floor(f + 0.5), 0, 255).astype(np.uint8)


def _sharpen(patch: GrayImage, params: StpParams) -> GrayImage:
    f = patch.astype(np.float64)
    blurred = cv2.GaussianBlur(f, (0, 0), params.log_sigma)
    log = cv2.Laplacian(blurred, cv2.CV_64F, ksize=3)
    return np.clip(np.floor(f - params.sharpen_amount * log + 0.5), 0, 255).astype(np.uint8)


def bicubic_upscale(patch: GrayImage, scale: int) -> GrayImage:
    """Plain bicubic r-times upscale (the fallback the edge pass builds on)."""
    patch = ensure_gray(patch)
    if scale == 1:
        return patch.copy()
    h, w = patch.shape
    return cv2.resize(patch, (w * scale, h * scale), interpolation=cv2.INTER_CUBIC)


def _upscale(patch: GrayImage, params: StpParams) -> GrayImage:
    """Edge-directed upscale: bicubic, then smooth along and steepen across
    strong edges so upscaled line work keeps crisp boundaries."""
    up = bicubic_upscale(patch, params.scale)
    f = up.astype(np.float32)
    gx = cv2.Sobel(f, cv2.CV_32F, 1, 0, ksize=3)
    gy = cv2.Sobel(f, cv2.CV_32F, 0, 1, ksize=3)
    mag = np.hypot(gx, gy)
    strong = mag > EDGE_MAG_THRESHOLD
    if not strong.any():
        return up
    safe = np.where(mag > 0, mag, 1.0)
    nx, ny = gx / safe, gy / safe
    h, w = f.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float32)

    def sample(mx: np.ndarray, my: np.ndarray) -> np.ndarray:
        return cv2.remap(
            f, mx, my, interpolation=cv2.INTER_LINEAR, borderMode=cv2.BORDER_REPLICATE
        )

    across1 = sample(xx + nx, yy + ny)
    across2 = sample(xx - nx, yy - ny)
    along1 = sample(xx - ny, yy + nx)
    along2 = sample(xx + ny, yy - nx)

    out = f.copy()
    correction = ALONG_SMOOTH * (along1 + along2 - 2.0 * f) - ACROSS_SHARPEN * (
        across1 + across2 - 2.0 * f
    )
    out[strong] += correction[strong]
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


_STEPS = {
    StpStep.DENOISE: _denoise,
    StpStep.STRETCH: _stretch,
    StpStep.SHARPEN: _sharpen,
    StpStep.UPSCALE: _upscale,
}


def stp_step(patch: GrayImage, step: StpStep, params: StpParams | None = None) -> GrayImage:
    """Apply one stage of the restoration chain."""
    params = params or StpParams()
    params.validate()
    return _STEPS[step](ensure_gray(patch), params)


def restore_stp(patch: GrayImage, params: StpParams | None = None) -> GrayImage:
    """Run the full chain: denoise, stretch, sharpen, upscale by ``scale``."""
    params = params or StpParams()
    params.validate()
    patch = ensure_gray(patch)
    for step in (StpStep.DENOISE, StpStep.STRETCH, StpStep.SHARPEN, StpStep.UPSCALE):
        patch = _STEPS[step](patch, params)
    return patch
