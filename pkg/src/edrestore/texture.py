"""Gray-level co-occurrence matrices and the four texture measures used to
triage drawing patches: dissimilarity, homogeneity, energy, entropy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EmptyGlcmError
from .raster import GrayImage, ensure_gray

DEFAULT_LEVELS = 16
DEFAULT_OFFSETS: tuple[tuple[int, int], ...] = ((1, 0), (0, 1), (1, 1), (1, -1))
DEFAULT_WEIGHTS: tuple[float, float, float, float] = (0.3, 0.1, 0.2, 0.4)


@dataclass(frozen=True)
class GlcmMatrix:
    """Co-occurrence counts for one pixel offset.

    ``counts`` is N x N: raw integer pair counts, or, when ``normalized``,
    reals summing to 1.
    """

    levels: int
    offset: tuple[int, int]
    counts: np.ndarray
    normalized: bool = False

    @property
    def total(self) -> float:
        return float(self.counts.sum())


@dataclass(frozen=True)
class GlcmFeatures:
    """The four texture measures plus the triage weighting applied to them."""

    dissimilarity: float
    homogeneity: float
    energy: float
    entropy: float
    weights: tuple[float, float, float, float] = DEFAULT_WEIGHTS

    @property
    def raw(self) -> np.ndarray:
        return np.array(
            [self.dissimilarity, self.homogeneity, self.energy, self.entropy], np.float64
        )

    @property
    def weighted(self) -> np.ndarray:
        return self.raw * np.asarray(self.weights, np.float64)


def quantize_levels(patch: GrayImage, levels: int) -> np.ndarray:
    """Map 8-bit intensities onto ``levels`` bins: floor(v * N / 256)."""
    patch = ensure_gray(patch)
    return (patch.astype(np.int64) * levels) // 256


def compute_glcm(
    patch: GrayImage, offset: tuple[int, int] = (1, 0), levels: int = DEFAULT_LEVELS
) -> GlcmMatrix:
    """Count gray-level pairs (i at p, j at p + offset) over all in-bounds pixels.

    The offset is (dx, dy) with dx along columns and dy along rows;
    accumulation is directional (no symmetric double-counting).
    """
    if levels < 2:
        raise DimensionError(f"need at least 2 gray levels, got {levels}")
    dx, dy = int(offset[0]), int(offset[1])
    if (dx, dy) == (0, 0):
        raise DimensionError("offset must be non-zero")
    q = quantize_levels(patch, levels)
    h, w = q.shape
    x0, x1 = max(0, -dx), w - max(0, dx)
    y0, y1 = max(0, -dy), h - max(0, dy)
    if x1 <= x0 or y1 <= y0:
        raise EmptyGlcmError(f"no pixel pair fits offset {(dx, dy)} in a {w}x{h} patch")
    i = q[y0:y1, x0:x1].ravel()
    j = q[y0 + dy : y1 + dy, x0 + dx : x1 + dx].ravel()
    counts = np.bincount(i * levels + j, minlength=levels * levels).reshape(levels, levels)
    return GlcmMatrix(levels=levels, offset=(dx, dy), counts=counts, normalized=False)


def normalize_glcm(raw: GlcmMatrix) -> GlcmMatrix:
    """Divide the counts by their sum so they form a probability table."""
    total = raw.counts.sum()
    if total <= 0:
        raise EmptyGlcmError("cannot normalize a zero-sum co-occurrence matrix")
    return GlcmMatrix(
        levels=raw.levels,
        offset=raw.offset,
        counts=raw.counts.astype(np.float64) / total,
        normalized=True,
    )


def glcm_measures(p: np.ndarray) -> tuple[float, float, float, float]:
    """Dissimilarity, homogeneity, energy, entropy of a normalized table.

    Entropy uses the convention 0 * ln(0) = 0.
    """
    p = np.asarray(p, np.float64)
    n = p.shape[0]
    idx = np.arange(n)
    diff = np.abs(idx[:, None] - idx[None, :]).astype(np.float64)
    m_d = float((diff * p).sum())
    m_h = float((p / (1.0 + diff * diff)).sum())
    m_e = float((p * p).sum())
    logp = np.zeros_like(p)
    np.log(p, out=logp, where=p > 0)
    m_p = float(-(p * logp).sum()) + 0.0  # avoid -0.0
    return m_d, m_h, m_e, m_p


def glcm_features(
    patch: GrayImage,
    weights: tuple[float, float, float, float] = DEFAULT_WEIGHTS,
    offsets: tuple[tuple[int, int], ...] = DEFAULT_OFFSETS,
    levels: int = DEFAULT_LEVELS,
) -> GlcmFeatures:
    """Average the four measures over the given offsets and attach weights."""
    if not offsets:
        raise DimensionError("need at least one offset")
    acc = np.zeros(4, np.float64)
    for offset in offsets:
        norm = normalize_glcm(compute_glcm(patch, offset, levels))
        acc += np.array(glcm_measures(norm.counts))
    acc /= len(offsets)
    return GlcmFeatures(
        dissimilarity=float(acc[0]),
        homogeneity=float(acc[1]),
        energy=float(acc[2]),
        entropy=float(acc[3]),
        weights=tuple(float(a) for a in weights),
    )
