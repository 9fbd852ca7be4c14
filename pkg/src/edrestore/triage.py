"""K-means (k=2) triage of patch feature vectors into simple-texture (STP)
and complex-texture (CTP) sets.

Clustering runs on the weighted 4-vectors produced by the texture module.
Cluster indices carry no meaning by themselves; labels are bound afterwards
from the barycenters (complex textures score higher on dissimilarity and
entropy, the first and fourth weighted components).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

STP = "STP"
CTP = "CTP"

DEFAULT_MAX_ITER = 100


@dataclass
class TriageResult:
    """Partition of patch indices plus the converged cluster state."""

    stp_ids: list[int]
    ctp_ids: list[int]
    barycenters: np.ndarray  # (2, 4): row 0 = STP, row 1 = CTP
    iterations: int
    seed: int
    sse_trace: list[float] = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.stp_ids) + len(self.ctp_ids)


def assign_cluster_labels(barycenters: np.ndarray) -> dict[int, str]:
    """Bind cluster indices to STP/CTP by barycenter texture complexity.

    The cluster whose barycenter has the smaller weighted dissimilarity +
    entropy sum is STP; on an exact tie the lower-index cluster is STP.
    """
    b = np.asarray(barycenters, np.float64)
    if b.shape != (2, 4):
        raise DimensionError(f"expected two 4-vector barycenters, got shape {b.shape}")
    keys = b[:, 0] + b[:, 3]
    stp_idx = int(np.argmin(keys))  # argmin takes the lower index on ties
    return {stp_idx: STP, 1 - stp_idx: CTP}


def _squared_distances(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    d = points - center
    return np.einsum("ij,ij->i", d, d)


def classify_patches(
    features: np.ndarray | list, seed: int = 0, max_iter: int = DEFAULT_MAX_ITER
) -> TriageResult:
    """Cluster weighted feature vectors into STP and CTP index sets.

    Two distinct feature vectors are drawn by ``seed`` as initial
    barycenters; Lloyd iterations run until the barycenters are a fixed
    point or ``max_iter`` is reached. If an iteration empties a cluster its
    barycenter is re-seeded with the feature farthest from the surviving
    one. With fewer than two distinct vectors the result degenerates to
    all-STP with an empty CTP cluster.
    """
    pts = np.asarray(features, np.float64)
    if pts.ndim != 2 or pts.shape[1] != 4 or pts.shape[0] == 0:
        raise DimensionError(f"expected a non-empty (n, 4) feature array, got {pts.shape}")
    if max_iter < 1:
        raise DimensionError("max_iter must be >= 1")
    n = pts.shape[0]

    unique = np.unique(pts, axis=0)
    if unique.shape[0] < 2:
        center = pts.mean(axis=0)
        sse = float(_squared_distances(pts, center).sum())
        return TriageResult(
            stp_ids=list(range(n)),
            ctp_ids=[],
            barycenters=np.vstack([center, center]),
            iterations=0,
            seed=seed,
            sse_trace=[sse],
        )

    rng = np.random.default_rng(seed)
    picks = rng.choice(unique.shape[0], size=2, replace=False)
    centers = unique[picks].copy()

    sse_trace: list[float] = []
    assignment = np.zeros(n, dtype=np.int64)
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        d0 = _squared_distances(pts, centers[0])
        d1 = _squared_distances(pts, centers[1])
        assignment = (d1 < d0).astype(np.int64)  # tie -> cluster 0
        sse_trace.append(float(np.minimum(d0, d1).sum()))

        new_centers = centers.copy()
        for k in (0, 1):
            members = pts[assignment == k]
            if members.shape[0] > 0:
                new_centers[k] = members.mean(axis=0)
        for k in (0, 1):
            if not (assignment == k).any():
                far = int(np.argmax(_squared_distances(pts, new_centers[1 - k])))
                new_centers[k] = pts[far]
        if np.array_equal(new_centers, centers):
            break
        centers = new_centers

    labels = assign_cluster_labels(centers)
    stp_cluster = 0 if labels[0] == STP else 1

    # Final assignment pass with the converged barycenters; exact distance
    # ties go to the STP side.
    d_stp = _squared_distances(pts, centers[stp_cluster])
    d_ctp = _squared_distances(pts, centers[1 - stp_cluster])
    is_stp = d_stp <= d_ctp
    return TriageResult(
        stp_ids=[i for i in range(n) if is_stp[i]],
        ctp_ids=[i for i in range(n) if not is_stp[i]],
        barycenters=np.vstack([centers[stp_cluster], centers[1 - stp_cluster]]),
        iterations=iterations,
        seed=seed,
        sse_trace=sse_trace,
    )
