"""Affinity construction and normalized spectral clustering.

The affinity is |C| + |C|^T of the fused self-expressive matrix.  The
grouping follows the standard normalized pairing: symmetric normalized
Laplacian, k smallest eigenvectors, row normalization, then seeded
k-means with fixed restart policy so results are reproducible bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

KMEANS_RESTARTS = 20
KMEANS_MAX_ITER = 300
DEGENERATE_GAP_TOL = 1e-10


@dataclass(frozen=True)
class Affinity:
    """Symmetric nonnegative affinity matrix; the diagonal may be nonzero."""

    matrix: np.ndarray

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])


@dataclass
class ClusterResult:
    """Assignments with the spectral embedding that produced them.

    ``degenerate`` reports (rather than silently fixes) embeddings that are
    not well determined: a zero eigengap at the cut, collapsed embedding
    rows, or a grouping that leaves some cluster id unused.
    """

    assignments: np.ndarray
    embedding: np.ndarray
    k: int
    degenerate: bool
    inertia: float


def build_affinity(c_fused: np.ndarray) -> Affinity:
    """W = |C| + |C|^T; exactly symmetric and nonnegative."""
    c = np.asarray(c_fused, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("self-expressive matrix must be square")
    if not np.isfinite(c).all():
        raise ValueError("self-expressive matrix has non-finite entries")
    mag = np.abs(c)
    return Affinity(matrix=mag + mag.T)


def normalized_laplacian(affinity: Affinity) -> np.ndarray:
    """I - D^{-1/2} W D^{-1/2}; isolated vertices get identity rows."""
    w = affinity.matrix
    degrees = w.sum(axis=1)
    inv_sqrt = np.where(degrees > 0.0, 1.0 / np.sqrt(np.where(degrees > 0.0, degrees, 1.0)), 0.0)
    lap = np.eye(w.shape[0]) - w * inv_sqrt[:, None] * inv_sqrt[None, :]
    return (lap + lap.T) * 0.5


def _fix_eigenvector_signs(vectors: np.ndarray) -> np.ndarray:
    # make the largest-magnitude component of each eigenvector positive
    fixed = vectors.copy()
    for j in range(fixed.shape[1]):
        lead = int(np.argmax(np.abs(fixed[:, j])))
        if fixed[lead, j] < 0.0:
            fixed[:, j] = -fixed[:, j]
    return fixed


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[int(rng.integers(n))]
    dist2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = dist2.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=dist2 / total))
        else:
            idx = int(rng.integers(n))
        centers[j] = points[idx]
        dist2 = np.minimum(dist2, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def _lloyd(points: np.ndarray, centers: np.ndarray, k: int, max_iter: int) -> tuple[np.ndarray, float]:
    n = points.shape[0]
    labels = np.full(n, -1)
    for _ in range(max_iter):
        dist2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(dist2, axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        assigned = dist2[np.arange(n), labels]
        for c in range(k):
            members = labels == c
            if members.any():
                centers[c] = points[members].mean(axis=0)
            else:
                # re-seed an empty cluster from the farthest point
                far = int(np.argmax(assigned))
                centers[c] = points[far]
                labels[far] = c
                assigned[far] = 0.0
    dist2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(dist2, axis=1)
    inertia = float(dist2[np.arange(n), labels].sum())
    return labels, inertia


def kmeans(points: np.ndarray, k: int, rng: np.random.Generator,
           restarts: int = KMEANS_RESTARTS, max_iter: int = KMEANS_MAX_ITER) -> tuple[np.ndarray, float]:
    """Seeded k-means++ with fixed restarts; best restart by (inertia, index)."""
    best_labels, best_inertia = None, np.inf
    for _ in range(restarts):
        centers = _kmeans_pp_init(points, k, rng)
        labels, inertia = _lloyd(points, centers, k, max_iter)
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return best_labels, best_inertia


def spectral_cluster(affinity: Affinity, k: int, seed: int) -> ClusterResult:
    """Normalized spectral clustering of an affinity into k groups.

    Embedding rows with zero norm are left as zero.  Raises on k < 2 or
    k > n; eigensolver failures surface as numpy LinAlgError.
    """
    w = affinity.matrix
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("affinity must be square")
    n = w.shape[0]
    if k < 2:
        raise ValueError("clusters must be >= 2")
    if k > n:
        raise ValueError(f"clusters must be <= n, got k={k} with n={n}")
    if not np.isfinite(w).all():
        raise ValueError("affinity has non-finite entries")
    if (w < 0.0).any():
        raise ValueError("affinity has negative entries")
    if not np.array_equal(w, w.T):
        raise ValueError("affinity must be symmetric")

    lap = normalized_laplacian(affinity)
    eigvals, eigvecs = np.linalg.eigh(lap)
    degenerate = False
    if k < n:
        gap = eigvals[k] - eigvals[k - 1]
        degenerate = gap <= DEGENERATE_GAP_TOL * max(1.0, abs(float(eigvals[k])))

    embedding = _fix_eigenvector_signs(eigvecs[:, :k])
    norms = np.linalg.norm(embedding, axis=1)
    safe = np.where(norms > 0.0, norms, 1.0)
    embedding = embedding / safe[:, None]

    rng = np.random.default_rng(seed)
    labels, inertia = kmeans(embedding, k, rng)
    if len(np.unique(labels)) < k:
        degenerate = True
    return ClusterResult(
        assignments=labels.astype(np.int64),
        embedding=embedding,
        k=k,
        degenerate=degenerate,
        inertia=inertia,
    )


def write_affinity_pgm(affinity: Affinity, path) -> None:
    """8-bit grayscale PGM (P5) heatmap after per-matrix max normalization."""
    w = affinity.matrix
    peak = float(w.max())
    if peak > 0.0:
        img = np.rint(w * (255.0 / peak)).astype(np.uint8)
    else:
        img = np.zeros(w.shape, dtype=np.uint8)
    header = f"P5\n{w.shape[1]} {w.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.tobytes())


def write_affinity_csv(affinity: Affinity, path) -> None:
    lines = [",".join(repr(float(v)) for v in row) for row in affinity.matrix]
    Path(path).write_text("\n".join(lines) + "\n")
