"""Cosine-similarity KNN graphs and their normalized propagation matrices."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class KnnGraph:
    """Symmetric binary KNN adjacency with its degree-normalized propagation.

    ``adjacency`` has zero diagonal; ``self_loop_adjacency`` adds the
    identity; ``norm_propagation`` is D^{-1/2} (A + I) D^{-1/2} where D is
    the degree matrix of A + I.
    """

    adjacency: np.ndarray
    self_loop_adjacency: np.ndarray
    norm_propagation: np.ndarray

    @property
    def n(self) -> int:
        return int(self.adjacency.shape[0])


def cosine_similarity(features: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarities of the rows of ``features``.

    The result is exactly symmetric with unit diagonal.  A zero-norm row
    has no direction and is rejected.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("features must be a 2-d matrix")
    norms = np.linalg.norm(x, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"zero-norm feature row at index {int(zero[0])}")
    unit = x / norms[:, None]
    sim = unit @ unit.T
    sim = (sim + sim.T) * 0.5
    np.fill_diagonal(sim, 1.0)
    return sim


def _check_adjacency(adjacency: np.ndarray) -> np.ndarray:
    a = np.asarray(adjacency, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("adjacency must be square")
    if not np.array_equal(a, a.T):
        raise ValueError("adjacency must be symmetric")
    if not np.isin(a, (0.0, 1.0)).all():
        raise ValueError("adjacency entries must be 0 or 1")
    if np.diagonal(a).any():
        raise ValueError("adjacency diagonal must be zero")
    return a


def normalize_adjacency(adjacency: np.ndarray) -> np.ndarray:
    """D^{-1/2} (A + I) D^{-1/2} for a symmetric binary zero-diagonal A."""
    a = _check_adjacency(adjacency)
    with_loops = a + np.eye(a.shape[0])
    inv_sqrt_deg = 1.0 / np.sqrt(with_loops.sum(axis=1))
    return with_loops * inv_sqrt_deg[:, None] * inv_sqrt_deg[None, :]


def build_knn_graph(features: np.ndarray, k: int) -> KnnGraph:
    """Connect each sample to its ``k`` most cosine-similar others.

    Directed selections are symmetrized by union.  Ties at the k-th
    similarity break toward the smaller index, so the graph is a pure
    function of the inputs.
    """
    sim = cosine_similarity(features)
    n = sim.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n, got k={k} with n={n}")

    directed = np.zeros((n, n))
    order_tiebreak = np.arange(n)
    for i in range(n):
        # lexsort: descending similarity, ascending index on ties
        order = np.lexsort((order_tiebreak, -sim[i]))
        neighbors = order[order != i][:k]
        directed[i, neighbors] = 1.0

    adjacency = np.maximum(directed, directed.T)
    np.fill_diagonal(adjacency, 0.0)
    with_loops = adjacency + np.eye(n)
    inv_sqrt_deg = 1.0 / np.sqrt(with_loops.sum(axis=1))
    propagation = with_loops * inv_sqrt_deg[:, None] * inv_sqrt_deg[None, :]
    return KnnGraph(
        adjacency=adjacency,
        self_loop_adjacency=with_loops,
        norm_propagation=propagation,
    )


def write_edge_list(adjacency: np.ndarray, path) -> None:
    """Export the undirected edges as text, one ``i j`` pair per line, i < j."""
    a = _check_adjacency(adjacency)
    rows, cols = np.nonzero(np.triu(a, k=1))
    lines = [f"{int(i)} {int(j)}" for i, j in zip(rows, cols)]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))
