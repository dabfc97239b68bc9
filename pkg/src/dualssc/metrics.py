"""Clustering evaluation: optimal-matching accuracy, normalized mutual
information, and coefficient-based neighbor reports."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


def hungarian(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost perfect matching of a square cost matrix.

    Returns ``perm`` with row i assigned to column perm[i].
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {c.shape}")
    if not np.isfinite(c).all():
        raise ValueError("cost matrix has non-finite entries")
    rows, cols = linear_sum_assignment(c)
    perm = np.empty(c.shape[0], dtype=np.int64)
    perm[rows] = cols
    return perm


def _as_labels(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1 or not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"{name} must be a 1-d integer vector")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if arr.min() < 0:
        raise ValueError(f"{name} has negative label ids")
    return arr.astype(np.int64)


def _contingency(truth: np.ndarray, pred: np.ndarray) -> np.ndarray:
    table = np.zeros((int(truth.max()) + 1, int(pred.max()) + 1))
    np.add.at(table, (truth, pred), 1.0)
    return table


def acc(truth, pred) -> float:
    """Clustering accuracy under the best one-to-one label correspondence.

    The contingency table is padded to square with zero-profit entries so
    the matching stays injective when the class counts differ.
    """
    t = _as_labels(truth, "truth")
    p = _as_labels(pred, "pred")
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape[0]} vs {p.shape[0]}")
    table = _contingency(t, p)
    size = max(table.shape)
    padded = np.zeros((size, size))
    padded[: table.shape[0], : table.shape[1]] = table
    # matching maximizes matched mass: minimize the negated table
    mapping = hungarian(-padded.T)  # mapping[pred class] = truth class
    matched = padded.T[np.arange(size), mapping].sum()
    return float(matched / t.shape[0])


def nmi(truth, pred) -> float:
    """Mutual information normalized by the larger marginal entropy.

    Natural logs throughout; the ratio is base invariant.  Two constant
    labelings describe the same single-cluster partition and score 1; a
    constant labeling against a non-constant one scores 0.
    """
    t = _as_labels(truth, "truth")
    p = _as_labels(pred, "pred")
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape[0]} vs {p.shape[0]}")
    n = t.shape[0]
    table = _contingency(t, p)
    joint = table / n
    pt = joint.sum(axis=1)
    pp = joint.sum(axis=0)

    def entropy(probs: np.ndarray) -> float:
        nz = probs[probs > 0.0]
        return float(-(nz * np.log(nz)).sum())

    h_t, h_p = entropy(pt), entropy(pp)
    denom = max(h_t, h_p)
    if denom == 0.0:
        return 1.0  # both single-cluster: identical partitions
    nz = joint > 0.0
    info = float((joint[nz] * np.log(joint[nz] / np.outer(pt, pp)[nz])).sum())
    return float(min(1.0, max(0.0, info / denom)))


@dataclass(frozen=True)
class NeighborRecord:
    """Top/bottom coefficient neighbors of one anchor column."""

    anchor: int
    top: tuple[int, ...]
    bottom: tuple[int, ...]
    top_values: tuple[float, ...]
    bottom_values: tuple[float, ...]
    degenerate: bool


def neighbor_report(c_fused: np.ndarray, anchors, top: int) -> list[NeighborRecord]:
    """Largest- and smallest-|coefficient| sample indices per anchor column.

    The anchor itself is excluded; ties break by smaller index.  An
    all-zero column is flagged degenerate.
    """
    c = np.asarray(c_fused, dtype=np.float64)
    n = c.shape[0]
    if c.ndim != 2 or c.shape[1] != n:
        raise ValueError("self-expressive matrix must be square")
    records = []
    for anchor in anchors:
        a = int(anchor)
        if not 0 <= a < n:
            raise ValueError(f"anchor {a} out of range [0, {n})")
        column = np.abs(c[:, a])
        others = np.delete(np.arange(n), a)
        values = column[others]
        descending = others[np.lexsort((others, -values))]
        ascending = others[np.lexsort((others, values))]
        top_idx = descending[:top]
        bottom_idx = ascending[:top]
        records.append(
            NeighborRecord(
                anchor=a,
                top=tuple(int(i) for i in top_idx),
                bottom=tuple(int(i) for i in bottom_idx),
                top_values=tuple(float(column[i]) for i in top_idx),
                bottom_values=tuple(float(column[i]) for i in bottom_idx),
                degenerate=bool((values == 0.0).all()),
            )
        )
    return records


def format_neighbor_report(records: list[NeighborRecord]) -> str:
    lines = []
    for rec in records:
        lines.append(f"anchor {rec.anchor}" + (" [degenerate: all-zero column]" if rec.degenerate else ""))
        lines.append("  top:    " + "  ".join(f"{i}({v:.4g})" for i, v in zip(rec.top, rec.top_values)))
        lines.append("  bottom: " + "  ".join(f"{i}({v:.4g})" for i, v in zip(rec.bottom, rec.bottom_values)))
    return "\n".join(lines) + "\n"


def metrics_report(acc_value, nmi_value, k: int, n: int, mode: str) -> str:
    """JSON text report of a run's evaluation."""
    payload = {
        "acc": None if acc_value is None else float(acc_value),
        "nmi": None if nmi_value is None else float(nmi_value),
        "k": int(k),
        "n": int(n),
        "mode": mode,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
