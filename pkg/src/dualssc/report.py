"""Figure rendering for run reports: loss curves and affinity heatmaps."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

# fixed metadata keeps PNG bytes reproducible across runs
_PNG_METADATA = {"Software": "dualssc"}


def render_loss_curves(trace, path) -> None:
    """Plot each loss term and the total against the epoch index."""
    epochs = np.asarray(trace.epochs)
    terms = np.asarray(trace.terms)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for j, name in enumerate(trace.term_names):
        ax.plot(epochs, terms[:, j], linewidth=1.0, label=name)
    ax.plot(epochs, np.asarray(trace.totals), linewidth=2.0, color="black", label="total")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)


def render_affinity_heatmap(affinity, path) -> None:
    """Heatmap of the affinity matrix (block structure is the point)."""
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    image = ax.imshow(affinity.matrix, cmap="hot", interpolation="none", aspect="equal")
    fig.colorbar(image, ax=ax, fraction=0.046)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)
