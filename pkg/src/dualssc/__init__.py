"""Subspace clustering from fused content and graph-structure self-expression.

The pipeline: load precomputed content and intermediate-layer features,
build cosine-KNN graphs over the intermediate features, learn structure
features with a two-layer graph convolution per stream, jointly train
sparse self-expressive matrices for content and structure, fuse them, and
cluster spectrally.  Evaluation is ACC/NMI against ground-truth labels.
"""

from dualssc.feature_io import BundleError, FeatureBundle, load_bundle, save_bundle
from dualssc.gcn import FusionWeights, GcnStack, fuse_features, gcn_backward, gcn_forward
from dualssc.knn_graph import KnnGraph, build_knn_graph, cosine_similarity, normalize_adjacency
from dualssc.metrics import acc, hungarian, neighbor_report, nmi
from dualssc.self_expressive import (
    AdamState,
    SelfExpressiveState,
    TrainConfig,
    TrainResult,
    adam_step,
    se_loss,
    total_loss,
    total_loss_grad,
    train,
)
from dualssc.spectral import Affinity, ClusterResult, build_affinity, spectral_cluster
from dualssc.synthetic import SubspaceSpec, generate

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "Affinity",
    "BundleError",
    "ClusterResult",
    "FeatureBundle",
    "FusionWeights",
    "GcnStack",
    "KnnGraph",
    "SelfExpressiveState",
    "SubspaceSpec",
    "TrainConfig",
    "TrainResult",
    "acc",
    "adam_step",
    "build_affinity",
    "build_knn_graph",
    "cosine_similarity",
    "fuse_features",
    "gcn_backward",
    "gcn_forward",
    "generate",
    "hungarian",
    "load_bundle",
    "neighbor_report",
    "nmi",
    "normalize_adjacency",
    "save_bundle",
    "se_loss",
    "spectral_cluster",
    "total_loss",
    "total_loss_grad",
    "train",
]
