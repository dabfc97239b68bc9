"""Two-layer graph convolution per feature stream plus learned stream fusion.

Each stream i applies H -> relu(P H W) twice over its own propagation
matrix P, then the streams are fused as sum_i H_i W_i into one structure
feature matrix.  Gradients are hand-derived reverse mode over cached
forward activations; no autodiff framework is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class GcnStack:
    """Per-stream layer weights: layer1[i] is d_i x d_i, layer2[i] is d_i x h."""

    layer1: list[np.ndarray]
    layer2: list[np.ndarray]
    hidden: int

    @property
    def t(self) -> int:
        return len(self.layer1)


@dataclass
class FusionWeights:
    """One h x h mixing matrix per stream."""

    weights: list[np.ndarray]

    @property
    def t(self) -> int:
        return len(self.weights)


@dataclass
class StreamCache:
    """Forward state needed by the backward pass of one stream."""

    propagation: np.ndarray
    prop_input: np.ndarray   # P @ H0
    pre1: np.ndarray         # (P @ H0) @ W1
    prop_hidden: np.ndarray  # P @ relu(pre1)
    pre2: np.ndarray         # (P @ relu(pre1)) @ W2
    output: np.ndarray       # relu(pre2)
    w2: np.ndarray


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_gcn_stack(dims: list[int], hidden: int, rng: np.random.Generator) -> GcnStack:
    """Seeded variance-preserving init; one (d_i x d_i, d_i x h) pair per stream."""
    layer1 = [glorot_uniform(rng, d, d) for d in dims]
    layer2 = [glorot_uniform(rng, d, hidden) for d in dims]
    return GcnStack(layer1=layer1, layer2=layer2, hidden=hidden)


def init_fusion_weights(t: int, hidden: int, rng: np.random.Generator) -> FusionWeights:
    """Initial fusion is the unweighted average of the streams: W_i = I/t."""
    del rng  # reserved for non-square fusion shapes, which do not arise here
    return FusionWeights(weights=[np.eye(hidden) / t for _ in range(t)])


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def gcn_forward(
    features: np.ndarray,
    propagation: np.ndarray,
    w1: np.ndarray,
    w2: np.ndarray,
) -> np.ndarray:
    """Run one stream: two propagate-project-rectify layers, samples as rows."""
    out, _ = gcn_forward_cached(features, propagation, w1, w2)
    return out


def gcn_forward_cached(
    features: np.ndarray,
    propagation: np.ndarray,
    w1: np.ndarray,
    w2: np.ndarray,
) -> tuple[np.ndarray, StreamCache]:
    h0 = np.asarray(features, dtype=np.float64)
    p = np.asarray(propagation, dtype=np.float64)
    if p.shape[0] != p.shape[1] or p.shape[0] != h0.shape[0]:
        raise ValueError(f"propagation shape {p.shape} does not match {h0.shape[0]} samples")
    if w1.shape[0] != h0.shape[1] or w2.shape[0] != w1.shape[1]:
        raise ValueError(
            f"weight shapes {w1.shape}, {w2.shape} do not conform to features {h0.shape}"
        )
    prop_input = p @ h0
    pre1 = prop_input @ w1
    hidden1 = _relu(pre1)
    prop_hidden = p @ hidden1
    pre2 = prop_hidden @ w2
    output = _relu(pre2)
    cache = StreamCache(
        propagation=p,
        prop_input=prop_input,
        pre1=pre1,
        prop_hidden=prop_hidden,
        pre2=pre2,
        output=output,
        w2=w2,
    )
    return output, cache


def fuse_features(streams: list[np.ndarray], fusion: FusionWeights) -> np.ndarray:
    """Adaptive fusion sum_i streams[i] @ W_i, accumulated in stream order."""
    if len(streams) != fusion.t:
        raise ValueError(f"{len(streams)} streams but {fusion.t} fusion weights")
    shape = streams[0].shape
    for i, s in enumerate(streams):
        if s.shape != shape:
            raise ValueError(f"stream {i} shape {s.shape} differs from {shape}")
    fused = streams[0] @ fusion.weights[0]
    for s, w in zip(streams[1:], fusion.weights[1:]):
        fused += s @ w
    return fused


def gcn_backward(
    grad_fused: np.ndarray,
    caches: list[StreamCache],
    fusion: FusionWeights,
) -> tuple[list[np.ndarray], list[np.ndarray], list[np.ndarray]]:
    """Exact gradients of the fused output w.r.t. every layer and fusion weight.

    ``grad_fused`` is dL/d(fused output) with samples as rows.  The
    rectifier uses subderivative 0 at 0.  Returns per-stream gradient
    lists (layer1, layer2, fusion) matching the forward weight shapes.
    """
    if not caches or len(caches) != fusion.t:
        raise ValueError(f"missing cache: got {len(caches)} caches for {fusion.t} streams")
    g = np.asarray(grad_fused, dtype=np.float64)
    grads1, grads2, grads_fuse = [], [], []
    for cache, w_fuse in zip(caches, fusion.weights):
        if g.shape != cache.output.shape:
            raise ValueError(
                f"upstream gradient shape {g.shape} does not match output {cache.output.shape}"
            )
        grads_fuse.append(cache.output.T @ g)
        g_out = g @ w_fuse.T
        g_pre2 = g_out * (cache.pre2 > 0.0)
        grads2.append(cache.prop_hidden.T @ g_pre2)
        g_hidden1 = (cache.propagation.T @ g_pre2) @ cache.w2.T
        g_pre1 = g_hidden1 * (cache.pre1 > 0.0)
        grads1.append(cache.prop_input.T @ g_pre1)
    return grads1, grads2, grads_fuse
