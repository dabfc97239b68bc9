"""Joint training of sparse self-expressive matrices for content and structure.

Two coefficient matrices are learned: one reconstructing the content
features and one reconstructing the GCN-fused structure features, each
under an L1 sparsity penalty, plus an L1 penalty on their sum.  All
trainable tensors (both coefficient matrices, GCN layer weights, fusion
weights) are updated jointly by Adam on the full sample graph; the math
keeps samples as columns, transposed from the row-major bundle layout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dualssc import feature_io
from dualssc.feature_io import FeatureBundle
from dualssc.gcn import (
    FusionWeights,
    GcnStack,
    StreamCache,
    fuse_features,
    gcn_backward,
    gcn_forward_cached,
    init_fusion_weights,
    init_gcn_stack,
)
from dualssc.knn_graph import KnnGraph, build_knn_graph

MODES = ("fused", "content_only", "raw_baseline")

FUSED_TERMS = ("content_l1", "content_recon", "structure_l1", "structure_recon", "fused_l1")
CONTENT_TERMS = ("content_l1", "content_recon")


@dataclass
class TrainConfig:
    """Run parameters; defaults follow the reference configuration."""

    k: int = 10
    lambda1: float = 1.0
    lambda2: float = 1.0
    lr: float = 1e-5
    epochs: int = 2000
    seed: int = 0
    clusters: int = 10
    mode: str = "fused"
    zero_diagonal: bool = False
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None

    def validate(self) -> "TrainConfig":
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.clusters < 2:
            raise ValueError("clusters must be >= 2")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.checkpoint_every < 0:
            raise ValueError("checkpoint_every must be >= 0")
        if self.checkpoint_every > 0 and not self.checkpoint_dir:
            raise ValueError("checkpoint_every requires checkpoint_dir")
        return self


@dataclass
class SelfExpressiveState:
    """The two learned coefficient matrices; the fused matrix is derived."""

    c_content: np.ndarray
    c_structure: np.ndarray
    lambda1: float
    lambda2: float

    @property
    def c_fused(self) -> np.ndarray:
        return self.c_content + self.c_structure


@dataclass
class AdamState:
    """Per-parameter moment accumulators and a shared step counter."""

    first_moment: dict[str, np.ndarray]
    second_moment: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class LossTrace:
    """Per-epoch loss values: row e holds the loss entering update e,
    and the last row holds the loss after the final update."""

    term_names: tuple[str, ...]
    epochs: list[int] = field(default_factory=list)
    terms: list[tuple[float, ...]] = field(default_factory=list)
    totals: list[float] = field(default_factory=list)

    def append(self, epoch: int, terms: tuple[float, ...], total: float) -> None:
        self.epochs.append(epoch)
        self.terms.append(terms)
        self.totals.append(total)

    def to_csv(self, path) -> None:
        lines = ["epoch," + ",".join(self.term_names) + ",total"]
        for epoch, terms, total in zip(self.epochs, self.terms, self.totals):
            lines.append(f"{epoch}," + ",".join(repr(v) for v in terms) + f",{total!r}")
        Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class TrainResult:
    state: SelfExpressiveState
    gcn_stack: GcnStack | None
    fusion: FusionWeights | None
    graphs: list[KnnGraph] | None
    trace: LossTrace


def se_loss(features: np.ndarray, coeffs: np.ndarray, weight: float) -> float:
    """L1 norm of the coefficients plus weighted squared reconstruction error.

    ``features`` is d x n with samples as columns, ``coeffs`` is n x n.
    """
    f = np.asarray(features, dtype=np.float64)
    c = np.asarray(coeffs, dtype=np.float64)
    if f.ndim != 2 or c.ndim != 2 or c.shape[0] != c.shape[1] or f.shape[1] != c.shape[0]:
        raise ValueError(f"shapes do not conform: features {f.shape}, coeffs {c.shape}")
    residual = f - f @ c
    return float(np.abs(c).sum() + weight * (residual * residual).sum())


def total_loss(
    content_features: np.ndarray,
    structure_features: np.ndarray,
    state: SelfExpressiveState,
) -> tuple[float, dict[str, float]]:
    """Five-term joint objective and its breakdown.

    Terms: L1 of the content coefficients, weighted content reconstruction,
    L1 of the structure coefficients, weighted structure reconstruction,
    and L1 of the summed (fused) coefficients.
    """
    fa = np.asarray(content_features, dtype=np.float64)
    fs = np.asarray(structure_features, dtype=np.float64)
    ca, cs = state.c_content, state.c_structure
    n = ca.shape[0]
    if fa.shape[1] != n or fs.shape[1] != n or cs.shape != ca.shape:
        raise ValueError(
            f"shapes do not conform: content {fa.shape}, structure {fs.shape}, "
            f"coeffs {ca.shape} / {cs.shape}"
        )
    ra = fa - fa @ ca
    rs = fs - fs @ cs
    breakdown = {
        "content_l1": float(np.abs(ca).sum()),
        "content_recon": float(state.lambda1 * (ra * ra).sum()),
        "structure_l1": float(np.abs(cs).sum()),
        "structure_recon": float(state.lambda2 * (rs * rs).sum()),
        "fused_l1": float(np.abs(ca + cs).sum()),
    }
    total = sum(breakdown[name] for name in FUSED_TERMS)
    return total, breakdown


def total_loss_grad(
    content_features: np.ndarray,
    structure_features: np.ndarray,
    state: SelfExpressiveState,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradients of the joint objective.

    Returns (dL/dC_content, dL/dC_structure, dL/dF_structure); the last is
    d x n (samples as columns) and feeds the GCN backward pass.  L1 terms
    use the subgradient sign with sign(0) = 0.
    """
    fa = np.asarray(content_features, dtype=np.float64)
    fs = np.asarray(structure_features, dtype=np.float64)
    ca, cs = state.c_content, state.c_structure
    n = ca.shape[0]
    if fa.shape[1] != n or fs.shape[1] != n or cs.shape != ca.shape:
        raise ValueError(
            f"shapes do not conform: content {fa.shape}, structure {fs.shape}, "
            f"coeffs {ca.shape} / {cs.shape}"
        )
    ra = fa - fa @ ca
    rs = fs - fs @ cs
    sign_fused = np.sign(ca + cs)
    grad_ca = np.sign(ca) - 2.0 * state.lambda1 * (fa.T @ ra) + sign_fused
    grad_cs = np.sign(cs) - 2.0 * state.lambda2 * (fs.T @ rs) + sign_fused
    # d/dF ||F - F C||_F^2 = 2 (F - F C)(I - C)^T
    grad_fs = 2.0 * state.lambda2 * (rs - rs @ cs.T)
    return grad_ca, grad_cs, grad_fs


def content_loss_grad(content_features: np.ndarray, coeffs: np.ndarray, weight: float) -> np.ndarray:
    """Gradient of the content-only objective w.r.t. the coefficients."""
    fa = np.asarray(content_features, dtype=np.float64)
    residual = fa - fa @ coeffs
    return np.sign(coeffs) - 2.0 * weight * (fa.T @ residual)


def init_adam(params: dict[str, np.ndarray]) -> AdamState:
    return AdamState(
        first_moment={k: np.zeros_like(v) for k, v in params.items()},
        second_moment={k: np.zeros_like(v) for k, v in params.items()},
    )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update applied elementwise, in place."""
    state.step += 1
    t = state.step
    correct1 = 1.0 - state.beta1 ** t
    correct2 = 1.0 - state.beta2 ** t
    for name, param in params.items():
        grad = grads[name]
        if not np.isfinite(grad).all():
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * (grad * grad)
        param -= lr * (m / correct1) / (np.sqrt(v / correct2) + state.eps)
    return params, state


def prepare_training(bundle: FeatureBundle, config: TrainConfig):
    """Build graphs and seeded initial parameters for a training run.

    Returns (params, content_features, stream_inputs, graphs, stack, fusion)
    where params maps parameter names to the live arrays that the Adam loop
    updates in place.  For the content-only modes the graph/GCN slots are
    None and only the content coefficients are trainable.
    """
    bundle.validate()
    config.validate()
    n = bundle.n
    if config.clusters > n:
        raise ValueError(f"clusters must be <= n, got {config.clusters} with n={n}")
    rng = np.random.default_rng(config.seed)
    content = np.asarray(bundle.content, dtype=np.float64).T  # d x n

    c_content = np.zeros((n, n))
    params: dict[str, np.ndarray] = {"c_content": c_content}
    if config.mode in ("content_only", "raw_baseline"):
        return params, content, None, None, None, None

    c_structure = np.zeros((n, n))
    params["c_structure"] = c_structure
    stream_inputs = [np.asarray(f, dtype=np.float64) for f in bundle.layer_features]
    graphs = [build_knn_graph(f, config.k) for f in stream_inputs]
    dims = [f.shape[1] for f in stream_inputs]
    hidden = min(dims)
    stack = init_gcn_stack(dims, hidden, rng)
    fusion = init_fusion_weights(len(dims), hidden, rng)
    for i in range(len(dims)):
        params[f"stream{i}.layer1"] = stack.layer1[i]
        params[f"stream{i}.layer2"] = stack.layer2[i]
    for i in range(len(dims)):
        params[f"fusion{i}"] = fusion.weights[i]
    return params, content, stream_inputs, graphs, stack, fusion


def _forward_structure(
    stream_inputs: list[np.ndarray],
    graphs: list[KnnGraph],
    stack: GcnStack,
    fusion: FusionWeights,
) -> tuple[np.ndarray, list[StreamCache]]:
    streams, caches = [], []
    for feats, graph, w1, w2 in zip(stream_inputs, graphs, stack.layer1, stack.layer2):
        out, cache = gcn_forward_cached(feats, graph.norm_propagation, w1, w2)
        streams.append(out)
        caches.append(cache)
    fused_rows = fuse_features(streams, fusion)
    return fused_rows.T, caches  # samples as columns


def save_params(params: dict[str, np.ndarray], path) -> None:
    """Checkpoint parameters in the bundle binary convention plus a manifest."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, arr in params.items():
        fname = name.replace(".", "_") + ".bin"
        feature_io.write_matrix(root / fname, arr)
        entries.append({"name": name, "file": fname, "rows": int(arr.shape[0]), "cols": int(arr.shape[1])})
    manifest = {"version": 1, "dtype": feature_io.DTYPE_TAG, "params": entries}
    (root / "params.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_params(path) -> dict[str, np.ndarray]:
    root = Path(path)
    manifest = json.loads((root / "params.json").read_text())
    out = {}
    for entry in manifest["params"]:
        raw = (root / entry["file"]).read_bytes()
        arr = np.frombuffer(raw, dtype=feature_io.FLOAT_DTYPE)
        out[entry["name"]] = arr.reshape(entry["rows"], entry["cols"]).copy()
    return out


def train(bundle: FeatureBundle, config: TrainConfig) -> TrainResult:
    """Run the joint optimization for exactly ``config.epochs`` full-graph steps.

    The loss trace holds one row per epoch (the loss entering that update)
    plus a final row with the post-training loss.  In mode ``content_only``
    the layer features are ignored and only the content objective is
    optimized; ``raw_baseline`` is the same optimization with the bundle's
    content matrix standing in for raw features.  Deterministic given
    (bundle, config).
    """
    params, content, stream_inputs, graphs, stack, fusion = prepare_training(bundle, config)
    adam = init_adam(params)
    content_modes = config.mode in ("content_only", "raw_baseline")
    lam1, lam2 = config.lambda1, config.lambda2
    trace = LossTrace(term_names=CONTENT_TERMS if content_modes else FUSED_TERMS)
    n = bundle.n

    def checkpoint(epoch: int) -> None:
        if config.checkpoint_every and epoch % config.checkpoint_every == 0:
            save_params(params, Path(config.checkpoint_dir) / f"epoch_{epoch:06d}")

    if content_modes:
        ca = params["c_content"]
        state = SelfExpressiveState(ca, np.zeros((n, n)), lam1, lam2)
        for epoch in range(config.epochs):
            residual = content - content @ ca
            l1 = float(np.abs(ca).sum())
            recon = float(lam1 * (residual * residual).sum())
            trace.append(epoch, (l1, recon), l1 + recon)
            grad = np.sign(ca) - 2.0 * lam1 * (content.T @ residual)
            adam_step(params, {"c_content": grad}, adam, config.lr)
            if config.zero_diagonal:
                np.fill_diagonal(ca, 0.0)
            checkpoint(epoch + 1)
        residual = content - content @ ca
        l1 = float(np.abs(ca).sum())
        recon = float(lam1 * (residual * residual).sum())
        trace.append(config.epochs, (l1, recon), l1 + recon)
        return TrainResult(state=state, gcn_stack=None, fusion=None, graphs=None, trace=trace)

    state = SelfExpressiveState(params["c_content"], params["c_structure"], lam1, lam2)
    grads: dict[str, np.ndarray] = {}
    for epoch in range(config.epochs):
        structure, caches = _forward_structure(stream_inputs, graphs, stack, fusion)
        total, breakdown = total_loss(content, structure, state)
        trace.append(epoch, tuple(breakdown[name] for name in FUSED_TERMS), total)

        grad_ca, grad_cs, grad_fs = total_loss_grad(content, structure, state)
        g1, g2, gf = gcn_backward(grad_fs.T, caches, fusion)
        grads["c_content"] = grad_ca
        grads["c_structure"] = grad_cs
        for i in range(stack.t):
            grads[f"stream{i}.layer1"] = g1[i]
            grads[f"stream{i}.layer2"] = g2[i]
            grads[f"fusion{i}"] = gf[i]
        adam_step(params, grads, adam, config.lr)
        if config.zero_diagonal:
            np.fill_diagonal(state.c_content, 0.0)
            np.fill_diagonal(state.c_structure, 0.0)
        checkpoint(epoch + 1)

    structure, _ = _forward_structure(stream_inputs, graphs, stack, fusion)
    total, breakdown = total_loss(content, structure, state)
    trace.append(config.epochs, tuple(breakdown[name] for name in FUSED_TERMS), total)
    return TrainResult(state=state, gcn_stack=stack, fusion=fusion, graphs=graphs, trace=trace)
