"""Seeded union-of-subspaces benchmark bundles with ground truth.

Content features are unit-norm points drawn from k random r-dimensional
subspaces, concentrated in one directional cone per cluster, plus
isotropic noise.  Two of the subspaces sit at the minimum allowed
principal angle with a shared cone direction, so the content view alone
is genuinely ambiguous there.  Each layer stream holds the same clean
points pushed through a per-cluster random orthogonal map (scaled up so
reconstruction dominates the sparsity penalty) whose mapped cones are
well separated, giving the structure streams distinct but
cluster-consistent information; a seeded fraction of samples gets its
layer features perturbed so the structure view is imperfect too.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from dualssc.feature_io import FeatureBundle, save_bundle

ANGLE_FLOOR_DEG = 10.0
# the close pair of content subspaces sits just above the floor
PAIR_ANGLE_DEG = 12.0
# concentration of the per-cluster coefficient cone
CONE_KAPPA = 4.0
# scale of the per-cluster structure maps; keeps the structure
# reconstruction term dominant over the L1 penalty at unit learning weights
MAP_SCALE = 15.0
# mapped cone directions are redrawn until pairwise |cos| stays below this
MAP_CONE_COS_CAP = 0.15
# corrupted samples get an additive bump of this fraction of their norm
CORRUPTION_BUMP = 1.0
MAX_DRAW_ATTEMPTS = 200


@dataclass(frozen=True)
class SubspaceSpec:
    ambient_dim: int = 50
    subspace_dim: int = 4
    clusters: int = 5
    per_cluster: int = 60
    noise_sigma: float = 0.01
    structure_corruption: float = 0.1
    seed: int = 0
    layers: tuple[int, ...] = (3, 6, 9)

    @property
    def n(self) -> int:
        return self.clusters * self.per_cluster

    def validate(self) -> "SubspaceSpec":
        if self.subspace_dim < 1 or self.subspace_dim >= self.ambient_dim:
            raise ValueError(
                f"subspace_dim must satisfy 1 <= r < d, got r={self.subspace_dim} d={self.ambient_dim}"
            )
        if self.clusters < 1 or self.per_cluster < 1:
            raise ValueError("clusters and per_cluster must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if not 0.0 <= self.structure_corruption <= 1.0:
            raise ValueError("structure_corruption must lie in [0, 1]")
        if len(self.layers) < 1 or any(b <= a for a, b in zip(self.layers, self.layers[1:])):
            raise ValueError("layers must be non-empty and strictly increasing")
        return self


DEFAULT_SPEC = SubspaceSpec()


@dataclass(frozen=True)
class SubspaceOracle:
    """Ground-truth generator state kept for oracle checks."""

    bases: np.ndarray        # clusters x d x r, orthonormal columns
    corrupted: np.ndarray    # sorted sample indices with perturbed layer features


def min_principal_angle_deg(basis_a: np.ndarray, basis_b: np.ndarray) -> float:
    """Smallest principal angle between two orthonormal-column subspaces."""
    smax = np.linalg.svd(basis_a.T @ basis_b, compute_uv=False)[0]
    return float(np.degrees(np.arccos(np.clip(smax, -1.0, 1.0))))


def _draw_bases(spec: SubspaceSpec, rng: np.random.Generator) -> np.ndarray:
    """Seeded bases with pairwise principal angles >= the floor.

    When the dimensions allow it, bases 0 and 1 are a rotated pair with
    every principal angle equal to PAIR_ANGLE_DEG; the remaining bases
    are independent draws.  Violations of the floor trigger a redraw.
    """
    d, r, k = spec.ambient_dim, spec.subspace_dim, spec.clusters
    make_pair = k >= 2 and 2 * r <= d
    for _ in range(MAX_DRAW_ATTEMPTS):
        bases = np.empty((k, d, r))
        start = 0
        if make_pair:
            q, _ = np.linalg.qr(rng.standard_normal((d, 2 * r)))
            theta = np.radians(PAIR_ANGLE_DEG)
            bases[0] = q[:, :r]
            bases[1] = q[:, :r] * np.cos(theta) + q[:, r : 2 * r] * np.sin(theta)
            start = 2
        for c in range(start, k):
            q, _ = np.linalg.qr(rng.standard_normal((d, r)))
            bases[c] = q[:, :r]
        angles = [
            min_principal_angle_deg(bases[a], bases[b])
            for a in range(k)
            for b in range(a + 1, k)
        ]
        if not angles or min(angles) >= ANGLE_FLOOR_DEG:
            return bases
    raise ValueError(
        f"infeasible spec: could not draw {k} subspaces of dim {r} in R^{d} "
        f"with pairwise principal angles >= {ANGLE_FLOOR_DEG} degrees"
    )


def _draw_stream_maps(
    rng: np.random.Generator, dim: int, cone_dirs: np.ndarray
) -> list[np.ndarray]:
    """Per-cluster random orthogonal maps whose mapped cone directions separate."""
    k = cone_dirs.shape[0]
    best = None
    for _ in range(MAX_DRAW_ATTEMPTS):
        maps = []
        mapped = np.empty((k, dim))
        for c in range(k):
            q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
            maps.append(q)
            v = q @ cone_dirs[c]
            mapped[c] = v / np.linalg.norm(v)
        cos = np.abs(mapped @ mapped.T)
        np.fill_diagonal(cos, 0.0)
        worst = float(cos.max()) if k > 1 else 0.0
        if best is None or worst < best[0]:
            best = (worst, maps)
        if worst <= MAP_CONE_COS_CAP:
            return maps
    return best[1]


def _random_unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def generate_with_oracle(spec: SubspaceSpec) -> tuple[FeatureBundle, SubspaceOracle]:
    """Generate a labeled bundle plus the generator state for oracle checks."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    d, r, k, m = spec.ambient_dim, spec.subspace_dim, spec.clusters, spec.per_cluster
    n = spec.n

    bases = _draw_bases(spec, rng)
    pair = k >= 2 and 2 * r <= d

    points = np.empty((n, d))
    cone_dirs = np.empty((k, d))
    mu_shared = _random_unit(rng, r)
    for c in range(k):
        # the close subspace pair shares its cone coefficients, so the
        # content view cannot separate those two clusters reliably
        mu = mu_shared if (pair and c <= 1) else _random_unit(rng, r)
        coeffs = CONE_KAPPA * mu[None, :] + rng.standard_normal((m, r))
        pts = coeffs @ bases[c].T
        norms = np.linalg.norm(pts, axis=1)
        while (norms < 1e-12).any():
            bad = norms < 1e-12
            pts[bad] = (
                CONE_KAPPA * mu[None, :] + rng.standard_normal((int(bad.sum()), r))
            ) @ bases[c].T
            norms = np.linalg.norm(pts, axis=1)
        points[c * m : (c + 1) * m] = pts / norms[:, None]
        cone_dirs[c] = bases[c] @ mu

    content = points + spec.noise_sigma * rng.standard_normal((n, d))

    layer_features = []
    for _ in spec.layers:
        maps = _draw_stream_maps(rng, d, cone_dirs)
        stream = np.empty((n, d))
        for c in range(k):
            stream[c * m : (c + 1) * m] = points[c * m : (c + 1) * m] @ (MAP_SCALE * maps[c]).T
        layer_features.append(stream)

    count = int(round(spec.structure_corruption * n))
    corrupted = (
        np.sort(rng.choice(n, size=count, replace=False))
        if count
        else np.empty(0, dtype=np.int64)
    )
    for i in corrupted:
        for stream in layer_features:
            bump = rng.standard_normal(d)
            scale = CORRUPTION_BUMP * np.linalg.norm(stream[i]) / np.linalg.norm(bump)
            stream[i] = stream[i] + scale * bump

    labels = np.repeat(np.arange(k, dtype=np.int64), m)
    bundle = FeatureBundle(
        content=content,
        layers=spec.layers,
        layer_features=tuple(layer_features),
        labels=labels,
    ).validate()
    return bundle, SubspaceOracle(bases=bases, corrupted=corrupted.astype(np.int64))


def generate(spec: SubspaceSpec) -> FeatureBundle:
    """Generate a labeled union-of-subspaces bundle; deterministic per seed."""
    bundle, _ = generate_with_oracle(spec)
    return bundle


def write_bundle(spec: SubspaceSpec, path) -> FeatureBundle:
    """Materialize a synthetic bundle on disk plus a generator sidecar.

    The sidecar (bases.bin as float64 plus generator.json) lets tests
    recompute subspace angles and corruption membership from storage.
    """
    bundle, oracle = generate_with_oracle(spec)
    root = Path(path)
    save_bundle(bundle, root)
    (root / "bases.bin").write_bytes(np.ascontiguousarray(oracle.bases, dtype="<f8").tobytes())
    sidecar = {
        "spec": {
            "ambient_dim": spec.ambient_dim,
            "subspace_dim": spec.subspace_dim,
            "clusters": spec.clusters,
            "per_cluster": spec.per_cluster,
            "noise_sigma": spec.noise_sigma,
            "structure_corruption": spec.structure_corruption,
            "seed": spec.seed,
            "layers": list(spec.layers),
        },
        "bases": {"file": "bases.bin", "dtype": "float64-le", "shape": list(oracle.bases.shape)},
        "corrupted": [int(i) for i in oracle.corrupted],
    }
    (root / "generator.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return bundle


def parse_spec_string(text: str) -> SubspaceSpec:
    """Parse ``default`` or ``d=50,r=4,clusters=5,per=60,sigma=0.01,corruption=0.1``.

    Unset keys keep their defaults; an explicit ``seed=`` overrides the
    generator seed independently of the run seed.
    """
    if text == "default":
        return DEFAULT_SPEC
    keys = {
        "d": ("ambient_dim", int),
        "r": ("subspace_dim", int),
        "clusters": ("clusters", int),
        "per": ("per_cluster", int),
        "sigma": ("noise_sigma", float),
        "corruption": ("structure_corruption", float),
        "seed": ("seed", int),
    }
    spec = DEFAULT_SPEC
    for item in text.split(","):
        if not item:
            continue
        if "=" not in item:
            raise ValueError(f"bad synthetic spec item {item!r}; expected key=value")
        key, value = item.split("=", 1)
        if key not in keys:
            raise ValueError(f"unknown synthetic spec key {key!r} (known: {sorted(keys)})")
        field_name, cast = keys[key]
        spec = replace(spec, **{field_name: cast(value)})
    return spec.validate()
