"""Feature bundle disk format: a text manifest plus raw binary matrices.

A bundle directory holds

    manifest.json   text manifest (version, shapes, dtype tag, label flag)
    content.bin     n x d_content matrix of content features
    layer_<i>.bin   one n x d_i matrix per declared intermediate layer
    labels.bin      n class ids, present iff has_labels

Matrices are 32-bit little-endian floats, row-major, samples as rows;
labels are 32-bit little-endian unsigned integers.  Round-trips are
bit-exact for float32 data.  The self-expressive math uses samples as
columns, so consumers transpose at this boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = 1
DTYPE_TAG = "float32-le"
LAYOUT_TAG = "row-major"
FLOAT_DTYPE = np.dtype("<f4")
LABEL_DTYPE = np.dtype("<u4")


class BundleError(Exception):
    """A malformed bundle: missing file, size mismatch, or invalid values."""


def _check_finite(arr: np.ndarray, name: str) -> None:
    finite = np.isfinite(arr)
    if not finite.all():
        offset = int(np.flatnonzero(~finite.ravel())[0])
        raise BundleError(f"{name}: non-finite value at offset {offset}")


@dataclass(frozen=True)
class FeatureBundle:
    """Content features, per-layer structure features, optional labels.

    ``content`` is n x d_content, ``layer_features[i]`` is n x d_i and
    corresponds to layer index ``layers[i]``.  Labels, when present, are
    class ids in [0, k) with every class occurring at least once.
    """

    content: np.ndarray
    layers: tuple[int, ...]
    layer_features: tuple[np.ndarray, ...]
    labels: np.ndarray | None = None

    @property
    def n(self) -> int:
        return int(self.content.shape[0])

    @property
    def d_content(self) -> int:
        return int(self.content.shape[1])

    @property
    def t(self) -> int:
        return len(self.layers)

    def validate(self) -> "FeatureBundle":
        """Check every bundle invariant; raise BundleError on the first hit."""
        if self.content.ndim != 2:
            raise BundleError("content: expected a 2-d matrix")
        if not np.issubdtype(self.content.dtype, np.floating):
            raise BundleError("content: expected a floating dtype")
        n = self.n
        if n < 1 or self.d_content < 1:
            raise BundleError("content: empty matrix")
        _check_finite(self.content, "content")

        if len(self.layers) < 1:
            raise BundleError("layers: at least one intermediate layer required")
        if len(self.layers) != len(self.layer_features):
            raise BundleError(
                f"layers: {len(self.layers)} indices but "
                f"{len(self.layer_features)} feature matrices"
            )
        if any(b <= a for a, b in zip(self.layers, self.layers[1:])):
            raise BundleError(f"layers: indices {self.layers} not strictly increasing")
        for idx, feats in zip(self.layers, self.layer_features):
            name = f"layer_{idx}"
            if feats.ndim != 2 or not np.issubdtype(feats.dtype, np.floating):
                raise BundleError(f"{name}: expected a 2-d floating matrix")
            if feats.shape[0] != n:
                raise BundleError(f"{name}: {feats.shape[0]} rows, expected {n}")
            if feats.shape[1] < 1:
                raise BundleError(f"{name}: empty matrix")
            _check_finite(feats, name)

        if self.labels is not None:
            labels = self.labels
            if labels.ndim != 1 or not np.issubdtype(labels.dtype, np.integer):
                raise BundleError("labels: expected a 1-d integer vector")
            if labels.shape[0] != n:
                raise BundleError(f"labels: {labels.shape[0]} entries, expected {n}")
            if labels.min() < 0:
                offset = int(np.flatnonzero(labels < 0)[0])
                raise BundleError(f"labels: negative class id at offset {offset}")
            k_true = int(labels.max()) + 1
            present = np.unique(labels)
            if len(present) != k_true:
                missing = sorted(set(range(k_true)) - set(int(v) for v in present))
                raise BundleError(f"labels: classes {missing} never occur (k={k_true})")
        return self


def _read_matrix(path: Path, rows: int, cols: int, dtype: np.dtype) -> np.ndarray:
    if not path.is_file():
        raise BundleError(f"{path}: missing file")
    data = path.read_bytes()
    expected = rows * cols * dtype.itemsize
    if len(data) != expected:
        raise BundleError(
            f"{path}: byte length {len(data)} does not match manifest "
            f"({rows}x{cols}x{dtype.itemsize} = {expected})"
        )
    return np.frombuffer(data, dtype=dtype).reshape(rows, cols).copy()


def write_matrix(path: Path, arr: np.ndarray, dtype: np.dtype = FLOAT_DTYPE) -> None:
    """Write a matrix in the bundle binary convention (row-major, fixed dtype)."""
    Path(path).write_bytes(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def load_bundle(path) -> FeatureBundle:
    """Load and validate a feature bundle directory.

    Every malformed input raises BundleError naming the offending file;
    a partial bundle is never returned.
    """
    root = Path(path)
    mpath = root / MANIFEST_NAME
    if not mpath.is_file():
        raise BundleError(f"{mpath}: missing file")
    try:
        manifest = json.loads(mpath.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise BundleError(f"{mpath}: unreadable manifest ({exc})") from exc

    try:
        version = int(manifest["version"])
        n = int(manifest["n"])
        d_content = int(manifest["d_content"])
        layer_entries = [(int(e["index"]), int(e["dim"])) for e in manifest["layers"]]
        has_labels = bool(manifest["has_labels"])
        dtype_tag = manifest["dtype"]
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleError(f"{mpath}: malformed manifest field ({exc})") from exc
    if version != FORMAT_VERSION:
        raise BundleError(f"{mpath}: unsupported format version {version}")
    if dtype_tag != DTYPE_TAG:
        raise BundleError(f"{mpath}: unsupported dtype tag {dtype_tag!r}")

    content = _read_matrix(root / "content.bin", n, d_content, FLOAT_DTYPE)
    _check_finite(content, str(root / "content.bin"))

    feats = []
    for idx, dim in layer_entries:
        fpath = root / f"layer_{idx}.bin"
        mat = _read_matrix(fpath, n, dim, FLOAT_DTYPE)
        _check_finite(mat, str(fpath))
        feats.append(mat)

    labels = None
    if has_labels:
        lpath = root / "labels.bin"
        raw = _read_matrix(lpath, n, 1, LABEL_DTYPE).ravel()
        labels = raw.astype(np.int64)
        k_true = int(labels.max()) + 1 if n else 0
        present = set(int(v) for v in np.unique(labels))
        missing = sorted(set(range(k_true)) - present)
        if missing:
            raise BundleError(f"{lpath}: classes {missing} never occur (k={k_true})")

    bundle = FeatureBundle(
        content=content,
        layers=tuple(idx for idx, _ in layer_entries),
        layer_features=tuple(feats),
        labels=labels,
    )
    return bundle.validate()


def save_bundle(bundle: FeatureBundle, path) -> None:
    """Write a validated bundle to a directory; float32 inputs round-trip bit-exactly."""
    bundle.validate()
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)

    write_matrix(root / "content.bin", bundle.content)
    for idx, feats in zip(bundle.layers, bundle.layer_features):
        write_matrix(root / f"layer_{idx}.bin", feats)
    if bundle.labels is not None:
        write_matrix(root / "labels.bin", bundle.labels.reshape(-1, 1), LABEL_DTYPE)

    manifest = {
        "version": FORMAT_VERSION,
        "n": bundle.n,
        "d_content": bundle.d_content,
        "layers": [
            {"index": idx, "dim": int(feats.shape[1])}
            for idx, feats in zip(bundle.layers, bundle.layer_features)
        ],
        "dtype": DTYPE_TAG,
        "layout": LAYOUT_TAG,
        "has_labels": bundle.labels is not None,
    }
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
