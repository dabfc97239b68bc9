import numpy as np
import pytest

from dualssc.feature_io import BundleError, FeatureBundle, load_bundle, save_bundle


def small_bundle(labels=True):
    content = np.array([[1, 0], [0, 1], [1, 1], [0, 0.5]], dtype=np.float32)
    layer3 = np.arange(12, dtype=np.float32).reshape(4, 3)
    layer6 = np.ones((4, 2), dtype=np.float32)
    return FeatureBundle(
        content=content,
        layers=(3, 6),
        layer_features=(layer3, layer6),
        labels=np.array([0, 0, 1, 1]) if labels else None,
    )


def assert_bundles_bitwise_equal(a, b):
    assert a.layers == b.layers
    assert a.content.tobytes() == b.content.tobytes()
    for x, y in zip(a.layer_features, b.layer_features):
        assert x.tobytes() == y.tobytes()
    if a.labels is None:
        assert b.labels is None
    else:
        assert np.array_equal(a.labels, b.labels)


def test_round_trip_small_bitwise(tmp_path):
    bundle = small_bundle()
    save_bundle(bundle, tmp_path)
    loaded = load_bundle(tmp_path)
    assert_bundles_bitwise_equal(bundle, loaded)


def test_round_trip_randomized_seed7(tmp_path):
    rng = np.random.default_rng(7)
    bundle = FeatureBundle(
        content=rng.standard_normal((17, 5)).astype(np.float32),
        layers=(3, 6, 9),
        layer_features=tuple(
            rng.standard_normal((17, d)).astype(np.float32) for d in (4, 6, 3)
        ),
        labels=np.concatenate([np.zeros(9, dtype=np.int64), np.ones(8, dtype=np.int64)]),
    )
    save_bundle(bundle, tmp_path)
    loaded = load_bundle(tmp_path)
    assert_bundles_bitwise_equal(bundle, loaded)
    # a second round trip through fresh storage stays bit-identical
    save_bundle(loaded, tmp_path / "again")
    assert_bundles_bitwise_equal(loaded, load_bundle(tmp_path / "again"))


def test_layer_count_matches_layer_indices(tmp_path):
    bundle = small_bundle()
    save_bundle(bundle, tmp_path)
    loaded = load_bundle(tmp_path)
    assert loaded.t == 2
    assert loaded.layers == (3, 6)


def test_file_sizes_are_exact(tmp_path):
    rng = np.random.default_rng(0)
    bundle = FeatureBundle(
        content=rng.standard_normal((1000, 384)).astype(np.float32),
        layers=(3,),
        layer_features=(rng.standard_normal((1000, 384)).astype(np.float32),),
    )
    save_bundle(bundle, tmp_path)
    assert (tmp_path / "content.bin").stat().st_size == 1000 * 384 * 4
    assert (tmp_path / "layer_3.bin").stat().st_size == 1000 * 384 * 4
    assert not (tmp_path / "labels.bin").exists()


def test_manifest_has_labels_flag(tmp_path):
    save_bundle(small_bundle(labels=False), tmp_path)
    manifest = (tmp_path / "manifest.json").read_text()
    assert '"has_labels": false' in manifest


def test_byte_length_mismatch(tmp_path):
    save_bundle(small_bundle(), tmp_path)
    data = (tmp_path / "content.bin").read_bytes()
    (tmp_path / "content.bin").write_bytes(data[: 3 * 2 * 4])  # 3 rows instead of 4
    with pytest.raises(BundleError, match=r"content\.bin.*byte length"):
        load_bundle(tmp_path)


def test_missing_file(tmp_path):
    save_bundle(small_bundle(), tmp_path)
    (tmp_path / "layer_6.bin").unlink()
    with pytest.raises(BundleError, match=r"layer_6\.bin.*missing"):
        load_bundle(tmp_path)


def test_missing_manifest(tmp_path):
    with pytest.raises(BundleError, match="manifest"):
        load_bundle(tmp_path)


def test_non_finite_rejected_with_offset(tmp_path):
    save_bundle(small_bundle(), tmp_path)
    raw = np.frombuffer((tmp_path / "content.bin").read_bytes(), dtype="<f4").copy()
    raw[5] = np.nan
    (tmp_path / "content.bin").write_bytes(raw.tobytes())
    with pytest.raises(BundleError, match="non-finite value at offset 5"):
        load_bundle(tmp_path)


def test_label_class_gap_rejected(tmp_path):
    bundle = FeatureBundle(
        content=small_bundle().content,
        layers=(3,),
        layer_features=(np.ones((4, 2), dtype=np.float32),),
        labels=np.array([0, 0, 2, 2]),  # class 1 missing
    )
    with pytest.raises(BundleError, match=r"classes \[1\] never occur"):
        bundle.validate()


def test_label_gap_rejected_on_load(tmp_path):
    good = FeatureBundle(
        content=small_bundle().content,
        layers=(3,),
        layer_features=(np.ones((4, 2), dtype=np.float32),),
        labels=np.array([0, 0, 1, 1]),
    )
    save_bundle(good, tmp_path)
    bad = np.array([0, 0, 2, 2], dtype="<u4")
    (tmp_path / "labels.bin").write_bytes(bad.tobytes())
    with pytest.raises(BundleError, match=r"labels\.bin.*classes \[1\]"):
        load_bundle(tmp_path)


def test_row_count_mismatch_rejected():
    bundle = FeatureBundle(
        content=np.ones((4, 2), dtype=np.float32),
        layers=(3,),
        layer_features=(np.ones((5, 2), dtype=np.float32),),
    )
    with pytest.raises(BundleError, match="layer_3: 5 rows, expected 4"):
        bundle.validate()


def test_layers_must_increase():
    bundle = FeatureBundle(
        content=np.ones((2, 2), dtype=np.float32),
        layers=(6, 3),
        layer_features=(np.ones((2, 2), dtype=np.float32),) * 2,
    )
    with pytest.raises(BundleError, match="strictly increasing"):
        bundle.validate()


def test_at_least_one_layer_required():
    bundle = FeatureBundle(
        content=np.ones((2, 2), dtype=np.float32),
        layers=(),
        layer_features=(),
    )
    with pytest.raises(BundleError, match="at least one"):
        bundle.validate()
