import json

import numpy as np
import pytest

from rnnkit import data
from rnnkit.data import (DataError, EncodingConfig, RawDataset, Schema, check_counts,
                         encode_targets, load_csv, load_dataset, normalize_and_encode,
                         stratified_split)
from rnnkit.fetch import FetchError, fetch_dataset

from conftest import have_dataset


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


SCHEMA = Schema(label_column="class", missing_token="?", class_order=("a", "b"))


def test_load_csv_basic(tmp_path):
    p = write(tmp_path, "x,y,class\n1.5,2,a\n3,4,b\n?,1,a\n\n")
    raw = load_csv(p, SCHEMA)
    assert raw.raw_row_count == 3 and raw.dropped_rows == 1
    np.testing.assert_array_equal(raw.features, [[1.5, 2], [3, 4]])
    assert raw.labels.tolist() == [0, 1] and raw.attribute_names == ["x", "y"]


def test_load_csv_errors_carry_line_numbers(tmp_path):
    with pytest.raises(DataError, match=":3:"):
        load_csv(write(tmp_path, "x,class\n1,a\n2\n"), SCHEMA)
    with pytest.raises(DataError, match=":2: unknown label"):
        load_csv(write(tmp_path, "x,class\n1,c\n"), SCHEMA)
    with pytest.raises(DataError, match=":2:"):
        load_csv(write(tmp_path, "x,class\n1;5,a\n"), SCHEMA)


def test_schema_rejects_unknown_keys():
    with pytest.raises(DataError):
        Schema.from_dict({"label_column": "c", "sep": ";"})


def test_headerless_schema(tmp_path):
    p = write(tmp_path, "1,2,b\n3,4,a\n")
    raw = load_csv(p, Schema(label_column=2, header=False))
    assert raw.class_names == ["b", "a"] and raw.features.shape == (2, 2)


def _raw(features, labels, names=("a", "b")):
    f = np.asarray(features, dtype=float)
    return RawDataset("t", f, np.asarray(labels), list(names),
                      [f"x{i}" for i in range(f.shape[1])], len(f))


def test_affine_endpoints_and_constant_attribute():
    raw = _raw([[1, 5], [10, 5], [5.5, 5]], [0, 1, 0])
    ds = normalize_and_encode(raw)
    np.testing.assert_allclose(ds.inputs[:, 0], [0.1, 1.0, 0.55])
    np.testing.assert_allclose(ds.inputs[:, 1], 0.55)


def test_target_encoding():
    t = encode_targets([1], 3)
    np.testing.assert_allclose(t, [[0.1, 0.9, 0.1]])


def test_test_rows_use_train_range_and_clamp():
    raw = _raw([[0], [10], [20], [-5], [2], [8]], [0, 1, 0, 1, 0, 1])
    split = data.Split(np.array([0, 1, 4, 5]), np.array([2, 3]))
    ds = normalize_and_encode(raw, split)
    assert ds.feature_min[0] == 0 and ds.feature_max[0] == 10
    np.testing.assert_allclose(ds.inputs[[2, 3], 0], [1.0, 0.1])
    assert np.all((ds.inputs >= 0.1) & (ds.inputs <= 1.0))


def test_denormalize_round_trip(rng):
    raw = _raw(rng.normal(size=(40, 3)) * [1, 100, 1e-3], rng.integers(0, 2, 40))
    ds = normalize_and_encode(raw)
    np.testing.assert_allclose(ds.denormalize(ds.inputs), raw.features, rtol=1e-9, atol=1e-12)


def test_stratified_split_counts_and_determinism():
    labels = np.repeat([0, 1, 2], 50)
    s1 = stratified_split(labels, 0.2, 5)
    s2 = stratified_split(labels, 0.2, 5)
    np.testing.assert_array_equal(s1.test, s2.test)
    assert len(s1.test) == 30
    assert np.bincount(labels[s1.test]).tolist() == [10, 10, 10]
    assert not set(s1.train) & set(s1.test)
    assert not np.array_equal(stratified_split(labels, 0.2, 6).test, s1.test)


def test_stratified_split_proportions_within_one():
    labels = np.array([0] * 444 + [1] * 239)
    s = stratified_split(labels, 0.2, 0)
    for c, n in ((0, 444), (1, 239)):
        assert abs(np.sum(labels[s.test] == c) - 0.2 * n) <= 1


def test_stratified_split_errors():
    with pytest.raises(DataError):
        stratified_split([0, 0, 1], 0.5, 0)
    with pytest.raises(ValueError):
        stratified_split([0, 0, 1, 1], 1.0, 0)


def test_check_counts_ovarian_classes():
    good = _raw(np.zeros((216, 100)), [0] * 121 + [1] * 95, ("cancer", "normal"))
    check_counts(good, "ovarian")
    bad = _raw(np.zeros((216, 100)), [0] * 120 + [1] * 96, ("cancer", "normal"))
    with pytest.raises(DataError):
        check_counts(bad, "ovarian")


def test_fetch_from_source_dir(tmp_path):
    src = tmp_path / "raw"
    src.mkdir()
    (src / "glass.data").write_text("1,1.52,13.6,4.4,1.1,71.7,0.06,8.7,0,0,1\n"
                                    "2,1.51,14.0,0.0,2.1,72.7,0.0,9.2,0.6,0,7\n")
    info = fetch_dataset("glass", tmp_path / "out", src, download=False)
    assert info["rows"] == 2 and not info["checksum_verified"]
    raw = load_csv(tmp_path / "out" / "glass.csv",
                   Schema.load(tmp_path / "out" / "glass.schema.json"))
    assert raw.labels.tolist() == [0, 1] and raw.class_names == ["window", "non-window"]


def test_fetch_checksum_mismatch(tmp_path):
    (tmp_path / "iris.csv").write_text("tampered\n")
    with pytest.raises(FetchError, match="checksum"):
        fetch_dataset("iris", tmp_path / "out", tmp_path, download=False)


def test_fetch_without_source_or_network(tmp_path):
    with pytest.raises(FetchError):
        fetch_dataset("ovarian", tmp_path, tmp_path, download=False)


@pytest.mark.skipif(not have_dataset("iris"), reason="iris not fetched")
def test_iris_counts():
    raw = load_dataset("iris")
    assert (raw.raw_row_count, raw.attribute_count, len(raw.class_names)) == (150, 4, 3)
    assert raw.class_counts() == {"Setosa": 50, "Versicolour": 50, "Virginica": 50}
    ds = normalize_and_encode(raw)
    assert ds.targets[raw.labels == 1][0].tolist() == [0.1, 0.9, 0.1]


@pytest.mark.skipif(not have_dataset("bcw"), reason="bcw not fetched")
def test_bcw_counts():
    raw = load_dataset("bcw")
    assert raw.raw_row_count == 699 and raw.dropped_rows == 16 and len(raw.labels) == 683
    s = stratified_split(raw, 0.2, 0)
    hist = np.bincount(raw.labels)
    for c in range(2):
        assert abs(np.sum(raw.labels[s.test] == c) - 0.2 * hist[c]) <= 1


def test_no_leakage(rng):
    raw = _raw(rng.normal(size=(50, 2)), np.repeat([0, 1], 25))
    s = stratified_split(raw, 0.2, 1)
    ds = normalize_and_encode(raw, s)
    np.testing.assert_array_equal(ds.feature_min, raw.features[s.train].min(0))
    np.testing.assert_array_equal(ds.feature_max, raw.features[s.train].max(0))
