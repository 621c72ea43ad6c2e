import numpy as np
import pytest

from gatedae.data import (
    LabeledDataset,
    apply_standardization,
    load_dataset,
    save_dataset,
    split_folds,
    standardize,
    synth_correlated_labels,
    synth_covariance_classes,
)
from gatedae.errors import InputError, ParseError, UsageError


def test_load_two_line_file_with_schema(tmp_path):
    f = tmp_path / "d.txt"
    f.write_text("0 0 1\n1 1 0\n")
    ds = load_dataset(f, dim=2, label_kind="class")
    assert ds.n == 2 and list(ds.labels) == [1, 0]
    assert np.array_equal(ds.features, [[0, 0], [1, 1]])


def test_load_with_header_and_empty(tmp_path):
    f = tmp_path / "h.txt"
    f.write_text("#dims 2 3 binary\n0.5 1 0 1 1\n")
    ds = load_dataset(f)
    assert ds.labels.shape == (1, 3) and ds.label_kind == "binary"
    e = tmp_path / "e.txt"
    e.write_text("")
    assert load_dataset(e, dim=3, label_kind="class").n == 0


def test_load_errors_name_the_line(tmp_path):
    f = tmp_path / "bad.txt"
    f.write_text("#dims 2 1 class\n0 0 1\n1 nan 0\n")
    with pytest.raises(ParseError, match="line 3"):
        load_dataset(f)
    f.write_text("#dims 2 1 class\n0 0\n")
    with pytest.raises(ParseError, match="line 2"):
        load_dataset(f)
    f.write_text("#dims 2 1 class\n0 0 1.5\n")
    with pytest.raises(ParseError, match="line 2"):
        load_dataset(f)
    f.write_text("#dims 2 2 binary\n0 0 1 2\n")
    with pytest.raises(ParseError, match="line 2"):
        load_dataset(f)
    f.write_text("0 0 1\n")
    with pytest.raises(ParseError):
        load_dataset(f)
    f.write_text("#dims 2 1 class\n0 0 1\n")
    with pytest.raises(ParseError):
        load_dataset(f, dim=3)


def test_save_load_round_trip(tmp_path):
    ds = synth_correlated_labels(30, 4, 3, seed=1)
    save_dataset(ds, tmp_path / "r.txt")
    back = load_dataset(tmp_path / "r.txt")
    assert np.array_equal(back.features, ds.features) and np.array_equal(back.labels, ds.labels)
    cs = synth_covariance_classes(10, 3, 2, seed=2)
    save_dataset(cs, tmp_path / "c.txt")
    back = load_dataset(tmp_path / "c.txt")
    assert np.array_equal(back.features, cs.features) and np.array_equal(back.labels, cs.labels)


def test_dataset_validation():
    with pytest.raises(InputError):
        LabeledDataset(np.array([[np.nan]]), [0])
    with pytest.raises(InputError):
        LabeledDataset(np.zeros((2, 1)), [0, -1])
    with pytest.raises(InputError):
        LabeledDataset(np.zeros((2, 1)), np.full((2, 2), 0.5), "binary")
    with pytest.raises(UsageError):
        LabeledDataset(np.zeros((2, 1)), [0, 1], "ordinal")


def test_standardize_examples():
    rng = np.random.default_rng(0)
    x = rng.normal(3, 5, size=(10_000, 4))
    x[:, 2] = 7.0
    st = standardize(LabeledDataset(x, np.zeros(10_000)))
    z = st.dataset.features
    assert np.all(np.abs(z.mean(axis=0)) <= 1e-10)
    assert np.allclose(z[:, [0, 1, 3]].std(axis=0), 1.0, atol=1e-10)
    assert list(st.constant) == [False, False, True, False] and np.all(z[:, 2] == 0)
    again = standardize(st.dataset).dataset.features
    assert np.max(np.abs(again - z)) <= 1e-10
    assert np.allclose(apply_standardization(x, st.mean, st.std), z)
    with pytest.raises(UsageError):
        standardize(LabeledDataset(np.zeros((1, 2)), [0]))


def test_split_folds():
    folds = split_folds(100, 10, seed=3)
    assert len(folds) == 10
    for f in folds:
        assert (len(f.train), len(f.val), len(f.test)) == (80, 10, 10)
        assert sorted(np.concatenate(f)) == list(range(100))
    again = split_folds(100, 10, seed=3)
    assert all(np.array_equal(a.test, b.test) for a, b in zip(folds, again))
    assert not np.array_equal(folds[0].test, folds[1].test)
    odd = split_folds(37, 3, seed=0)[0]
    assert abs(len(odd.train) - 0.8 * 37) <= 1 and abs(len(odd.test) - 3.7) <= 1
    with pytest.raises(UsageError):
        split_folds(100, 10, ratios=(0.5, 0.5, 0.5))
    with pytest.raises(UsageError):
        split_folds(5, 10)


def test_covariance_generator():
    ds = synth_covariance_classes(10_000, 5, 2, seed=4)
    for k in range(2):
        x = ds.features[ds.labels == k]
        assert np.all(np.abs(x.mean(axis=0)) <= 0.05)
        assert np.max(np.abs(np.cov(x.T) - ds.meta["covariances"][k])) <= 0.05
    assert not np.allclose(ds.meta["covariances"][0], ds.meta["covariances"][1], atol=0.1)
    one = synth_covariance_classes(20, 3, 1, seed=0)
    assert np.all(one.labels == 0)
    a, b = synth_covariance_classes(5, 3, 2, seed=9), synth_covariance_classes(5, 3, 2, seed=9)
    assert np.array_equal(a.features, b.features)


def test_correlated_label_generator():
    ind = synth_correlated_labels(10_000, 6, 4, strength=0.0, seed=5)
    c = np.cov(ind.labels.T)
    assert np.max(np.abs(c - np.diag(np.diag(c)))) <= 0.02
    tied = synth_correlated_labels(10_000, 6, 4, strength=1.0, seed=5)
    assert np.corrcoef(tied.labels[:, 0], tied.labels[:, 1])[0, 1] >= 0.9
    assert tied.features.shape == (10_000, 6) and tied.labels.shape == (10_000, 4)
    a, b = synth_correlated_labels(50, 3, 2, seed=1), synth_correlated_labels(50, 3, 2, seed=1)
    assert np.array_equal(a.features, b.features) and np.array_equal(a.labels, b.labels)
    with pytest.raises(UsageError):
        synth_correlated_labels(10, 3, 1)
