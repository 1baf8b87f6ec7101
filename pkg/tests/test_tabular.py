import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_dataset
from imputebench.errors import (EmptyDatasetError, IngestionError, InfeasibleFoldsError, MaskOverlapError,
                                UndefinedRangeError)
from imputebench.rng import PortableRNG, derive_seed
from imputebench.tabular import (UNIT, MissingMask, apply_mask, apply_normalizer, fit_normalizer,
                                 invert_normalizer, load_csv, stratified_kfold, write_csv)


def _iris_like(path, n_per_class=50):
    rng = np.random.default_rng(0)
    lines = ["sepal_length,sepal_width,petal_length,petal_width,species"]
    for cls in ("setosa", "versicolor", "virginica"):
        for _ in range(n_per_class):
            x = rng.uniform(0, 8, 4).round(1)
            lines.append(",".join(map(str, x)) + "," + cls)
    path.write_text("\n".join(lines) + "\n")
    return path


def test_load_iris_like(tmp_path):
    d = load_csv(_iris_like(tmp_path / "iris.csv"))
    assert d.n_rows == 150
    assert d.n_features == 4
    assert d.schema[-1].is_target
    assert d.schema[-1].categories == ("setosa", "versicolor", "virginica")
    assert np.bincount(d.target_codes.astype(int)).tolist() == [50, 50, 50]


def test_empty_string_is_missing(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("a,b,y\n1.0,,x\n2.0,3.0,y\n?,4,x\n")
    d = load_csv(p)
    assert np.isnan(d.values[0, 1]) and np.isnan(d.values[2, 0])
    assert MissingMask.natural(d).origin == "natural"
    assert MissingMask.natural(d).count == 2


def test_header_only_is_empty(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("a,b,y\n")
    with pytest.raises(EmptyDatasetError):
        load_csv(p)


def test_ragged_row_is_named(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("a,b,y\n1,2,x\n1,x\n")
    with pytest.raises(IngestionError, match="row 2"):
        load_csv(p)


def test_missing_target_rejected(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,y\n1,x\n2,\n")
    with pytest.raises(IngestionError):
        load_csv(p)


def test_categorical_codes_follow_first_appearance(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("color,v,y\nred,1,a\nblue,2,b\nred,3,a\n")
    d = load_csv(p)
    assert d.schema[0].categories == ("red", "blue")
    assert d.values[:, 0].tolist() == [0.0, 1.0, 0.0]


def test_csv_round_trip(tmp_path, rng):
    X = rng.normal(size=(12, 3))
    X[2, 1] = np.nan
    d = make_dataset(X, name="rt")
    write_csv(d, tmp_path / "rt.csv")
    back = load_csv(tmp_path / "rt.csv", schema_hint=d.schema, name="rt")
    assert back.equals(d)


def test_values_are_read_only(toy):
    with pytest.raises(ValueError):
        toy.values[0, 0] = 1.0


def test_normalizer_examples():
    d = make_dataset(np.array([[0.0, 2.0, 3.0], [5.0, 4.0, 3.0], [2.0, 10.0, 3.0]]))
    p = fit_normalizer(d)
    assert p.ranges[0] == (0.0, 5.0)
    assert p.constant == {2}
    u = apply_normalizer(d, p)
    assert u.scale == UNIT
    assert u.values[1, 1] == 0.25  # (4 - 2) / (10 - 2)
    assert u.values[0, 1] == 0.0 and u.values[2, 1] == 1.0
    assert np.all(u.values[:, 2] == 0.0)
    test = make_dataset(np.array([[1.0, 12.0, 3.0]]), y=[0], n_classes=2)
    assert apply_normalizer(test, p).values[0, 1] == 1.25


def test_normalizer_undefined_range():
    d = make_dataset(np.array([[np.nan, 1.0], [np.nan, 2.0]]))
    with pytest.raises(UndefinedRangeError):
        fit_normalizer(d)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.integers(1, 5), st.integers(0, 2**31))
def test_normalizer_inverts(n, p, seed):
    X = np.random.default_rng(seed).normal(size=(n, p)) * 10
    d = make_dataset(X)
    params = fit_normalizer(d)
    u = apply_normalizer(d, params)
    assert np.nanmin(u.values[:, :p]) >= 0.0 and np.nanmax(u.values[:, :p]) <= 1.0
    back = invert_normalizer(u, params)
    np.testing.assert_allclose(back.values[:, :p], X, rtol=1e-12, atol=1e-9)


def test_kfold_balanced():
    y = np.repeat([0, 1, 2], 50)
    d = make_dataset(np.zeros((150, 2)), y=y)
    f = stratified_kfold(d, 5, seed=7)
    for k in range(5):
        rows = f.rows(k)
        assert rows.size == 30
        assert np.bincount(y[rows], minlength=3).tolist() == [10, 10, 10]


def test_kfold_deterministic():
    d = make_dataset(np.zeros((37, 2)), y=np.arange(37) % 3)
    a = stratified_kfold(d, 5, seed=3).fold_of_row
    b = stratified_kfold(d, 5, seed=3).fold_of_row
    assert np.array_equal(a, b)


def test_kfold_pigeonhole():
    d = make_dataset(np.zeros((7, 1)), y=np.zeros(7), n_classes=1)
    f = stratified_kfold(d, 5, seed=0)
    counts = sorted(np.bincount(f.fold_of_row, minlength=5).tolist(), reverse=True)
    assert counts == [2, 2, 1, 1, 1]


def test_kfold_infeasible():
    d = make_dataset(np.zeros((3, 1)))
    with pytest.raises(InfeasibleFoldsError):
        stratified_kfold(d, 4, 0)
    with pytest.raises(InfeasibleFoldsError):
        stratified_kfold(d, 1, 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 80), st.integers(2, 5), st.integers(1, 4), st.integers(0, 1000))
def test_kfold_properties(n, k, n_classes, seed):
    y = np.random.default_rng(seed).integers(0, n_classes, n)
    d = make_dataset(np.zeros((n, 1)), y=y, n_classes=n_classes)
    f = stratified_kfold(d, k, seed)
    sizes = np.bincount(f.fold_of_row, minlength=k)
    assert sizes.sum() == n and sizes.max() - sizes.min() <= 1
    for c in range(n_classes):
        per = np.bincount(f.fold_of_row[y == c], minlength=k)
        assert per.max() - per.min() <= 1
    train, test = f.split(0)
    assert np.intersect1d(train, test).size == 0 and train.size + test.size == n


def test_apply_mask_examples(rng):
    d = make_dataset(rng.normal(size=(100, 4)))
    empty, store = apply_mask(d, MissingMask.empty(d.shape))
    assert empty.equals(d) and len(store) == 0
    bits = np.zeros(d.shape, bool)
    bits[3, 1] = True
    one, store = apply_mask(d, MissingMask(bits))
    assert store.entries == {(3, 1): d.values[3, 1]}
    assert np.isnan(one.values[3, 1])
    bits = np.zeros(d.shape, bool)
    bits[:, :4].flat[rng.choice(400, 40, replace=False)] = True
    masked, store = apply_mask(d, MissingMask(bits))
    assert len(store) == 40
    assert store.restore(masked).equals(d)


def test_apply_mask_errors(rng):
    X = rng.normal(size=(5, 2))
    X[0, 0] = np.nan
    d = make_dataset(X)
    bits = np.zeros(d.shape, bool)
    bits[0, 0] = True
    with pytest.raises(MaskOverlapError):
        apply_mask(d, MissingMask(bits))
    bits = np.zeros(d.shape, bool)
    bits[1, d.target_index] = True
    with pytest.raises(MaskOverlapError):
        apply_mask(d, MissingMask(bits))


def test_derive_seed_stable():
    assert derive_seed(0, "folds", "iris") == derive_seed(0, "folds", "iris")
    assert derive_seed(0, "folds", "iris") != derive_seed(1, "folds", "iris")
    assert 0 <= derive_seed("x") < 2**63


def test_rng_streams():
    a, b = PortableRNG(5), PortableRNG(5)
    assert np.array_equal(a.uniform(100), b.uniform(100))
    u = PortableRNG(1).uniform(20000)
    assert 0.0 <= u.min() and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.01
    z = PortableRNG(2).normal(20000)
    assert abs(z.mean()) < 0.03 and abs(z.std() - 1.0) < 0.03
    assert sorted(PortableRNG(3).permutation(50).tolist()) == list(range(50))
    c = PortableRNG(4).choice(30, 10)
    assert len(set(c.tolist())) == 10 and c.max() < 30


def test_rng_permutation_uniform():
    # every ordering of 3 items should appear about 1/6 of the time
    counts = {}
    rng = PortableRNG(11)
    for _ in range(6000):
        key = tuple(rng.permutation(3))
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 6
    assert all(abs(v - 1000) < 150 for v in counts.values())
