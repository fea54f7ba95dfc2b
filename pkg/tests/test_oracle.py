"""Learners, dataset loading and gain oracles."""

import numpy as np
import pytest

from vflbargain.market import FeatureBundle
from vflbargain.oracle import (DatasetError, OracleError, SyntheticOracle, VflOracle, load_builtin,
                               load_dataset, relative_gain)
from vflbargain.oracle.learners import MLPClassifier, RandomForest, accuracy, best_split, gini, make_learner


# learners

def test_gini_values():
    got = gini(np.array([[5, 5], [10, 0], [0, 0], [3, 1]], dtype=float))
    assert got == pytest.approx([0.5, 0.0, 0.0, 1 - (0.75**2 + 0.25**2)])


def test_best_split_finds_threshold():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    j, thr, score = best_split(X, y, np.array([0]), min_leaf=1)
    assert (j, thr, score) == (0, 1.5, 0.0)


def test_best_split_constant_feature():
    j, _, _ = best_split(np.ones((4, 1)), np.array([0, 1, 0, 1]), np.array([0]), min_leaf=1)
    assert j == -1


def _blobs(seed=0, n=200):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    X = rng.normal(size=(n, 3)) + 2.0 * y[:, None]
    return X, y


@pytest.mark.parametrize("kind", ["forest", "mlp"])
def test_learners_fit_separable_and_deterministic(kind):
    X, y = _blobs()
    a = make_learner(kind, seed=3).fit(X, y)
    b = make_learner(kind, seed=3).fit(X, y)
    assert accuracy(y, a.predict(X)) > 0.9
    assert np.array_equal(a.predict_proba(X), b.predict_proba(X))


def test_learner_constructors():
    assert isinstance(make_learner("tree"), RandomForest)
    assert isinstance(make_learner("feedforward"), MLPClassifier)
    with pytest.raises(ValueError):
        make_learner("svm")


def test_accuracy_empty():
    with pytest.raises(ValueError):
        accuracy(np.array([]), np.array([]))


# datasets

def _write(tmp_path, text):
    p = tmp_path / "d.csv"
    p.write_text(text)
    return p


SCHEMA = {"label": {"column": "y", "positive": "yes"},
          "columns": {"a": {"party": "task"}, "b": {"party": "data", "encoding": "onehot"},
                      "c": {"party": "data", "encoding": "code"}}}


def test_load_dataset_encodings(tmp_path):
    p = _write(tmp_path, "a,b,c,y\n1,r,u,yes\n,g,v,no\n3,r,,no\n")
    ds = load_dataset(p, SCHEMA)
    assert ds.n_rows == 3 and ds.d_t == 1 and ds.d_d == 3
    assert ds.task_features[:, 0].tolist() == [1.0, 2.0, 3.0]  # mean imputation
    assert ds.data_feature_names == ("b=g", "b=r", "c")
    assert ds.data_sources == ("b", "c")
    assert ds.labels.tolist() == [1, 0, 0]
    assert ds.data_columns({"c"})[:, 0].tolist() == [0.0, 1.0, -1.0]


def test_missing_column_rejected(tmp_path):
    p = _write(tmp_path, "a,y\n1,yes\n")
    with pytest.raises(DatasetError, match="missing column"):
        load_dataset(p, SCHEMA)


def test_non_binary_label_rejected(tmp_path):
    p = _write(tmp_path, "a,b,c,y\n1,r,u,x\n2,r,u,y\n3,r,u,z\n")
    with pytest.raises(DatasetError, match="binary"):
        load_dataset(p, SCHEMA)


def test_party_without_columns_rejected(tmp_path):
    p = _write(tmp_path, "a,y\n1,yes\n2,no\n")
    with pytest.raises(DatasetError, match="at least one"):
        load_dataset(p, {"label": "y", "columns": {"a": {"party": "task"}}})


def test_bad_party_and_encoding(tmp_path):
    p = _write(tmp_path, "a,y\n1,yes\n")
    with pytest.raises(DatasetError, match="party"):
        load_dataset(p, {"label": "y", "columns": {"a": {"party": "nobody"}}})
    with pytest.raises(DatasetError, match="encoding"):
        load_dataset(p, {"label": "y", "columns": {"a": {"party": "task", "encoding": "weird"}}})


def test_builtin_counts():
    ds = load_builtin("titanic")
    assert (ds.n_rows, ds.d_t, ds.d_d) == (891, 10, 19)
    adult = load_builtin("adult")
    assert (adult.n_rows, adult.d_t, adult.d_d) == (48842, 52, 36)


def test_missing_builtin_reports_env(tmp_path, monkeypatch):
    monkeypatch.setenv("VFLBARGAIN_DATA_DIR", str(tmp_path))
    try:
        load_builtin("credit", tmp_path)
    except DatasetError as exc:
        assert "VFLBARGAIN_DATA_DIR" in str(exc)


# oracles

@pytest.mark.parametrize("M,M0,want", [(0.88, 0.80, 0.10), (0.80, 0.80, 0.0), (0.45, 0.50, -0.10)])
def test_relative_gain_examples(M, M0, want):
    assert relative_gain(M, M0) == pytest.approx(want, abs=1e-12)


def test_relative_gain_zero_baseline():
    with pytest.raises(OracleError):
        relative_gain(0.5, 0.0)


def test_synthetic_table_and_parametric():
    t = SyntheticOracle.from_table({"F1": 0.05})
    assert t.gain(FeatureBundle("F1", ["x1"])) == 0.05
    with pytest.raises(KeyError):
        t.gain(FeatureBundle("F9", ["x1"]))
    par = SyntheticOracle.parametric({"a": 0.2, "b": 0.3, "c": 0.0}, gmax=0.5)
    small = par.gain(FeatureBundle("s", ["a"]))
    big = par.gain(FeatureBundle("b", ["a", "b"]))
    assert 0 < small < big < 0.5
    assert par.gain(FeatureBundle("z", ["c"])) == 0.0
    with pytest.raises(KeyError):
        par.gain(FeatureBundle("u", ["q"]))
    with pytest.raises(OracleError):
        SyntheticOracle(table={"F1": 0.1}, weights={"a": 1.0})
    with pytest.raises(OracleError):
        SyntheticOracle.parametric({"a": -1.0})


def _tiny(tmp_path, same_label=False):
    rng = np.random.default_rng(0)
    n = 60
    y = np.zeros(n, int) if same_label else rng.integers(0, 2, n)
    a = rng.normal(size=n)
    b = y + 0.1 * rng.normal(size=n)
    lines = ["a,b,y"] + [f"{a[i]},{b[i]},{y[i]}" for i in range(n)]
    p = _write(tmp_path, "\n".join(lines) + "\n")
    return load_dataset(p, {"label": "y", "columns": {"a": {"party": "task"}, "b": {"party": "data"}}})


def test_vfl_oracle_memoizes(tmp_path):
    orc = VflOracle(_tiny(tmp_path), learner_params={"n_trees": 5})
    bundle = FeatureBundle("B1", ["b"])
    g1 = orc.gain(bundle)
    calls = orc.train_calls
    assert calls == 2  # baseline + bundle
    assert orc.gain(FeatureBundle("other", ["b"])) == g1
    assert orc.train_calls == calls
    assert g1 > 0
    with pytest.raises(KeyError):
        orc.gain(FeatureBundle("x", ["nope"]))


def test_vfl_oracle_single_label_baseline(tmp_path):
    orc = VflOracle(_tiny(tmp_path, same_label=True), learner_params={"n_trees": 3})
    assert orc.baseline() == 1.0
    assert orc.gain(FeatureBundle("B1", ["b"])) == 0.0


def test_vfl_oracle_bad_ratio(tmp_path):
    with pytest.raises(OracleError):
        VflOracle(_tiny(tmp_path), test_ratio=1.0)


@pytest.mark.slow
def test_titanic_golden_values():
    ds = load_builtin("titanic")
    orc = VflOracle(ds, seed=0)
    assert orc.baseline() == pytest.approx(0.7247191011235955, abs=1e-12)
    full = FeatureBundle("full", ds.data_sources)
    assert orc.gain(full) == pytest.approx(0.06976744186046513, abs=1e-12)
