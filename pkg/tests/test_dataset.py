import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condf.dataset import (
    Dataset,
    benchmark_feature_names,
    load_csv,
    stratified_split,
    write_csv,
    zscore_apply,
    zscore_fit,
)
from condf.errors import FitError, LabelError, ParseError, SchemaError, ShapeError, SplitError


def _ds(X, y, names=None):
    X = np.asarray(X, dtype=float)
    names = names or [f"f{i}" for i in range(X.shape[1])]
    return Dataset(names, X, np.asarray(y), "t")


def _labels(n_in, n_out):
    return np.array([0] * n_in + [1] * n_out)


def test_benchmark_names():
    names = benchmark_feature_names()
    assert len(names) == 89 == len(set(names))
    assert names[0] == "ST01" and names[-1] == "NBC16"


class TestLoadCsv:
    def test_three_rows_round_trip_labels(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("a,b,label\n1,2,InTrace\n3,4,OutTrace\n5,6,InTrace\n")
        d = load_csv(p)
        assert d.labels == ["InTrace", "OutTrace", "InTrace"]
        assert d.feature_names == ("a", "b")
        np.testing.assert_array_equal(d.X, [[1, 2], [3, 4], [5, 6]])
        assert d.project_name == "p"

    def test_label_column_anywhere(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("label,a\nOutTrace,1.5\n")
        d = load_csv(p)
        assert d.feature_names == ("a",) and d.X[0, 0] == 1.5

    def test_header_only(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("a,b,label\n")
        d = load_csv(p)
        assert d.n_rows == 0 and d.n_features == 2

    def test_missing_label_column(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("a,b\n1,2\n")
        with pytest.raises(SchemaError):
            load_csv(p)

    def test_non_numeric_cell_reports_position(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("a,b,label\n1,2,InTrace\n1,x,OutTrace\n")
        with pytest.raises(ParseError) as err:
            load_csv(p)
        assert err.value.row == 3 and err.value.column == "b"

    def test_unknown_label(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("a,label\n1,Maybe\n")
        with pytest.raises(LabelError):
            load_csv(p)

    def test_warns_on_non_benchmark_width(self, tmp_path, caplog):
        p = tmp_path / "p.csv"
        p.write_text("a,label\n1,InTrace\n")
        load_csv(p)
        assert "89" in caplog.text

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=3, max_size=3), min_size=1, max_size=20))
    def test_write_read_round_trip(self, tmp_path_factory, rows):
        d = _ds(rows, [i % 2 for i in range(len(rows))])
        p = tmp_path_factory.mktemp("rt") / "d.csv"
        write_csv(d, p)
        back = load_csv(p)
        np.testing.assert_allclose(back.X, d.X, rtol=0, atol=1e-12)
        assert back.labels == d.labels


def test_dataset_invariants():
    with pytest.raises(ShapeError):
        _ds([[1, 2]], [0, 1])
    with pytest.raises(SchemaError):
        _ds([[1, 2]], [0], names=["a", "a"])
    with pytest.raises(LabelError):
        _ds([[1]], [2])
    assert _ds([[1]], ["OutTrace"]).y.tolist() == [1]


class TestZscore:
    def test_fit_arithmetic(self):
        p = zscore_fit(_ds([[1], [2], [3]], [0, 1, 0]))
        assert p.means[0] == 2
        assert p.stds[0] == pytest.approx(math.sqrt(2 / 3), abs=1e-15)

    def test_constant_column(self):
        p = zscore_fit(_ds([[5], [5], [5]], [0, 1, 0]))
        assert p.means[0] == 5 and p.stds[0] == 0
        out = zscore_apply(p, _ds([[5], [7]], [0, 1]))
        np.testing.assert_array_equal(out.X, [[0], [0]])

    def test_standardized_column_is_fixed_point(self):
        col = np.array([-1.0, 1.0, -1.0, 1.0])
        p = zscore_fit(_ds(col[:, None], [0, 1, 0, 1]))
        assert p.means[0] == 0 and p.stds[0] == 1

    def test_apply_formula(self):
        from condf.dataset import ScalerParams

        out = zscore_apply(ScalerParams(np.array([2.0]), np.array([2.0])), _ds([[4]], [0]))
        assert out.X[0, 0] == 1

    def test_empty_fit(self):
        with pytest.raises(FitError):
            zscore_fit(_ds(np.zeros((0, 2)), []))

    def test_shape_mismatch(self):
        p = zscore_fit(_ds([[1, 2], [3, 4]], [0, 1]))
        with pytest.raises(ShapeError):
            zscore_apply(p, _ds([[1]], [0]))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 40), st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_standardized_moments(self, n, d, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(rng.uniform(-100, 100, d), rng.uniform(0.01, 50, d), size=(n, d))
        X[:, 0] = 3.0
        data = _ds(X, rng.integers(0, 2, n))
        Z = zscore_apply(zscore_fit(data), data).X
        assert np.abs(Z.mean(axis=0)).max() < 1e-9
        assert np.abs(Z[:, 1:].std(axis=0) - 1).max() < 1e-6 if d > 1 else True


class TestStratifiedSplit:
    def test_codec_counts(self):
        # Codec: 177 InTrace / 433 OutTrace
        d = _ds(np.arange(610)[:, None], _labels(177, 433))
        s = stratified_split(d, 7)
        assert s.train.class_counts().tolist() == [88, 216]
        assert s.test.class_counts().tolist() == [89, 217]

    def test_needs_two_per_class(self):
        with pytest.raises(SplitError):
            stratified_split(_ds([[0], [1]], [0, 1]), 0)

    def test_deterministic(self):
        d = _ds(np.arange(40)[:, None], _labels(10, 30))
        a, b = stratified_split(d, 3), stratified_split(d, 3)
        np.testing.assert_array_equal(a.train.X, b.train.X)
        np.testing.assert_array_equal(a.test.X, b.test.X)
        assert not np.array_equal(a.train.X, stratified_split(d, 4).train.X)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 60), st.integers(2, 60), st.integers(0, 2**32 - 1))
    def test_partition_and_proportions(self, n_in, n_out, seed):
        d = _ds(np.arange(n_in + n_out)[:, None], _labels(n_in, n_out))
        s = stratified_split(d, seed)
        rows = sorted(s.train.X[:, 0].tolist() + s.test.X[:, 0].tolist())
        assert rows == list(range(n_in + n_out))
        assert s.train.class_counts().tolist() == [n_in // 2, n_out // 2]
        for c, n in enumerate((n_in, n_out)):
            assert abs(s.train.class_counts()[c] - n / 2) <= 1
