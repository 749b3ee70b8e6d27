import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from shapack.dataset import DataError, Dataset, Schema, StandardizationStats, load_csv, one_hot_encode, standardize


class TestLoadCsv:
    def test_empty_cell_is_missing(self):
        data = load_csv("a,b\n1,2\n,3\n")
        assert data.values.shape == (2, 2)
        assert math.isnan(data.values[1, 0])
        assert data.values[1, 1] == 3.0

    def test_non_numeric(self):
        with pytest.raises(DataError, match="non-numeric cell row 1 col a"):
            load_csv("a\nx\n")

    def test_labels(self):
        data = load_csv("a,y\n1,0\n2,1\n3,1\n", Schema(label="y"))
        assert data.labels.tolist() == [False, True, True]
        assert data.feature_names == ("a",)

    def test_ragged(self):
        with pytest.raises(DataError, match="ragged row 2"):
            load_csv("a,b\n1,2\n3\n")

    def test_duplicate_header(self):
        with pytest.raises(DataError, match="duplicate header"):
            load_csv("a,a\n1,2\n")

    def test_row_id_column(self):
        data = load_csv("id,a\np1,1\np2,2\n", Schema(row_id="id"))
        assert data.row_ids == ("p1", "p2")
        assert data.feature_names == ("a",)

    def test_schema_column_must_exist(self):
        with pytest.raises(DataError, match="not in header"):
            load_csv("a\n1\n", Schema(label="y"))


def _nominal(text, **kw):
    return load_csv(text, Schema(nominal=("cc",), **kw))


class TestOneHot:
    def test_two_levels(self):
        enc = one_hot_encode(_nominal("cc\nA\nB\nA\n"))
        assert enc.feature_names == ("cc=A", "cc=B")
        assert enc.column("cc=A").tolist() == [1, 0, 1]
        assert enc.column("cc=B").tolist() == [0, 1, 0]

    def test_missing_propagates(self):
        enc = one_hot_encode(_nominal("cc,x\nA,1\nB,2\n,3\n"))
        assert np.isnan(enc.values[2, :2]).all()
        assert enc.column("x").tolist() == [1, 2, 3]

    def test_single_level(self):
        enc = one_hot_encode(_nominal("cc\nA\nA\n"))
        assert enc.feature_names == ("cc=A",)
        assert enc.column("cc=A").tolist() == [1, 1]

    def test_position_preserved(self):
        enc = one_hot_encode(_nominal("x,cc,z\n1,B,2\n3,A,4\n"))
        assert enc.feature_names == ("x", "cc=A", "cc=B", "z")

    def test_cardinality_limit(self):
        text = "cc\n" + "\n".join(f"v{i}" for i in range(5)) + "\n"
        with pytest.raises(DataError, match="5 distinct values"):
            one_hot_encode(_nominal(text, max_cardinality=4))

    def test_default_limit_is_64(self):
        text = "cc\n" + "\n".join(f"v{i}" for i in range(65)) + "\n"
        with pytest.raises(DataError, match="max 64"):
            one_hot_encode(_nominal(text))

    def test_requires_nominal(self):
        with pytest.raises(DataError):
            one_hot_encode(load_csv("a\n1\n"))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.sampled_from(["A", "B", "C", ""]), min_size=1, max_size=30))
    def test_rows_labels_and_indicator_sums(self, cells):
        labels = [str(i % 2) for i in range(len(cells))]
        text = "cc,y\n" + "\n".join(f"{c},{l}" for c, l in zip(cells, labels)) + "\n"
        raw = load_csv(text, Schema(label="y", nominal=("cc",)))
        enc = one_hot_encode(raw)
        assert enc.n_rows == raw.n_rows
        assert enc.labels.tolist() == raw.labels.tolist()
        for j, cell in enumerate(cells):
            if cell:
                assert enc.values[j].sum() == 1.0
            else:
                assert np.isnan(enc.values[j]).all()


class TestStandardize:
    def test_two_points(self):
        out, stats = standardize(Dataset(values=[[0.0], [1.0]], feature_names=("a",)))
        assert out.values[:, 0].tolist() == [-1.0, 1.0]
        assert stats.mean[0] == 0.5
        assert stats.std[0] == 0.5

    def test_constant(self):
        out, stats = standardize(Dataset(values=[[5.0], [5.0], [5.0]], feature_names=("a",)))
        assert out.values[:, 0].tolist() == [0.0, 0.0, 0.0]
        assert stats.constant.tolist() == [True]

    def test_missing_rejected(self):
        with pytest.raises(DataError, match="missing"):
            standardize(Dataset(values=[[1.0], [math.nan]], feature_names=("a",)))

    def test_empty_rejected(self):
        with pytest.raises(DataError, match="empty"):
            standardize(Dataset(values=np.empty((0, 1)), feature_names=("a",)))

    def test_stats_skip_missing(self):
        stats = StandardizationStats.from_dataset(Dataset(values=[[0.0], [math.nan], [2.0]], feature_names=("a",)))
        assert stats.mean[0] == 1.0
        assert stats.std[0] == 1.0

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (12, 3), elements=st.floats(-1e3, 1e3, allow_subnormal=False)))
    def test_moments_and_idempotence(self, X):
        data = Dataset(values=X, feature_names=("a", "b", "c"))
        once, stats = standardize(data)
        twice, _ = standardize(once)
        np.testing.assert_allclose(twice.values, once.values, atol=1e-12)
        live = ~stats.constant
        np.testing.assert_allclose(once.values.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(once.values[:, live].var(axis=0), 1.0, atol=1e-12)
