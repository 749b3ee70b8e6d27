import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import stump
from shapack.attribution import ShapMatrix, explain, glm_shap
from shapack.dataset import Dataset, StandardizationStats
from shapack.fixtures import consistency_data, consistency_models, demo_consistency
from shapack.importance import (
    ImportanceReport,
    MissingGainError,
    beta_importance,
    gain_importance,
    l1_importance,
    rank,
    variance_importance,
)
from shapack.model import GlmModel, Tree, TreeEnsemble, TreeNode


def shap_of(*columns):
    phi = np.column_stack(columns).astype(float)
    return ShapMatrix(0.0, phi, tuple(f"f{i}" for i in range(phi.shape[1])))


def gained_stump(feature, gain):
    t = stump(feature=feature)
    n = t.nodes[0]
    root = TreeNode(0, "split", feature=n.feature, threshold=n.threshold, left=1, right=2, cover=n.cover, gain=gain)
    return Tree([root, *t.nodes[1:]])


phi_arrays = arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 4)), elements=st.floats(-10, 10))


class TestVariance:
    def test_pair(self):
        assert variance_importance(shap_of([-1, 1])).scores.tolist() == [1.0]

    def test_zeros(self):
        assert variance_importance(shap_of([0, 0, 0])).scores.tolist() == [0.0]

    @settings(max_examples=50, deadline=None)
    @given(phi_arrays)
    def test_quadratic_scaling(self, phi):
        base = variance_importance(ShapMatrix(0.0, phi, tuple("abcd"[: phi.shape[1]])))
        doubled = variance_importance(ShapMatrix(0.0, 2 * phi, tuple("abcd"[: phi.shape[1]])))
        np.testing.assert_allclose(doubled.scores, 4 * base.scores, rtol=1e-12, atol=0)

    @settings(max_examples=50, deadline=None)
    @given(phi_arrays)
    def test_l1_bound(self, phi):
        shap = ShapMatrix(0.0, phi - phi.mean(axis=0), tuple("abcd"[: phi.shape[1]]))
        var, l1 = variance_importance(shap).scores, l1_importance(shap).scores
        bound = l1 / shap.n_rows * np.abs(shap.phi).max(axis=0)
        assert (var <= bound * (1 + 1e-12) + 1e-300).all()


class TestL1:
    def test_pair(self):
        assert l1_importance(shap_of([-1, 1])).scores.tolist() == [2.0]

    def test_zeros(self):
        assert l1_importance(shap_of([0, 0])).scores.tolist() == [0.0]

    @settings(max_examples=50, deadline=None)
    @given(phi_arrays, st.randoms(use_true_random=False))
    def test_row_permutation(self, phi, random):
        order = list(range(len(phi)))
        random.shuffle(order)
        names = tuple("abcd"[: phi.shape[1]])
        a = l1_importance(ShapMatrix(0.0, phi, names)).scores
        b = l1_importance(ShapMatrix(0.0, phi[order], names)).scores
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


class TestGain:
    def test_single_split(self):
        model = TreeEnsemble((gained_stump(0, 3.5),), 0.0, 2, ("a", "b"))
        assert gain_importance(model).scores.tolist() == [3.5, 0.0]

    def test_summed_over_trees(self):
        model = TreeEnsemble((gained_stump(1, 1.0), gained_stump(1, 2.0)), 0.0, 3, ("a", "b", "c"))
        scores = gain_importance(model).scores
        assert scores[1] == 3.0
        assert scores[0] == 0.0 and scores[2] == 0.0

    def test_missing_gain_names_node(self, stump_model):
        with pytest.raises(MissingGainError, match=r"trees\[0\] node 0 has no gain"):
            gain_importance(stump_model)

    def test_requires_ensemble(self):
        with pytest.raises(TypeError):
            gain_importance(GlmModel((1.0,), 0.0))


class TestBeta:
    def test_scaled_coefficient(self):
        stats = StandardizationStats(("x0",), np.array([0.0]), np.array([0.5]))
        assert beta_importance(GlmModel((2.0,), 0.0), stats).scores.tolist() == [1.0]

    def test_zero_coefficient(self):
        stats = StandardizationStats(("a", "b"), np.zeros(2), np.ones(2))
        assert beta_importance(GlmModel((0.0, 3.0), 0.0, ("a", "b")), stats).scores.tolist() == [0.0, 9.0]

    def test_unit_std_gives_squared_coefficients(self):
        stats = StandardizationStats(("a", "b"), np.zeros(2), np.ones(2))
        assert beta_importance(GlmModel((-1.5, 0.5), 0.0, ("a", "b")), stats).scores.tolist() == [2.25, 0.25]

    def test_stats_reordered_by_name(self):
        stats = StandardizationStats(("b", "a"), np.zeros(2), np.array([2.0, 1.0]))
        assert beta_importance(GlmModel((1.0, 1.0), 0.0, ("a", "b")), stats).scores.tolist() == [1.0, 4.0]

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_variance_importance(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(100, 4)) * rng.uniform(0.2, 3.0, size=4) + rng.normal(size=4)
        glm = GlmModel(tuple(rng.normal(size=4)), float(rng.normal()), ("a", "b", "c", "d"))
        data = Dataset(values=X, feature_names=glm.feature_names)
        var = variance_importance(glm_shap(glm, data))
        beta = beta_importance(glm, StandardizationStats.from_dataset(data))
        np.testing.assert_allclose(var.scores, beta.scores, rtol=1e-9, atol=1e-12)
        assert var.ranking == beta.ranking


class TestRank:
    def test_descending(self):
        assert rank([2.0, 5.0], ["a", "b"]) == (1, 0)

    def test_tie_by_name(self):
        assert rank([1.0, 1.0], ["b", "a"]) == (1, 0)

    def test_single(self):
        assert ImportanceReport("l1", [0.0], ("only",)).ranked_names() == ["only"]

    def test_report_document(self):
        report = ImportanceReport("variance", [1.0, 3.0], ("a", "b"))
        assert report.to_dict() == {"method": "variance", "scores": {"a": 1.0, "b": 3.0}, "ranking": ["b", "a"]}
        assert report.position("a") == 2

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            ImportanceReport("l1", [-1.0], ("a",))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.sampled_from([0.0, 1.0, 2.5]), min_size=1, max_size=8))
    def test_ranking_is_permutation(self, scores):
        names = [f"n{i}" for i in range(len(scores))]
        order = rank(scores, names)
        assert sorted(order) == list(range(len(scores)))
        for i, j in zip(order, order[1:]):
            assert (-scores[i], names[i]) < (-scores[j], names[j])


class TestConsistencyFixture:
    def test_gain_values(self):
        a, b = consistency_models()
        np.testing.assert_allclose(gain_importance(a).scores, [8.0, 4.84], atol=1e-12)
        np.testing.assert_allclose(gain_importance(b).scores, [6.25, 8.84], atol=1e-12)

    def test_variance_values(self):
        data = consistency_data()
        a, b = consistency_models()
        np.testing.assert_allclose(variance_importance(explain(a, data)).scores, [0.05, 0.0584], atol=1e-12)
        np.testing.assert_allclose(variance_importance(explain(b, data)).scores, [0.0725, 0.0584], atol=1e-12)

    def test_gain_ranking_flips(self):
        report = demo_consistency()
        assert report["models"]["A"]["gain_rank"] == 1
        assert report["models"]["B"]["gain_rank"] == 2
        assert report["models"]["A"]["variance_rank"] == 2
        assert report["models"]["B"]["variance_rank"] == 1
        assert report["consistent_with_expectation"]

    def test_model_b_leans_more_on_cough(self):
        # every leaf of B differs from A only through the cough term
        data = consistency_data()
        a, b = consistency_models()
        sa, sb = explain(a, data), explain(b, data)
        np.testing.assert_allclose(sb.column("fever"), sa.column("fever"), atol=1e-12)
        assert np.abs(sb.column("cough")).sum() > np.abs(sa.column("cough")).sum()
