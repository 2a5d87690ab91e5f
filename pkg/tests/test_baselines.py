"""PCA eigensolver, loading/correlation rankings, and Welch t-test."""

import numpy as np
import pytest

from latentgsea.baselines import (
    PcaModel,
    pca_corr_ranking,
    pca_fit,
    pca_project,
    pca_weights_ranking,
    standard_de_ttest,
)
from latentgsea.data import ExpressionMatrix

from oracles import welch_t


def matrix_from(values):
    values = np.asarray(values, dtype=np.float64)
    g, n = values.shape
    return ExpressionMatrix(
        tuple(f"g{i:03d}" for i in range(g)), tuple(f"s{j:03d}" for j in range(n)),
        values, transformed=True,
    )


class TestPcaFit:
    def test_rank_one_recovers_direction(self):
        rng = np.random.default_rng(60)
        u = rng.normal(size=30)
        v = rng.normal(size=100)
        m = matrix_from(np.outer(u, v) + 1e-9 * rng.normal(size=(30, 100)))
        model = pca_fit(m, 2, seed=0)
        cosine = abs(model.components[0] @ u) / np.linalg.norm(u)
        assert cosine > 0.999
        assert model.explained_variance[1] < 1e-6 * model.explained_variance[0]

    def test_matches_dense_eigensolver(self):
        rng = np.random.default_rng(61)
        m = matrix_from(rng.normal(size=(20, 10)))
        model = pca_fit(m, 5, seed=1)
        xc = m.values - m.values.mean(axis=1, keepdims=True)
        cov = xc @ xc.T / m.n_samples
        evals, evecs = np.linalg.eigh(cov)
        evals, evecs = evals[::-1], evecs[:, ::-1]
        assert np.allclose(model.explained_variance, evals[:5], atol=1e-8)
        for d in range(5):
            dot = abs(model.components[d] @ evecs[:, d])
            assert dot == pytest.approx(1.0, abs=1e-8)

    def test_explained_variance_bounded_by_total(self):
        rng = np.random.default_rng(62)
        m = matrix_from(rng.normal(size=(15, 40)) * rng.uniform(0.5, 3, size=(15, 1)))
        model = pca_fit(m, 10, seed=2)
        xc = m.values - m.values.mean(axis=1, keepdims=True)
        total = float(np.sum(xc * xc)) / m.n_samples
        assert model.explained_variance.sum() <= total * (1 + 1e-9)
        assert np.all(np.diff(model.explained_variance) <= 1e-12)

    def test_full_rank_reconstruction(self):
        rng = np.random.default_rng(63)
        m = matrix_from(rng.normal(size=(8, 12)))
        model = pca_fit(m, 8, seed=3)
        xc = m.values - model.gene_means[:, None]
        recon = model.components.T @ (model.components @ xc)
        rel = np.linalg.norm(recon - xc) / np.linalg.norm(xc)
        assert rel <= 1e-8

    def test_orthonormal_rows(self):
        rng = np.random.default_rng(64)
        m = matrix_from(rng.normal(size=(25, 30)))
        model = pca_fit(m, 6, seed=4)
        gram = model.components @ model.components.T
        assert np.allclose(gram, np.eye(6), atol=1e-8)

    def test_sign_convention_deterministic(self):
        rng = np.random.default_rng(65)
        m = matrix_from(rng.normal(size=(12, 20)))
        a = pca_fit(m, 3, seed=5)
        b = pca_fit(m, 3, seed=99)  # different start, same axes after sign fix
        for d in range(3):
            assert np.allclose(a.components[d], b.components[d], atol=1e-8)
            assert a.components[d][np.argmax(np.abs(a.components[d]))] > 0

    def test_component_bounds(self):
        rng = np.random.default_rng(66)
        m = matrix_from(rng.normal(size=(6, 4)))
        with pytest.raises(ValueError, match="n_components"):
            pca_fit(m, 5, seed=0)


class TestPcaRankings:
    def test_weights_ranking_absolute_order(self):
        model = PcaModel(
            components=np.array([[0.9, -0.95, 0.1]]),
            explained_variance=np.array([1.0]),
            gene_means=np.zeros(3),
            gene_ids=("A", "B", "C"),
        )
        lst = pca_weights_ranking(model, 0)
        assert lst.gene_ids == ("B", "A", "C")
        assert lst.scores.tolist() == [0.95, 0.9, 0.1]

    def test_single_gene_model(self):
        model = PcaModel(np.array([[1.0]]), np.array([1.0]), np.zeros(1), ("solo",))
        lst = pca_weights_ranking(model, 0)
        assert lst.gene_ids == ("solo",)

    def test_negated_component_same_order(self):
        rng = np.random.default_rng(67)
        comp = rng.normal(size=(1, 10))
        ids = tuple(f"g{i}" for i in range(10))
        a = pca_weights_ranking(PcaModel(comp, np.ones(1), np.zeros(10), ids), 0)
        b = pca_weights_ranking(PcaModel(-comp, np.ones(1), np.zeros(10), ids), 0)
        assert a.gene_ids == b.gene_ids

    def test_signed_mode_available(self):
        model = PcaModel(np.array([[0.9, -0.95, 0.1]]), np.ones(1), np.zeros(3),
                         ("A", "B", "C"))
        lst = pca_weights_ranking(model, 0, signed=True)
        assert lst.gene_ids == ("A", "C", "B")

    def test_corr_matches_weights_on_noiseless_linear_data(self):
        # two exactly orthonormal sample-space factors; all first-component
        # loadings positive and well separated; gene rows unit-normalized so
        # correlation order equals loading order
        rng = np.random.default_rng(68)
        n, g = 60, 12
        basis, _ = np.linalg.qr(rng.normal(size=(n, 2)))
        basis -= basis.mean(axis=0, keepdims=True)
        basis, _ = np.linalg.qr(basis)
        s1, s2 = basis[:, 0], basis[:, 1]
        u1 = np.linspace(0.95, 0.3, g)
        u2 = np.sqrt(1.0 - u1**2) * np.where(np.arange(g) % 2 == 0, 1.0, -1.0)
        x = np.outer(u1, s1) + np.outer(u2, s2)
        m = matrix_from(x)
        model = pca_fit(m, 2, seed=6)
        w_order = pca_weights_ranking(model, 0).gene_ids
        c_order = pca_corr_ranking(m, model, 0).gene_ids
        assert w_order == c_order

    def test_corr_self_projection_pseudo_gene(self):
        rng = np.random.default_rng(69)
        m = matrix_from(rng.normal(size=(10, 30)))
        model = pca_fit(m, 2, seed=7)
        proj = pca_project(model, m)[:, 0]
        aug = matrix_from(np.vstack([m.values, proj]))
        model_aug = pca_fit(aug, 2, seed=8)
        lst = pca_corr_ranking(aug, model_aug, 0)
        # the injected projection row tracks component 0 almost perfectly
        top_score = lst.scores[0]
        assert abs(top_score) > 0.999

    def test_corr_sign_flip_reverses_list(self):
        rng = np.random.default_rng(70)
        m = matrix_from(rng.normal(size=(15, 25)))
        model = pca_fit(m, 2, seed=9)
        flipped = PcaModel(
            np.vstack([-model.components[0], model.components[1]]),
            model.explained_variance, model.gene_means, model.gene_ids,
        )
        fwd = pca_corr_ranking(m, model, 0)
        rev = pca_corr_ranking(m, flipped, 0)
        assert rev.gene_ids == tuple(reversed(fwd.gene_ids))


class TestStandardDeTtest:
    def test_welch_anchor_against_formula_oracle(self):
        m = matrix_from([[10, 11, 12, 0, 1, 2], [5, 5.5, 6, 5, 5.5, 6]])
        labels = ["g1", "g1", "g1", "g2", "g2", "g2"]
        lst, _ = standard_de_ttest(m, labels, "g1", "g2")
        ref = welch_t([10, 11, 12], [0, 1, 2])
        pos = {g: s for g, s in zip(lst.gene_ids, lst.scores)}
        assert pos["g000"] == pytest.approx(ref, rel=1e-12)
        assert pos["g000"] > 5

    def test_equal_groups_give_zero_t_mid_list(self):
        rng = np.random.default_rng(71)
        up = rng.normal(2, 1, size=10)
        m = matrix_from(np.vstack([
            np.concatenate([up, up - 4]),           # strongly positive t
            np.concatenate([up - 4, up]),           # strongly negative t
            np.concatenate([up, up]),               # identical stats: t = 0
        ]))
        labels = ["a"] * 10 + ["b"] * 10
        lst, _ = standard_de_ttest(m, labels)
        assert lst.gene_ids[1] == "g002"
        assert lst.scores[1] == 0.0

    def test_label_swap_negates_and_reverses(self):
        rng = np.random.default_rng(72)
        m = matrix_from(rng.normal(size=(12, 10)))
        labels = ["a"] * 5 + ["b"] * 5
        fwd, _ = standard_de_ttest(m, labels, "a", "b")
        rev, _ = standard_de_ttest(m, labels, "b", "a")
        assert rev.gene_ids == tuple(reversed(fwd.gene_ids))
        fwd_scores = dict(zip(fwd.gene_ids, fwd.scores))
        rev_scores = dict(zip(rev.gene_ids, rev.scores))
        for g in fwd.gene_ids:
            assert rev_scores[g] == -fwd_scores[g]

    def test_welch_equals_pooled_for_balanced_equal_variance(self):
        x = [0.0, 1.0, 2.0]
        y = [5.0, 6.0, 7.0]
        t_welch = welch_t(x, y)
        sp2 = (np.var(x, ddof=1) + np.var(y, ddof=1)) / 2
        t_pooled = (np.mean(x) - np.mean(y)) / np.sqrt(sp2 * (1 / 3 + 1 / 3))
        assert abs(t_welch - t_pooled) < 1e-12
        m = matrix_from([x + y, [9, 8, 7, 1, 2, 3]])
        lst, _ = standard_de_ttest(m, ["a"] * 3 + ["b"] * 3, "a", "b")
        assert dict(zip(lst.gene_ids, lst.scores))["g000"] == pytest.approx(
            t_pooled, rel=1e-12
        )

    def test_zero_variance_everywhere_excluded(self):
        m = matrix_from([[5, 5, 5, 5], [1, 2, 3, 4]])
        lst, excluded = standard_de_ttest(m, ["a", "a", "b", "b"])
        assert lst.gene_ids == ("g001",)
        assert excluded == (("g000", "zero variance in both groups"),)

    def test_too_few_groups_rejected(self):
        m = matrix_from([[1, 2, 3], [4, 5, 6]])
        with pytest.raises(ValueError, match="two groups"):
            standard_de_ttest(m, ["a", "a", "a"])

    def test_small_group_rejected(self):
        m = matrix_from([[1, 2, 3], [4, 5, 6]])
        with pytest.raises(ValueError, match="at least 2"):
            standard_de_ttest(m, ["a", "b", "b"], "a", "b")
