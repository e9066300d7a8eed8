import math

import numpy as np
import pytest

from mahaknn.baselines import (
    MdModel,
    fit_md,
    max_softmax_score,
    max_softmax_score_batch,
    md_score,
    md_score_batch,
    rmd_score,
)
from mahaknn.errors import (
    ClassTooSmall,
    EmptyLogits,
    MissingBackground,
    MissingLabels,
    OodInTrainingSet,
)
from mahaknn.linalg import GaussianFit, fit_gaussian
from mahaknn.tensorio import EmbeddingSet


def two_cluster_set(rng, n_per=60, d=2, centers=((0.0, 0.0), (4.0, 0.0))):
    rows, labels = [], []
    for c, center in enumerate(centers):
        rows.append(rng.standard_normal((n_per, d)) + np.asarray(center))
        labels += [c] * n_per
    emb = np.concatenate(rows)[:, None, :]
    return EmbeddingSet.create(emb, None, np.asarray(labels))


class TestFitMd:
    def test_recovers_class_means(self, rng):
        train = two_cluster_set(rng, n_per=300)
        model = fit_md(train)
        emp0 = train.embeddings[np.asarray(train.labels) == 0, -1, :].mean(axis=0)
        assert np.allclose(model.class_means[0], emp0, atol=1e-6)
        assert np.allclose(model.class_means[0], [0.0, 0.0], atol=0.2)
        assert np.allclose(model.class_means[1], [4.0, 0.0], atol=0.2)

    def test_single_class_rejected(self, rng):
        emb = rng.standard_normal((20, 1, 2))
        train = EmbeddingSet.create(emb, None, np.zeros(20, dtype=np.int64))
        with pytest.raises(ClassTooSmall):
            fit_md(train)

    def test_tiny_class_rejected(self, rng):
        emb = rng.standard_normal((5, 1, 2))
        train = EmbeddingSet.create(emb, None, np.array([0, 0, 0, 0, 1]))
        with pytest.raises(ClassTooSmall):
            fit_md(train)

    def test_ood_label_rejected(self, rng):
        emb = rng.standard_normal((6, 1, 2))
        train = EmbeddingSet.create(emb, None, np.array([0, 0, 1, 1, -1, 1]))
        with pytest.raises(OodInTrainingSet):
            fit_md(train)

    def test_missing_labels(self, rng):
        with pytest.raises(MissingLabels):
            fit_md(EmbeddingSet.create(rng.standard_normal((6, 1, 2))))


def hand_model(class_means, shared_cov, bg_mean=None, bg_cov=None):
    means = np.asarray(class_means, dtype=np.float64)
    chol = np.linalg.cholesky(np.asarray(shared_cov, dtype=np.float64))
    background = None
    if bg_mean is not None:
        background = GaussianFit(
            mean=np.asarray(bg_mean, dtype=np.float64),
            chol_lower=np.linalg.cholesky(np.asarray(bg_cov, dtype=np.float64)),
            applied_ridge=0.0,
        )
    return MdModel(class_means=means, shared_chol=chol, background=background, layer=-1)


class TestMdScore:
    def test_zero_at_class_mean(self):
        model = hand_model([[0.0, 0.0], [4.0, 0.0]], np.eye(2))
        assert md_score(model, np.array([4.0, 0.0])) == 0.0

    def test_equidistant_point(self):
        model = hand_model([[0.0, 0.0], [4.0, 0.0]], np.eye(2))
        assert md_score(model, np.array([2.0, 0.0])) == 4.0

    def test_min_semantics_beyond_second_class(self):
        model = hand_model([[0.0, 0.0], [4.0, 0.0]], np.eye(2))
        # closer to class 1; distance measured to the nearer mean
        assert md_score(model, np.array([6.0, 0.0])) == 4.0

    def test_nonnegative(self, rng):
        train = two_cluster_set(rng)
        model = fit_md(train)
        scores = md_score_batch(model, rng.standard_normal((50, 2)) * 5)
        assert np.all(scores >= 0)

    def test_duplicated_label_matches_single_gaussian(self, rng):
        # one cluster split into two fake classes: tied covariance matches the
        # plain fit and the nearer class term matches single-class maha
        X = rng.standard_normal((400, 2))
        labels = np.arange(400) % 2
        train = EmbeddingSet.create(X[:, None, :], None, labels)
        model = fit_md(train, with_background=True)
        single = fit_gaussian(np.asarray(X, dtype=np.float64))
        from mahaknn.linalg import maha_sq

        for _ in range(10):
            e = rng.standard_normal(2) * 3
            md = md_score(model, e)
            ref = maha_sq(single, e)
            assert md == pytest.approx(ref, rel=0.15)


class TestRmdScore:
    def test_hand_1d_toy(self):
        # classes at +-2 with unit variance, background N(0, 5), e = 0:
        # min(4, 4) - 0 = 4
        model = hand_model([[-2.0], [2.0]], [[1.0]], bg_mean=[0.0], bg_cov=[[5.0]])
        assert rmd_score(model, np.array([0.0])) == 4.0

    def test_at_class_mean_diffuse_background(self):
        model = hand_model([[-2.0], [2.0]], [[1.0]], bg_mean=[0.0], bg_cov=[[5.0]])
        # first term 0, so the score is minus the background distance
        assert rmd_score(model, np.array([2.0])) == pytest.approx(-4.0 / 5.0, rel=1e-12)
        assert rmd_score(model, np.array([2.0])) <= 0.0

    def test_missing_background(self):
        model = hand_model([[-2.0], [2.0]], [[1.0]])
        with pytest.raises(MissingBackground):
            rmd_score(model, np.array([0.0]))


class TestMaxSoftmax:
    def test_uniform(self):
        assert max_softmax_score(np.zeros(4)) == -0.25

    def test_saturated(self):
        assert max_softmax_score(np.array([100.0, 0.0, 0.0, 0.0])) == pytest.approx(
            -1.0, abs=1e-10
        )

    def test_closed_form_two_class(self):
        assert max_softmax_score(np.array([math.log(2.0), 0.0])) == pytest.approx(
            -2.0 / 3.0, rel=1e-14
        )

    def test_empty(self):
        with pytest.raises(EmptyLogits):
            max_softmax_score(np.array([]))

    def test_range_and_shift_invariance(self, rng):
        for _ in range(20):
            m = int(rng.integers(2, 10))
            logits = rng.standard_normal(m) * 5
            s = max_softmax_score(logits)
            assert -1.0 <= s <= -1.0 / m
            assert max_softmax_score(logits + 7.5) == pytest.approx(s, abs=1e-12)

    def test_batch_matches_single(self, rng):
        logits = rng.standard_normal((30, 5))
        batch = max_softmax_score_batch(logits)
        for i in range(30):
            assert batch[i] == pytest.approx(max_softmax_score(logits[i]), rel=1e-15)
