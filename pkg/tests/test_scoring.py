import math

import numpy as np
import pytest

from venn_calib.errors import DimensionMismatch, EmptyInput, InvalidK, NonFiniteFeature, SingleClassTraining
from venn_calib.scoring import (
    KNN,
    ConstantScores,
    GaussianNB,
    IdentityScorer,
    LogisticRegression,
    config_of,
    make_classifier,
    score,
    train_gaussian_nb,
    train_knn,
    train_logistic,
    train_or_prior,
)
from venn_calib.venn import Observation, observations


def separable():
    return observations([-1] * 20 + [1] * 20, [0] * 20 + [1] * 20)


def noisy(n=80, d=3, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = (X[:, 0] + 0.5 * rng.normal(size=n) > 0).astype(int)
    return observations(X.tolist(), y.tolist())


class TestLogistic:
    def test_single_point_one_step(self):
        fn = train_logistic([Observation(0, 1)], iterations=1)
        assert score(fn, 0) > 0.5

    def test_separable(self):
        fn = train_logistic(separable())
        assert score(fn, -1) < 0.5 < score(fn, 1)

    def test_zero_iterations(self):
        fn = train_logistic(noisy(), iterations=0)
        assert np.all(fn.score_many(np.random.default_rng(1).normal(size=(10, 3))) == 0.5)

    def test_monotone_in_1d(self):
        fn = train_logistic(separable())
        assert fn.weights[0] > 0
        s = fn.score_many(np.linspace(-3, 3, 50))
        assert np.all(np.diff(s) > 0)

    def test_standardization_uses_training_stats(self):
        data = noisy()
        fn = train_logistic(data)
        X = np.array([z.x for z in data])
        np.testing.assert_allclose(fn.mean, X.mean(axis=0))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            train_logistic([Observation([0, 1], 1), Observation([0], 0)])
        fn = train_logistic(noisy())
        with pytest.raises(DimensionMismatch):
            fn.score_many(np.zeros((2, 2)))

    def test_non_finite_query(self):
        with pytest.raises(NonFiniteFeature):
            train_logistic(noisy()).score_many([[math.nan, 0, 0]])

    def test_empty(self):
        with pytest.raises(EmptyInput):
            train_logistic([])


class TestGaussianNB:
    def test_example(self):
        fn = train_gaussian_nb(observations([-1] * 10 + [1] * 10, [0] * 10 + [1] * 10))
        assert score(fn, 1) > 0.5

    def test_symmetric(self):
        fn = train_gaussian_nb(observations([-2, -1, 1, 2], [0, 0, 1, 1]))
        assert score(fn, 0) == pytest.approx(0.5, abs=1e-12)

    def test_single_class(self):
        with pytest.raises(SingleClassTraining) as info:
            train_gaussian_nb(observations([1, 2], [0, 0]))
        assert info.value.prior == 0

    def test_prior_fallback(self):
        fn = train_or_prior(GaussianNB(), observations([1, 2], [1, 1]))
        assert fn == ConstantScores(1.0)

    def test_zero_variance_feature_finite(self):
        fn = train_gaussian_nb(observations([[0, 1], [0, 2], [0, 3], [0, 4]], [0, 0, 1, 1]))
        assert np.all(np.isfinite(fn.score_many([[0, 2.5], [5, 100], [-3, -50]])))


class TestKNN:
    def test_nearest(self):
        assert score(train_knn(observations([0, 1], [0, 1]), k=1), 0.9) == 1

    def test_two_neighbours(self):
        assert score(train_knn(observations([0, 1], [0, 1]), k=2), 0.5) == 0.5

    def test_all_neighbours_constant(self):
        data = noisy(30)
        fn = train_knn(data, k=30)
        assert np.all(fn.score_many(np.random.default_rng(2).normal(size=(5, 3))) == pytest.approx(
            sum(z.y for z in data) / 30))

    def test_tie_goes_to_lower_index(self):
        fn = train_knn(observations([-1, 1], [0, 1]), k=1)
        assert score(fn, 0) == 0

    @pytest.mark.parametrize("k", [0, 3])
    def test_invalid_k(self, k):
        with pytest.raises(InvalidK):
            train_knn(observations([0, 1], [0, 1]), k=k)

    def test_classifier_caps_k(self):
        fn = KNN(k=10).train(observations([0, 1, 2], [0, 1, 1]))
        assert score(fn, 0) == pytest.approx(2 / 3)

    def test_classifier_rejects_zero(self):
        with pytest.raises(InvalidK):
            KNN(k=0)


class TestCommon:
    @pytest.mark.parametrize("clf", [LogisticRegression(), GaussianNB(), KNN(k=5), IdentityScorer()])
    def test_deterministic_and_finite(self, clf):
        data = noisy()
        queries = np.random.default_rng(5).normal(size=(40, 3)) * 10
        a = clf.train(data).score_many(queries)
        b = clf.train(data).score_many(queries)
        assert a.tobytes() == b.tobytes()
        assert np.all(np.isfinite(a))

    def test_registry(self):
        assert config_of(make_classifier("knn", k=3)) == {"k": 3}
        with pytest.raises(KeyError):
            make_classifier("j48")
