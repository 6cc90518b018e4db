import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import pytest

from venn_calib.calibrators import (
    dir_fit,
    dir_predict,
    dir_predict_many,
    sva_fit,
    sva_predict,
    sva_predict_many,
    va_predict,
    va_taxonomy,
)
from venn_calib.errors import EmptyInput
from venn_calib.scoring import KNN, ConstantScorer, GaussianNB, IdentityScorer, LogisticRegression
from venn_calib.venn import check_equivariance, observations, venn_predict

IDENTITY = IdentityScorer()


@dataclass
class CountingClassifier:
    inner: object
    calls: int = field(default=0)

    def train(self, training):
        self.calls += 1
        return self.inner.train(training)


def random_instance(rng, max_l=20, values=5):
    l = rng.randint(1, max_l)
    training = observations([rng.randrange(values) for _ in range(l)], [rng.randint(0, 1) for _ in range(l)])
    return training, rng.randrange(values) + rng.choice([0, 0.5])


class TestDIR:
    def test_isotonic_training(self):
        model = dir_fit(IDENTITY, observations([1, 2], [0, 1]))
        assert model.calibrator.as_dict() == {1: 0, 2: 1}
        assert dir_predict(model, 1.4) == 0
        assert dir_predict(model, 1.5) == 0

    def test_pooled(self):
        model = dir_fit(IDENTITY, observations([1, 2], [1, 0]))
        assert model.calibrator.as_dict() == {1: Fraction(1, 2), 2: Fraction(1, 2)}
        assert dir_predict_many(model, [-10, 1.5, 99]) == [Fraction(1, 2)] * 3

    def test_empty(self):
        with pytest.raises(EmptyInput):
            dir_fit(IDENTITY, [])

    def test_domain_is_training_scores(self):
        model = dir_fit(IDENTITY, observations([3, 1, 3, 2], [0, 1, 1, 0]))
        assert model.calibrator.domain == (1.0, 2.0, 3.0)


class TestVA:
    def test_example_interleaved(self):
        p = va_predict(IDENTITY, observations([1, 2, 3, 4], [0, 1, 0, 1]), 2.5)
        assert tuple(p) == (Fraction(1, 3), Fraction(2, 3))

    def test_example_separated(self):
        p = va_predict(IDENTITY, observations([1, 2, 3, 4], [0, 0, 1, 1]), 2.5)
        assert tuple(p) == (0, 1)

    def test_single_training_point_constant_scorer(self):
        p = va_predict(ConstantScorer(), observations([0], [1]), 0)
        assert tuple(p) == (Fraction(1, 2), 1)

    def test_trains_twice(self):
        clf = CountingClassifier(LogisticRegression(iterations=20))
        va_predict(clf, observations([0, 1, 2], [0, 1, 1]), 0.5)
        assert clf.calls == 2

    def test_nb_single_class_fallback(self):
        p = va_predict(GaussianNB(), observations([0, 1, 2], [1, 1, 1]), 5)
        assert p.p0 < 1 and p.p1 == 1


class TestSVA:
    def test_example_interleaved(self):
        model = sva_fit(IDENTITY, observations([1, 2, 3, 4], [0, 1, 0, 1]))
        assert tuple(sva_predict(model, 2.5)) == (Fraction(1, 3), Fraction(2, 3))

    def test_duplicate_score(self):
        model = sva_fit(IDENTITY, observations([1], [1]))
        assert tuple(sva_predict(model, 1)) == (Fraction(1, 2), 1)

    def test_trains_once(self):
        clf = CountingClassifier(LogisticRegression(iterations=20))
        model = sva_fit(clf, observations([0, 1, 2, 3], [0, 1, 0, 1]))
        sva_predict_many(model, np.linspace(-1, 4, 25))
        assert clf.calls == 1
        assert len(model.scored) == 4

    def test_matches_va_for_identity(self):
        rng = random.Random(21)
        for _ in range(300):
            training, x = random_instance(rng)
            assert sva_predict(sva_fit(IDENTITY, training), x) == va_predict(IDENTITY, training, x)

    def test_many_matches_single(self):
        rng = random.Random(22)
        training, _ = random_instance(rng)
        model = sva_fit(IDENTITY, training)
        xs = [0, 0.5, 2, 4.5, 7]
        assert sva_predict_many(model, xs) == [sva_predict(model, x) for x in xs]


class TestPairsAvoidCertainty:
    @pytest.mark.parametrize("clf", [IDENTITY, KNN(k=3), LogisticRegression(iterations=50), GaussianNB()])
    def test_bounds(self, clf):
        rng = random.Random(31)
        for _ in range(60):
            training, x = random_instance(rng, max_l=12)
            for p in (va_predict(clf, training, x), sva_predict(sva_fit(clf, training), x)):
                assert p.p0 < 1 and p.p1 > 0


class TestVATaxonomy:
    def test_examples(self):
        tax = va_taxonomy(IDENTITY)
        assert sorted(map(sorted, tax.partition(observations([1, 2], [0, 1])))) == [[0], [1]]
        assert tax.partition(observations([1, 2], [1, 0])) == [[0, 1]]

    @pytest.mark.parametrize("clf", [IDENTITY, KNN(k=3)])
    def test_equivariant_without_distance_ties(self, clf):
        rng = random.Random(41)
        tax = va_taxonomy(clf)
        for _ in range(100):
            n = rng.randint(2, 12)
            seq = observations([rng.random() for _ in range(n)], [rng.randint(0, 1) for _ in range(n)])
            assert check_equivariance(tax, seq, rng.sample(range(n), n))

    def test_knn_index_tie_break_breaks_equivariance(self):
        # duplicate objects with different labels: which one counts as nearest
        # depends on position, so the induced grouping is order dependent
        seq = observations([0, 0, 5], [0, 1, 1])
        assert not check_equivariance(va_taxonomy(KNN(k=1)), seq, [1, 0, 2])

    @pytest.mark.parametrize("clf", [IDENTITY, KNN(k=3)])
    def test_venn_form_equals_va(self, clf):
        rng = random.Random(42)
        tax = va_taxonomy(clf)
        for _ in range(100):
            training, x = random_instance(rng)
            assert venn_predict(tax, training, x) == va_predict(clf, training, x)
