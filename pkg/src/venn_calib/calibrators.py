"""DIR, Venn-Abers and simplified Venn-Abers calibration of scoring classifiers."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import EmptyInput
from .isotonic import IsotonicCalibrator, aggregate, check_score, evaluate_nearest, fit_pava, pava_cells
from .scoring import ScoringClassifier, ScoringFunction, score, score_observations, train_or_prior
from .venn import MultiProbPrediction, Observation, Taxonomy, as_features, group_by_key


def _require_training(training):
    if len(training) == 0:
        raise EmptyInput("calibration needs at least one training observation")


def _scored(fn: ScoringFunction, data: Sequence[Observation]) -> list[tuple[float, int]]:
    return [(check_score(s), z.y) for s, z in zip(score_observations(fn, data), data)]


@dataclass(frozen=True)
class FittedDIR:
    scoring: ScoringFunction
    calibrator: IsotonicCalibrator


def dir_fit(classifier: ScoringClassifier, training: Sequence[Observation]) -> FittedDIR:
    """Train once and fit the isotonic calibrator on the training scores."""
    _require_training(training)
    return dir_from_scoring(train_or_prior(classifier, training), training)


def dir_from_scoring(fn: ScoringFunction, training: Sequence[Observation]) -> FittedDIR:
    return FittedDIR(fn, fit_pava(_scored(fn, training)))


def dir_predict(model: FittedDIR, x) -> Fraction:
    """Calibrated value at the nearest training score (ties go to the smaller score).

    May be exactly 0 or 1.
    """
    return evaluate_nearest(model.calibrator, score(model.scoring, x))


def dir_predict_many(model: FittedDIR, xs) -> list[Fraction]:
    scores = model.scoring.score_many(xs)
    return [evaluate_nearest(model.calibrator, s) for s in scores]


def va_predict(classifier: ScoringClassifier, training: Sequence[Observation], x) -> MultiProbPrediction:
    """Venn-Abers prediction: retrain with the test object under each label.

    For y in {0, 1} the classifier is trained on ``training + [(x, y)]``, an
    isotonic calibrator g_y is fitted on the whole scored extended sequence,
    and p_y = g_y(s_y(x)). Trains the classifier exactly twice.
    """
    _require_training(training)
    x = as_features(x)
    ps = []
    for y in (0, 1):
        extended = list(training) + [Observation(x, y)]
        fn = train_or_prior(classifier, extended)
        scored = _scored(fn, extended)
        ps.append(fit_pava(scored)(scored[-1][0]))
    return MultiProbPrediction(*ps)


@dataclass(frozen=True)
class FittedSVA:
    """Scoring function trained once plus the pooled training scores.

    ``domain``/``ones``/``counts`` are the sorted distinct training scores with
    their label-1 counts and totals, reused for every test object.
    """

    scoring: ScoringFunction
    scored: tuple[tuple[float, int], ...]
    domain: tuple[float, ...]
    ones: tuple[int, ...]
    counts: tuple[int, ...]


def sva_fit(classifier: ScoringClassifier, training: Sequence[Observation]) -> FittedSVA:
    """Train the classifier once and pool its training scores."""
    _require_training(training)
    return sva_from_scoring(train_or_prior(classifier, training), training)


def sva_from_scoring(fn: ScoringFunction, training: Sequence[Observation]) -> FittedSVA:
    _require_training(training)
    scored = _scored(fn, training)
    domain, ones, counts = aggregate(scored)
    return FittedSVA(fn, tuple(scored), tuple(domain), tuple(ones), tuple(counts))


def _value_with_extra(model: FittedSVA, s: float, y: int) -> Fraction:
    """g(s) for the calibrator fitted on the training scores plus ``(s, y)``."""
    domain, ones, counts = list(model.domain), list(model.ones), list(model.counts)
    j = bisect.bisect_left(domain, s)
    if j < len(domain) and domain[j] == s:
        ones[j] += y
        counts[j] += 1
    else:
        domain.insert(j, s)
        ones.insert(j, y)
        counts.insert(j, 1)
    for start, stop, a, n in pava_cells(ones, counts):
        if start <= j < stop:
            return Fraction(a, n)
    raise AssertionError("unreachable")


def sva_predict_score(model: FittedSVA, s: float) -> MultiProbPrediction:
    s = check_score(s)
    return MultiProbPrediction(_value_with_extra(model, s, 0), _value_with_extra(model, s, 1))


def sva_predict(model: FittedSVA, x) -> MultiProbPrediction:
    """Simplified Venn-Abers prediction: refit only the calibrator per label."""
    return sva_predict_score(model, score(model.scoring, x))


def sva_predict_many(model: FittedSVA, xs) -> list[MultiProbPrediction]:
    return [sva_predict_score(model, s) for s in model.scoring.score_many(xs)]


@dataclass(frozen=True)
class _CalibratedValueRule:
    classifier: ScoringClassifier

    def __call__(self, seq):
        fn = train_or_prior(self.classifier, seq)
        scored = _scored(fn, seq)
        g = fit_pava(scored)
        return group_by_key([g(s) for s, _ in scored])


def va_taxonomy(classifier: ScoringClassifier) -> Taxonomy:
    """Group indices by equal calibrated value g(s(x_i)), where s is trained
    on the whole sequence and g is fitted on all of its scored labels."""
    return Taxonomy(_CalibratedValueRule(classifier), f"venn-abers[{getattr(classifier, 'name', classifier)}]")
