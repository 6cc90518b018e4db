"""Validity checks for Venn predictors.

* ``calibration_identity_check``: exact, bag-level form of perfect
  calibration when the true label is selected.
* ``monte_carlo_unbiasedness``: P(Y=1) against the expected interval ends.
* ``membership_counterexample``: a simplified Venn-Abers predictor whose scorer
  recognises its own training objects, which breaks unbiasedness in the large.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Protocol, Sequence

import numpy as np

from . import calibrators
from .data_io import derive_seed
from .errors import EmptyInput
from .scoring import ScoringClassifier
from .venn import Bag, MultiProbPrediction, Observation, Taxonomy, class_fraction, venn_predict

Predictor = Callable[[Sequence[Observation], tuple], MultiProbPrediction]


# -- exact identity -------------------------------------------------------------

@dataclass(frozen=True)
class LevelStat:
    p: Fraction
    size: int
    label_mean: Fraction

    @property
    def deviation(self) -> Fraction:
        return abs(self.label_mean - self.p)


@dataclass(frozen=True)
class CalibrationIdentityReport:
    levels: tuple[LevelStat, ...]

    @property
    def max_deviation(self) -> Fraction:
        return max(level.deviation for level in self.levels)

    def to_dict(self) -> dict:
        return {
            "levels": [{"p": str(s.p), "size": s.size, "label_mean": str(s.label_mean),
                        "deviation": str(s.deviation)} for s in self.levels],
            "max_deviation": str(self.max_deviation),
        }


def calibration_identity_check(bag: Bag | Sequence[Observation], tax: Taxonomy) -> CalibrationIdentityReport:
    """Group the bag by the Venn output each element gets with its true label.

    The taxonomy partitions the whole bag once; element i, playing the test
    observation with its true label postulated, gets p_i = label-1 fraction
    of its class. Elements are grouped by p_i and each group's label mean
    should equal p_i exactly. For an equivariant taxonomy the partition, and
    hence the report, does not depend on the bag's storage order. The check
    exercises the p_y computation; equivariance is tested separately by
    :func:`venn_calib.venn.check_equivariance`.
    """
    elements = list(bag)
    if len(elements) < 2:
        raise ValueError("bag must contain at least two observations")
    by_level: dict[Fraction, list[int]] = {}
    for part in tax.partition(elements):
        p = class_fraction(elements, part)
        by_level.setdefault(p, []).extend(elements[i].y for i in part)
    levels = tuple(LevelStat(p, len(ys), Fraction(sum(ys), len(ys))) for p, ys in sorted(by_level.items()))
    return CalibrationIdentityReport(levels)


# -- generators and predictors ----------------------------------------------------

class SyntheticGenerator(Protocol):
    p_one: float | None

    def sample(self, rng: np.random.Generator, n: int) -> list[Observation]: ...


@dataclass(frozen=True)
class BernoulliGenerator:
    """Labels ~ Bernoulli(p) independent of uniform(0, 1) objects."""

    p: float
    dim: int = 1

    @property
    def p_one(self) -> float:
        return self.p

    def sample(self, rng, n):
        xs = rng.random((n, self.dim))
        ys = (rng.random(n) < self.p).astype(int)
        return [Observation(tuple(x), int(y)) for x, y in zip(xs.tolist(), ys.tolist())]


@dataclass(frozen=True)
class SignGenerator:
    """X ~ N(0, 1); P(Y=1 | X<0) = 1/3 and P(Y=1 | X>0) = 2/3, so P(Y=1) = 1/2."""

    p_one: float = 0.5

    def sample(self, rng, n):
        xs = rng.standard_normal(n)
        u = rng.random(n)
        ys = np.where(xs < 0, u < 1 / 3, u < 2 / 3).astype(int)
        return [Observation((x,), int(y)) for x, y in zip(xs.tolist(), ys.tolist())]


@dataclass(frozen=True)
class MembershipScores:
    known: frozenset

    def score_many(self, xs):
        X = np.asarray(xs, dtype=float).reshape(len(xs), -1)
        return np.array([(0.0 if x < 0 else 1.0) if x in self.known else 2.0 for x in X[:, 0].tolist()])


@dataclass(frozen=True)
class MembershipScorer:
    """Scores 0 or 1 (by sign) for objects seen in training and 2 otherwise."""

    name: str = field(default="membership", init=False)

    def train(self, training):
        if len(training) == 0:
            raise EmptyInput("no training observations")
        return MembershipScores(frozenset(z.x[0] for z in training))


@dataclass(frozen=True)
class VennPredictor:
    taxonomy: Taxonomy

    def __call__(self, training, x):
        return venn_predict(self.taxonomy, training, x)


@dataclass(frozen=True)
class VAPredictor:
    classifier: ScoringClassifier

    def __call__(self, training, x):
        return calibrators.va_predict(self.classifier, training, x)


@dataclass(frozen=True)
class SVAPredictor:
    classifier: ScoringClassifier

    def __call__(self, training, x):
        return calibrators.sva_predict(calibrators.sva_fit(self.classifier, training), x)


# -- Monte Carlo ------------------------------------------------------------------

@dataclass(frozen=True)
class UnbiasednessReport:
    trials: int
    p_one_true: float | None
    p_one_empirical: float
    lower_mean: float
    lower_se: float
    upper_mean: float
    upper_se: float
    lower_min: float
    lower_max: float
    upper_min: float
    upper_max: float
    width: float = 3.0  # band half-width in standard errors

    @property
    def band(self) -> tuple[float, float]:
        return (self.lower_mean - self.width * self.lower_se, self.upper_mean + self.width * self.upper_se)

    def contains(self, p: float) -> bool:
        lo, hi = self.band
        return lo <= p <= hi

    @property
    def target(self) -> float:
        return self.p_one_empirical if self.p_one_true is None else self.p_one_true

    @property
    def holds(self) -> bool:
        """Whether P(Y=1) (true if known, else empirical) lies in the band."""
        return self.contains(self.target)

    def to_dict(self) -> dict:
        lo, hi = self.band
        return {
            "trials": self.trials,
            "p_one_true": self.p_one_true,
            "p_one_empirical": self.p_one_empirical,
            "lower_mean": self.lower_mean,
            "lower_se": self.lower_se,
            "upper_mean": self.upper_mean,
            "upper_se": self.upper_se,
            "lower_min": self.lower_min,
            "lower_max": self.lower_max,
            "upper_min": self.upper_min,
            "upper_max": self.upper_max,
            "band": [lo, hi],
            "holds": self.holds,
        }


def _trial(gen: SyntheticGenerator, predictor: Predictor, l: int, seed: int, t: int) -> tuple[float, float, int]:
    rng = np.random.Generator(np.random.Philox(key=derive_seed(seed, "trial", t)))
    sample = gen.sample(rng, l + 1)
    test = sample[-1]
    interval = predictor(sample[:-1], test.x).interval
    return float(interval.lo), float(interval.hi), test.y


def _trial_chunk(args):
    gen, predictor, l, seed, ts = args
    return [_trial(gen, predictor, l, seed, t) for t in ts]


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    if len(values) < 2:
        return float(values.mean()), math.nan
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))


def monte_carlo_unbiasedness(gen: SyntheticGenerator, predictor: Predictor, l: int, trials: int,
                             seed: int, jobs: int = 1) -> UnbiasednessReport:
    """Draw l training observations and one test observation IID per trial
    and average the ends of the predicted probability interval."""
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")
    if l < 1:
        raise ValueError("l must be positive")
    if jobs > 1:
        chunks = [list(range(t, min(t + 50, trials))) for t in range(0, trials, 50)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = [row for part in pool.map(_trial_chunk, [(gen, predictor, l, seed, c) for c in chunks])
                    for row in part]
    else:
        rows = [_trial(gen, predictor, l, seed, t) for t in range(trials)]
    arr = np.array(rows, dtype=float)
    lower, upper, labels = arr[:, 0], arr[:, 1], arr[:, 2]
    lower_mean, lower_se = _mean_se(lower)
    upper_mean, upper_se = _mean_se(upper)
    return UnbiasednessReport(
        trials=trials,
        p_one_true=getattr(gen, "p_one", None),
        p_one_empirical=float(labels.mean()),
        lower_mean=lower_mean,
        lower_se=lower_se,
        upper_mean=upper_mean,
        upper_se=upper_se,
        lower_min=float(lower.min()),
        lower_max=float(lower.max()),
        upper_min=float(upper.min()),
        upper_max=float(upper.max()),
    )


def membership_counterexample(l: int, trials: int, seed: int, method: str = "SVA", jobs: int = 1) -> UnbiasednessReport:
    """Run SVA (or full VA) with :class:`MembershipScorer` on :class:`SignGenerator` data.

    Under SVA the test object always scores 2, so p1 = 1 and p0 pools the
    test object with the positive-x training block (about 2/3), putting the
    interval above P(Y=1) = 1/2. Under VA the test object is part of the
    training set and scores like its neighbours.
    """
    if l < 100:
        raise ValueError(f"scenario needs l >= 100, got {l}")
    predictor = {"SVA": SVAPredictor, "VA": VAPredictor}[method.upper()](MembershipScorer())
    return monte_carlo_unbiasedness(SignGenerator(), predictor, l, trials, seed, jobs=jobs)


def random_bag(rng: np.random.Generator, max_size: int = 30, n_values: int = 6) -> Bag:
    """Random bag of 1-D observations drawn from a small grid, so ties occur."""
    n = int(rng.integers(2, max_size + 1))
    xs = rng.integers(0, n_values, size=n) / 2
    p = rng.random()
    ys = (rng.random(n) < p).astype(int)
    return Bag(Observation((float(x),), int(y)) for x, y in zip(xs, ys))


def identity_suite(taxonomies: Sequence[Taxonomy], bags: int, seed: int, max_size: int = 30) -> dict[str, Fraction]:
    """Largest calibration-identity deviation per taxonomy over random bags."""
    rng = np.random.Generator(np.random.Philox(key=derive_seed(seed, "identity")))
    worst = {tax.name: Fraction(0) for tax in taxonomies}
    for _ in range(bags):
        bag = random_bag(rng, max_size)
        for tax in taxonomies:
            worst[tax.name] = max(worst[tax.name], calibration_identity_check(bag, tax).max_deviation)
    return worst
