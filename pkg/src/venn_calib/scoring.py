"""Scoring classifiers: train on observations, return a score map x -> s(x).

Each classifier is an immutable config object whose ``train`` method returns
a :class:`ScoringFunction`. Training is deterministic given the config.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Protocol, Sequence

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import expit, logsumexp

from .errors import DimensionMismatch, EmptyInput, InvalidK, NonFiniteFeature, SingleClassTraining
from .venn import Observation, as_features


class ScoringFunction(Protocol):
    def score_many(self, xs: np.ndarray) -> np.ndarray: ...


class ScoringClassifier(Protocol):
    name: str

    def train(self, training: Sequence[Observation]) -> ScoringFunction: ...


def design_matrix(training: Sequence[Observation]) -> tuple[np.ndarray, np.ndarray]:
    """Stack observations into ``(X, y)``; checks for a common dimension."""
    if len(training) == 0:
        raise EmptyInput("no training observations")
    dim = len(training[0].x)
    if any(len(z.x) != dim for z in training):
        raise DimensionMismatch("observations have differing feature dimensions")
    X = np.array([z.x for z in training], dtype=float).reshape(len(training), dim)
    y = np.array([z.y for z in training], dtype=float)
    return X, y


def _as_matrix(xs, dim: int) -> np.ndarray:
    X = np.asarray(xs, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, dim) if dim > 1 or X.size == 0 else X.reshape(-1, 1)
    if X.shape[1] != dim:
        raise DimensionMismatch(f"expected {dim} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeature("non-finite feature value")
    return X


def score(fn: ScoringFunction, x) -> float:
    """Score a single object."""
    return float(fn.score_many(np.array([as_features(x)]))[0])


def score_observations(fn: ScoringFunction, data: Sequence[Observation]) -> list[float]:
    return [float(s) for s in fn.score_many(np.array([z.x for z in data], dtype=float))]


def config_of(classifier) -> dict:
    """Hyperparameters as a plain dict (for reports)."""
    return {f.name: getattr(classifier, f.name) for f in fields(classifier) if f.init}


# -- logistic regression -------------------------------------------------------

@dataclass(frozen=True)
class LogisticScores:
    mean: np.ndarray
    scale: np.ndarray
    weights: np.ndarray
    bias: float

    def score_many(self, xs) -> np.ndarray:
        X = (_as_matrix(xs, len(self.weights)) - self.mean) / self.scale
        return expit(X @ self.weights + self.bias)


@dataclass(frozen=True)
class LogisticRegression:
    """L2-regularized logistic regression by full-batch gradient descent.

    Features are standardized with training statistics; the weights start
    at zero so the untrained model scores every object 1/2.
    """

    learning_rate: float = 0.1
    iterations: int = 1000
    l2_penalty: float = 1e-4
    seed: int = 0
    name: str = field(default="logistic", init=False)

    def train(self, training: Sequence[Observation]) -> LogisticScores:
        X, y = design_matrix(training)
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        Z = (X - mean) / scale
        n, d = Z.shape
        w = np.zeros(d)
        b = 0.0
        for _ in range(self.iterations):
            residual = expit(Z @ w + b) - y
            w = w - self.learning_rate * (Z.T @ residual / n + self.l2_penalty * w)
            b = b - self.learning_rate * residual.mean()
        return LogisticScores(mean, scale, w, float(b))


def train_logistic(training, learning_rate=0.1, iterations=1000, l2_penalty=1e-4, seed=0):
    return LogisticRegression(learning_rate, iterations, l2_penalty, seed).train(training)


# -- Gaussian naive Bayes ------------------------------------------------------

@dataclass(frozen=True)
class GaussianNBScores:
    log_prior: np.ndarray  # (2,)
    means: np.ndarray  # (2, d)
    variances: np.ndarray  # (2, d)

    def score_many(self, xs) -> np.ndarray:
        X = _as_matrix(xs, self.means.shape[1])
        joint = np.empty((X.shape[0], 2))
        for c in (0, 1):
            var = self.variances[c]
            joint[:, c] = self.log_prior[c] - 0.5 * np.sum(
                np.log(2 * np.pi * var) + (X - self.means[c]) ** 2 / var, axis=1)
        return np.exp(joint[:, 1] - logsumexp(joint, axis=1))


@dataclass(frozen=True)
class GaussianNB:
    """Gaussian naive Bayes; the score is the posterior probability of label 1.

    Each class variance gets ``var_floor + var_scale * total_variance`` added
    per feature so constant features do not produce zero variances.
    """

    var_floor: float = 1e-9
    var_scale: float = 1e-6
    name: str = field(default="nb", init=False)

    def train(self, training: Sequence[Observation]) -> GaussianNBScores:
        X, y = design_matrix(training)
        n1 = int(y.sum())
        if n1 == 0 or n1 == len(y):
            raise SingleClassTraining("naive Bayes needs both labels in training", prior=n1 / len(y))
        eps = self.var_floor + self.var_scale * X.var(axis=0)
        means = np.stack([X[y == c].mean(axis=0) for c in (0, 1)])
        variances = np.stack([X[y == c].var(axis=0) + eps for c in (0, 1)])
        log_prior = np.log(np.array([len(y) - n1, n1]) / len(y))
        return GaussianNBScores(log_prior, means, variances)


def train_gaussian_nb(training, var_floor=1e-9, var_scale=1e-6):
    return GaussianNB(var_floor, var_scale).train(training)


# -- k nearest neighbours ------------------------------------------------------

@dataclass(frozen=True)
class KNNScores:
    X: np.ndarray
    y: np.ndarray
    k: int

    def score_many(self, xs) -> np.ndarray:
        Q = _as_matrix(xs, self.X.shape[1])
        out = np.empty(len(Q))
        for start in range(0, len(Q), 256):
            dist = cdist(Q[start:start + 256], self.X)
            nearest = np.argsort(dist, axis=1, kind="stable")[:, :self.k]
            out[start:start + 256] = self.y[nearest].mean(axis=1)
        return out


@dataclass(frozen=True)
class KNN:
    """Fraction of label 1 among the k nearest training objects (Euclidean).

    Distance ties go to the lower training index; k is capped at the
    training size.
    """

    k: int = 10
    name: str = field(default="knn", init=False)

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise InvalidK(f"k must be a positive integer, got {self.k!r}")

    def train(self, training: Sequence[Observation]) -> KNNScores:
        X, y = design_matrix(training)
        return KNNScores(X, y, min(int(self.k), len(y)))


def train_knn(training, k=10):
    if k < 1 or k > len(training):
        raise InvalidK(f"need 1 <= k <= {len(training)}, got {k}")
    return KNN(k).train(training)


# -- data-independent scorers --------------------------------------------------

@dataclass(frozen=True)
class FeatureScores:
    feature: int

    def score_many(self, xs) -> np.ndarray:
        X = np.asarray(xs, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        return X[:, self.feature].copy()


@dataclass(frozen=True)
class IdentityScorer:
    """s(x) = x[feature]; training has no effect."""

    feature: int = 0
    name: str = field(default="identity", init=False)

    def train(self, training: Sequence[Observation]) -> FeatureScores:
        if len(training) == 0:
            raise EmptyInput("no training observations")
        return FeatureScores(self.feature)


@dataclass(frozen=True)
class ConstantScores:
    value: float

    def score_many(self, xs) -> np.ndarray:
        return np.full(len(xs), self.value)


@dataclass(frozen=True)
class ConstantScorer:
    value: float = 0.0
    name: str = field(default="constant", init=False)

    def train(self, training: Sequence[Observation]) -> ConstantScores:
        return ConstantScores(float(self.value))


def train_or_prior(classifier: ScoringClassifier, training: Sequence[Observation]) -> ScoringFunction:
    """Train, falling back to the constant class-prior score when the
    classifier refuses single-class data."""
    try:
        return classifier.train(training)
    except SingleClassTraining as exc:
        return ConstantScores(float(exc.prior))


CLASSIFIERS = {
    "logistic": LogisticRegression,
    "nb": GaussianNB,
    "knn": KNN,
    "identity": IdentityScorer,
    "constant": ConstantScorer,
}


def make_classifier(name: str, **params) -> ScoringClassifier:
    try:
        cls = CLASSIFIERS[name]
    except KeyError:
        raise KeyError(f"unknown classifier {name!r}; choose from {sorted(CLASSIFIERS)}") from None
    return cls(**params)
