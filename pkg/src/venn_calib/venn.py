"""Observations, bags, Venn taxonomies and the Venn prediction rule."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import EmptyInput, NonFiniteFeature
from .isotonic import check_label

Partition = list[list[int]]


def as_features(x) -> tuple[float, ...]:
    """Coerce a scalar or vector to a tuple of finite floats."""
    if np.ndim(x) == 0:
        x = (x,)
    out = tuple(float(v) for v in np.ravel(x))
    if not all(math.isfinite(v) for v in out):
        raise NonFiniteFeature(f"non-finite feature in {out!r}")
    return out


@dataclass(frozen=True, slots=True)
class Observation:
    x: tuple[float, ...]
    y: int

    def __post_init__(self):
        object.__setattr__(self, "x", as_features(self.x))
        object.__setattr__(self, "y", check_label(self.y))


def observations(xs, ys) -> list[Observation]:
    return [Observation(x, y) for x, y in zip(xs, ys, strict=True)]


class Bag:
    """A multiset of observations; storage order carries no meaning."""

    def __init__(self, elements: Iterable[Observation]):
        self.elements = tuple(elements)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __eq__(self, other):
        if not isinstance(other, Bag):
            return NotImplemented
        return Counter(self.elements) == Counter(other.elements)

    def __hash__(self):
        return hash(frozenset(Counter(self.elements).items()))

    def __repr__(self):
        return f"Bag({list(self.elements)!r})"


@dataclass(frozen=True)
class ProbabilityInterval:
    lo: Real
    hi: Real

    @property
    def width(self):
        return self.hi - self.lo


@dataclass(frozen=True)
class MultiProbPrediction:
    """The pair ``(p0, p1)``: predicted P(y=1) under each postulated test label."""

    p0: Real
    p1: Real

    def __post_init__(self):
        for p in (self.p0, self.p1):
            if not 0 <= p <= 1:
                raise ValueError(f"probability out of [0, 1]: {p!r}")

    def __iter__(self):
        yield self.p0
        yield self.p1

    def __getitem__(self, y: int):
        return (self.p0, self.p1)[y]

    @property
    def interval(self) -> ProbabilityInterval:
        return probability_interval(self)


def probability_interval(p: MultiProbPrediction) -> ProbabilityInterval:
    return ProbabilityInterval(min(p.p0, p.p1), max(p.p0, p.p1))


@dataclass(frozen=True)
class Taxonomy:
    """Rule mapping a sequence of n >= 2 observations to a partition of
    ``range(n)``.

    The rule must be equivariant: permuting the input permutes the partition.
    This is not enforced, see :func:`check_equivariance`.
    """

    rule: Callable[[Sequence[Observation]], Partition]
    name: str = "taxonomy"

    def partition(self, seq: Sequence[Observation]) -> Partition:
        if len(seq) < 2:
            raise ValueError("a taxonomy needs at least two observations")
        parts = self.rule(seq)
        seen = sorted(i for part in parts for i in part)
        if seen != list(range(len(seq))) or any(not part for part in parts):
            raise ValueError(f"{self.name} did not return a partition of {len(seq)} indices")
        return parts

    def class_of(self, seq: Sequence[Observation], index: int) -> list[int]:
        for part in self.partition(seq):
            if index in part:
                return list(part)
        raise AssertionError("unreachable")


def group_by_key(keys: Sequence) -> Partition:
    """Partition indices by equal key, classes in first-appearance order."""
    groups: dict = {}
    for i, key in enumerate(keys):
        groups.setdefault(key, []).append(i)
    return list(groups.values())


def _one_class(seq):
    return [list(range(len(seq)))]


def _by_label(seq):
    return group_by_key([z.y for z in seq])


def trivial_taxonomy() -> Taxonomy:
    """Everything in one class; the Venn predictor then ignores the objects."""
    return Taxonomy(_one_class, "trivial")


def label_taxonomy() -> Taxonomy:
    return Taxonomy(_by_label, "label")


def class_fraction(seq: Sequence[Observation], members: Iterable[int]) -> Fraction:
    members = list(members)
    return Fraction(sum(seq[i].y for i in members), len(members))


def venn_predict(tax: Taxonomy, training: Sequence[Observation], x) -> MultiProbPrediction:
    """For each postulated label, the label-1 fraction of the test point's class."""
    if len(training) == 0:
        raise EmptyInput("Venn prediction needs at least one training observation")
    x = as_features(x)
    ps = []
    for y in (0, 1):
        seq = list(training) + [Observation(x, y)]
        ps.append(class_fraction(seq, tax.class_of(seq, len(seq) - 1)))
    return MultiProbPrediction(*ps)


def _canonical(parts: Partition) -> frozenset[frozenset[int]]:
    return frozenset(frozenset(p) for p in parts)


def check_equivariance(tax: Taxonomy, seq: Sequence[Observation], perm: Sequence[int]) -> bool:
    """True iff partitioning ``seq`` permuted by ``perm`` gives the permuted partition.

    ``perm[k]`` is the index of ``seq`` placed at position ``k``.
    """
    if sorted(perm) != list(range(len(seq))):
        raise ValueError("perm is not a permutation of the sequence indices")
    permuted = [seq[i] for i in perm]
    position = {orig: k for k, orig in enumerate(perm)}
    expected = [[position[i] for i in part] for part in tax.partition(seq)]
    return _canonical(tax.partition(permuted)) == _canonical(expected)
