"""Collapse a pair (p0, p1) to one probability.

``merge_log`` and ``merge_square`` are minimax-regret under log loss and
square loss respectively; ``merge_mean`` is the plain average.
"""

from __future__ import annotations

from .errors import DegenerateInput
from .venn import MultiProbPrediction


def merge_log(p: MultiProbPrediction) -> float:
    """p1 / (1 - p0 + p1): equalizes the log-loss regrets against p0 and p1."""
    p0, p1 = p
    denominator = 1 - p0 + p1
    if denominator == 0:
        raise DegenerateInput("log merge is undefined at (p0, p1) = (1, 0)")
    return float(p1 / denominator)


def merge_square(p: MultiProbPrediction) -> float:
    """p1 + p0**2/2 - p1**2/2: equalizes the square-loss regrets.

    Evaluated as p1 + (p0 - p1)(p0 + p1)/2, which returns p0 exactly when
    p0 == p1 instead of drifting by an ulp.
    """
    p0, p1 = p
    return float(p1 + (p0 - p1) * (p0 + p1) / 2)


def merge_mean(p: MultiProbPrediction) -> float:
    p0, p1 = p
    return float((p0 + p1) / 2)


MERGES = {"log": merge_log, "square": merge_square, "mean": merge_mean}


def get_merge(name: str):
    try:
        return MERGES[name]
    except KeyError:
        raise KeyError(f"unknown merge {name!r}; choose from {sorted(MERGES)}") from None
