"""Maximum-likelihood isotonic calibration of binary labels (PAVA).

Fitted values are kept as exact integer ratios ``ones/count`` so that
equalities between calibrators, and between a calibrator and the labels it
was fitted on, can be checked without tolerances.
"""

from __future__ import annotations

import bisect
import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import EmptyInput, InvalidLabel, InvalidScore, ScoreNotInDomain, TooLarge

ORACLE_MAX_DISTINCT = 12


def check_score(score) -> float:
    score = float(score)
    if not math.isfinite(score):
        raise InvalidScore(f"score must be finite, got {score!r}")
    return score


def check_label(label) -> int:
    if label not in (0, 1):
        raise InvalidLabel(f"label must be 0 or 1, got {label!r}")
    return int(label)


@dataclass(frozen=True, slots=True)
class ScoredLabel:
    score: float
    label: int

    def __post_init__(self):
        object.__setattr__(self, "score", check_score(self.score))
        object.__setattr__(self, "label", check_label(self.label))


@dataclass(frozen=True, slots=True)
class Block:
    """Contiguous run ``domain[start:stop]`` sharing the ratio ``ones/count``."""

    start: int
    stop: int
    ones: int
    count: int

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.ones, self.count)


@dataclass(frozen=True)
class IsotonicCalibrator:
    """Nondecreasing step function on the distinct fitted scores.

    ``domain`` is strictly increasing; ``blocks`` partition it into contiguous
    cells whose ratios are strictly increasing from left to right.
    """

    domain: tuple[float, ...]
    blocks: tuple[Block, ...]
    _block_of: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        for b, block in enumerate(self.blocks):
            for j in range(block.start, block.stop):
                index[self.domain[j]] = b
        object.__setattr__(self, "_block_of", index)

    def __len__(self):
        return len(self.domain)

    def __contains__(self, score) -> bool:
        return score in self._block_of

    def block_at(self, score) -> Block:
        try:
            return self.blocks[self._block_of[score]]
        except KeyError:
            raise ScoreNotInDomain(f"score {score!r} is not a fitted score") from None

    def ratio_at(self, score) -> tuple[int, int]:
        block = self.block_at(score)
        return block.ones, block.count

    @property
    def values(self) -> tuple[Fraction, ...]:
        """Fitted value at each domain point, in domain order."""
        out = []
        for block in self.blocks:
            out.extend([block.ratio] * (block.stop - block.start))
        return tuple(out)

    def as_dict(self) -> dict[float, Fraction]:
        return dict(zip(self.domain, self.values))

    def block_ratios(self) -> tuple[tuple[int, int, int, int], ...]:
        """Hashable ``(start, stop, ones, count)`` summary used for exact comparison."""
        return tuple((b.start, b.stop, b.ones, b.count) for b in self.blocks)

    def __call__(self, score) -> Fraction:
        return evaluate(self, score)


def aggregate(data: Iterable) -> tuple[list[float], list[int], list[int]]:
    """Pool observations by exact score: returns sorted distinct scores with
    per-score label-1 counts and totals."""
    ones: dict[float, int] = {}
    counts: dict[float, int] = {}
    for item in data:
        if not isinstance(item, ScoredLabel):
            item = ScoredLabel(*item)
        counts[item.score] = counts.get(item.score, 0) + 1
        ones[item.score] = ones.get(item.score, 0) + item.label
    if not counts:
        raise EmptyInput("cannot fit an isotonic calibrator to no data")
    domain = sorted(counts)
    return domain, [ones[t] for t in domain], [counts[t] for t in domain]


def _violates(a1: int, n1: int, a2: int, n2: int) -> bool:
    # a1/n1 > a2/n2 without division
    return a1 * n2 > a2 * n1


def _coalesce(cells: list[list[int]]) -> list[list[int]]:
    """Join adjacent cells with equal ratios so block values are strictly increasing."""
    out: list[list[int]] = []
    for cell in cells:
        if out and out[-1][2] * cell[3] == cell[2] * out[-1][3]:
            prev = out[-1]
            out[-1] = [prev[0], cell[1], prev[2] + cell[2], prev[3] + cell[3]]
        else:
            out.append(list(cell))
    return out


def pava_cells(ones: Sequence[int], counts: Sequence[int]) -> list[list[int]]:
    """Run PAVA on pre-pooled cells; returns ``[start, stop, ones, count]`` blocks.

    Cells are consumed left to right and each new cell is merged backwards
    while it violates its left neighbour; this always merges the leftmost
    violating pair of the current partition.
    """
    stack: list[list[int]] = []
    for j, (a, n) in enumerate(zip(ones, counts)):
        cur = [j, j + 1, a, n]
        while stack and _violates(stack[-1][2], stack[-1][3], cur[2], cur[3]):
            prev = stack.pop()
            cur = [prev[0], cur[1], prev[2] + cur[2], prev[3] + cur[3]]
        stack.append(cur)
    return _coalesce(stack)


def from_counts(domain: Sequence[float], ones: Sequence[int], counts: Sequence[int]) -> IsotonicCalibrator:
    """Fit from already pooled, strictly increasing scores (no validation)."""
    blocks = tuple(Block(*cell) for cell in pava_cells(ones, counts))
    return IsotonicCalibrator(tuple(domain), blocks)


def fit_pava(data: Iterable) -> IsotonicCalibrator:
    """Fit the likelihood-maximizing nondecreasing calibrator.

    ``data`` is an iterable of :class:`ScoredLabel` or ``(score, label)``
    pairs. Observations with equal scores are pooled before merging.
    """
    domain, ones, counts = aggregate(data)
    return from_counts(domain, ones, counts)


def fit_pava_any_order(data: Iterable, rng: random.Random) -> IsotonicCalibrator:
    """PAVA that merges a randomly chosen violating pair at each step.

    Quadratic; exists to check that the merge order does not matter.
    """
    domain, ones, counts = aggregate(data)
    cells = [[j, j + 1, a, n] for j, (a, n) in enumerate(zip(ones, counts))]
    while True:
        bad = [i for i in range(len(cells) - 1)
               if _violates(cells[i][2], cells[i][3], cells[i + 1][2], cells[i + 1][3])]
        if not bad:
            break
        i = rng.choice(bad)
        left, right = cells[i], cells[i + 1]
        cells[i:i + 2] = [[left[0], right[1], left[2] + right[2], left[3] + right[3]]]
    return IsotonicCalibrator(tuple(domain), tuple(Block(*c) for c in _coalesce(cells)))


def evaluate(cal: IsotonicCalibrator, score) -> Fraction:
    """Fitted value at a score that was part of the fit."""
    return cal.block_at(score).ratio


def evaluate_nearest(cal: IsotonicCalibrator, score) -> Fraction:
    """Fitted value at the domain point closest to ``score``.

    On an exact distance tie the smaller domain point wins.
    """
    score = float(score)
    if math.isnan(score):
        raise InvalidScore("score is NaN")
    domain = cal.domain
    j = bisect.bisect_left(domain, score)
    if j == len(domain):
        return evaluate(cal, domain[-1])
    if j == 0 or domain[j] == score:
        return evaluate(cal, domain[j])
    below, above = domain[j - 1], domain[j]
    nearest = below if score - below <= above - score else above
    return evaluate(cal, nearest)


def _xlogy(x: float, y: float) -> float:
    return 0.0 if x == 0 else x * math.log(y)


def log_likelihood(cal: IsotonicCalibrator, data: Iterable) -> float:
    """Log of the Bernoulli likelihood of ``data`` under ``cal``; may be ``-inf``."""
    total = 0.0
    for item in data:
        if not isinstance(item, ScoredLabel):
            item = ScoredLabel(*item)
        a, n = cal.ratio_at(item.score)
        hits = a if item.label == 1 else n - a
        if hits == 0:
            return -math.inf
        total += math.log(hits / n)
    return total


def _cells_loglik(cells) -> float:
    return sum(_xlogy(a, a / n) + _xlogy(n - a, (n - a) / n) for _, _, a, n in cells)


def _cells_likelihood_exact(cells) -> Fraction:
    num, den = 1, 1
    for _, _, a, n in cells:
        num *= a ** a * (n - a) ** (n - a)
        den *= n ** n
    return Fraction(num, den)


def brute_force_isotonic_oracle(data: Iterable) -> IsotonicCalibrator:
    """Exhaustive search over contiguous partitions of the distinct scores.

    Every partition's cells get their pooled label means; assignments that are
    not nondecreasing are discarded and the most likely survivor is returned.
    Exponential in the number of distinct scores, hence capped.
    """
    domain, ones, counts = aggregate(data)
    k = len(domain)
    if k > ORACLE_MAX_DISTINCT:
        raise TooLarge(f"oracle supports at most {ORACLE_MAX_DISTINCT} distinct scores, got {k}")
    best_cells = None
    best_ll = -math.inf
    for cuts in itertools.product((False, True), repeat=k - 1):
        cells = []
        start = 0
        for j in range(k):
            if j == k - 1 or cuts[j]:
                cells.append([start, j + 1, sum(ones[start:j + 1]), sum(counts[start:j + 1])])
                start = j + 1
        if any(_violates(c1[2], c1[3], c2[2], c2[3]) for c1, c2 in zip(cells, cells[1:])):
            continue
        ll = _cells_loglik(cells)
        if best_cells is None or ll > best_ll + 1e-9:
            best_cells, best_ll = cells, ll
        elif ll > best_ll - 1e-9:
            if _cells_likelihood_exact(cells) > _cells_likelihood_exact(best_cells):
                best_cells, best_ll = cells, ll
    return IsotonicCalibrator(tuple(domain), tuple(Block(*c) for c in _coalesce(best_cells)))
