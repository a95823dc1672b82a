#!/usr/bin/env python

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import PreconditionError, StructuralError
from ..perm_core import Permutation
from .base import ChainConfig, Sampler, path_rng
from .order import Relation

###############################################################################

log = logging.getLogger(__name__)

###############################################################################


def _strict_minima(steps: np.ndarray) -> np.ndarray:
    # Heights index t is a strict local minimum when step t-1 goes down and
    # step t goes up
    return np.flatnonzero((steps[:-1] < 0) & (steps[1:] > 0)) + 1


def _strict_maxima(steps: np.ndarray) -> np.ndarray:
    return np.flatnonzero((steps[:-1] > 0) & (steps[1:] < 0)) + 1


@dataclass(frozen=True)
class DiscreteExcursion:
    """
    A nonnegative +-1 path of length 2m from 0 to 0, with one sign per
    strict local minimum. Positions index the heights 0..2m.
    """

    steps: np.ndarray
    signs: np.ndarray

    def __post_init__(self) -> None:
        steps = np.asarray(self.steps, dtype=np.int8).copy()
        signs = np.asarray(self.signs, dtype=np.int8).copy()
        if len(steps) == 0 or len(steps) % 2 != 0:
            raise StructuralError(f"Excursion length must be even, got {len(steps)}")
        if not np.all(np.isin(steps, (-1, 1))):
            raise StructuralError("Excursion steps must be +1 or -1")

        heights = np.cumsum(steps, dtype=np.int64)
        if heights.min() < 0 or heights[-1] != 0:
            raise StructuralError("Excursion must stay nonnegative and end at 0")
        if len(signs) != len(_strict_minima(steps)):
            raise StructuralError(
                f"{len(signs)} signs for {len(_strict_minima(steps))} local minima"
            )
        if not np.all(np.isin(signs, (-1, 1))):
            raise StructuralError("Excursion signs must be +1 or -1")

        steps.setflags(write=False)
        signs.setflags(write=False)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "signs", signs)

    @property
    def m(self) -> int:
        return len(self.steps) // 2

    @property
    def heights(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.steps, dtype=np.int64)))

    @property
    def minima(self) -> np.ndarray:
        return _strict_minima(self.steps)

    @property
    def peaks(self) -> np.ndarray:
        return _strict_maxima(self.steps)

    def sign_at(self, position: int) -> int:
        index = int(np.searchsorted(self.minima, position))
        if index == len(self.minima) or self.minima[index] != position:
            raise PreconditionError(f"Position {position} is not a local minimum")
        return int(self.signs[index])


###############################################################################


def sample_excursion(
    m: int,
    p: float = 0.5,
    rng: np.random.Generator | None = None,
) -> DiscreteExcursion:
    """
    Uniform nonnegative path of length 2m with random signs at its minima.

    A uniform arrangement of m + 1 up-steps and m down-steps is rotated to
    start right after the last position where its partial sums reach their
    minimum; by the cycle lemma exactly that rotation stays positive, and
    dropping its first up-step leaves a uniform excursion. Each strict local
    minimum then gets a + sign with probability p.

    Parameters
    ----------
    m : int
        Half length of the path.
    p : float, optional
        Probability of a + sign, by default 0.5
    rng : np.random.Generator, optional
        Generator, by default the first stream of seed 0

    Returns
    -------
    DiscreteExcursion
        The signed excursion.
    """
    if m < 1:
        raise PreconditionError(f"m must be >= 1, got {m}")
    if not 0 < p < 1:
        raise PreconditionError(f"p must lie in (0, 1), got {p}")

    rng = rng if rng is not None else path_rng(0)
    bridge = rng.permutation(np.concatenate((np.ones(m + 1), -np.ones(m))))
    partial = np.concatenate(([0], np.cumsum(bridge)[:-1]))
    start = len(partial) - 1 - int(np.argmin(partial[::-1]))
    steps = np.roll(bridge, -start)[1:].astype(np.int8)

    minima = _strict_minima(steps)
    signs = np.where(rng.random(len(minima)) < p, 1, -1)
    return DiscreteExcursion(steps, signs)


def brownian_order(exc: DiscreteExcursion, x: int, y: int) -> Relation:
    """
    Compare positions x and y by the sign at the lowest point between them.

    The leftmost minimum of the heights on [x, y] decides: x comes first
    when (y - x) times its sign is positive. A minimum at x or y itself is
    not a local minimum, and the pair is then incomparable.
    """
    if x == y:
        return Relation.INCOMPARABLE
    if not (0 <= x <= 2 * exc.m and 0 <= y <= 2 * exc.m):
        raise PreconditionError(f"Positions ({x}, {y}) outside 0..{2 * exc.m}")

    lo, hi = (x, y) if x < y else (y, x)
    lowest = lo + int(np.argmin(exc.heights[lo : hi + 1]))
    if lowest in (lo, hi):
        return Relation.INCOMPARABLE

    sign = exc.sign_at(lowest)
    return Relation.PRECEDES if (y - x) * sign > 0 else Relation.FOLLOWS


def excursion_permutation(exc: DiscreteExcursion) -> Permutation:
    """
    Permutation of the peaks of the excursion under the Brownian order.

    Consecutive peaks are separated by exactly one valley. A block of
    peaks splits at its leftmost lowest valley; a + sign gives the left part
    the lower values, a - sign the higher ones.
    """
    peaks = exc.peaks
    valley_heights = exc.heights[exc.minima]
    valley_signs = exc.signs
    values = np.zeros(len(peaks), dtype=np.int64)

    # Blocks of peaks [i, j] to fill with values offset + 1 ..
    stack = [(0, len(peaks) - 1, 0)]
    while stack:
        i, j, offset = stack.pop()
        if i == j:
            values[i] = offset + 1
            continue

        cut = i + int(np.argmin(valley_heights[i:j]))
        left, right = cut - i + 1, j - cut
        if valley_signs[cut] > 0:
            stack.append((i, cut, offset))
            stack.append((cut + 1, j, offset + left))
        else:
            stack.append((i, cut, offset + right))
            stack.append((cut + 1, j, offset))

    return Permutation._trusted(tuple(int(v) for v in values))


def sample_brownian_permutation(
    cfg: ChainConfig,
    rng: np.random.Generator | None = None,
) -> Permutation:
    """Peaks permutation of a signed excursion of half length cfg.n_target."""
    rng = rng if rng is not None else path_rng(cfg.seed)
    return excursion_permutation(sample_excursion(cfg.n_target, float(cfg.p), rng))


class ExcursionSurrogate(Sampler):
    """Sampler of the discrete Brownian separable surrogate."""

    name = "brownian"

    @staticmethod
    def sample(
        cfg: ChainConfig,
        rng: np.random.Generator | None = None,
    ) -> Permutation:
        return sample_brownian_permutation(cfg, rng)
