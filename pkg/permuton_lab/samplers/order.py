#!/usr/bin/env python

from __future__ import annotations

import itertools
import logging
from collections.abc import Callable, Hashable, Sequence
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import TypeVar, overload

import numpy as np
import pandas as pd
from sortedcontainers import SortedList

from ..errors import IncomparableError, PreconditionError, StructuralError
from ..perm_core import Permutation
from ..permuton_ops import StepFunction, kolmogorov_to_uniform
from .base import ChainConfig, Sampler, path_rng

###############################################################################

log = logging.getLogger(__name__)

###############################################################################

_T = TypeVar("_T")


class StreamFields:
    j = "j"
    u = "U_j"
    s = "S_j"


###############################################################################


class Relation(Enum):
    PRECEDES = "x<y"
    FOLLOWS = "y<x"
    INCOMPARABLE = "incomparable"


@dataclass(frozen=True)
class OrderStream:
    """
    The i.i.d. pairs (U_j, S_j), j = 1..k, with U_0 = 0 and U_{-1} = 1
    implied. Arrays are stored read-only.
    """

    u: np.ndarray
    s: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.u, dtype=np.float64).copy()
        s = np.asarray(self.s, dtype=np.int8).copy()
        if u.ndim != 1 or u.shape != s.shape:
            raise StructuralError(f"Mismatched stream shapes {u.shape} and {s.shape}")
        if np.any((u <= 0) | (u >= 1)):
            raise StructuralError("Stream values must lie strictly inside (0, 1)")
        if len(np.unique(u)) != len(u):
            raise StructuralError("Stream values must be distinct")
        if not np.all(np.isin(s, (-1, 1))):
            raise StructuralError("Stream signs must be +1 or -1")

        u.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "s", s)

    def __len__(self) -> int:
        return len(self.u)

    @classmethod
    def generate(cls, k: int, p: float, rng: np.random.Generator) -> OrderStream:
        """Draw k pairs; a floating-point tie resamples the colliding variate."""
        u = rng.random(k)
        s = np.where(rng.random(k) < float(p), 1, -1).astype(np.int8)
        while True:
            _, first = np.unique(u, return_index=True)
            colliding = np.setdiff1d(np.arange(k), first)
            colliding = np.union1d(colliding, np.flatnonzero(u == 0.0))
            if len(colliding) == 0:
                break

            log.warning(f"Resampling {len(colliding)} tied stream values")
            u[colliding] = rng.random(len(colliding))

        return cls(u, s)

    def value(self, j: int) -> float:
        if j == 0:
            return 0.0
        if j == -1:
            return 1.0
        return float(self.u[j - 1])

    def prefix(self, k: int) -> OrderStream:
        if not 0 <= k <= len(self):
            raise PreconditionError(f"Prefix length {k} outside 0..{len(self)}")
        return OrderStream(self.u[:k], self.s[:k])

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                StreamFields.j: np.arange(1, len(self) + 1),
                StreamFields.u: self.u,
                StreamFields.s: self.s,
            }
        )

    def to_csv(self, path: str | Path) -> None:
        # Round-trip precision for reproducibility audits
        self.to_dataframe().to_csv(
            path, index=False, float_format="%.17g", lineterminator="\n"
        )

    @classmethod
    def read_csv(cls, path: str | Path) -> OrderStream:
        df = pd.read_csv(path).sort_values(StreamFields.j)
        return cls(df[StreamFields.u].to_numpy(), df[StreamFields.s].to_numpy())


###############################################################################


def precedes(stream: OrderStream, x: float, y: float) -> Relation:
    """
    Compare x and y under the random order of the stream.

    The first index j with U_j in (min(x, y), max(x, y)] decides: x precedes
    y when (y - x) S_j > 0.
    """
    if x == y:
        return Relation.INCOMPARABLE

    lo, hi = (x, y) if x < y else (y, x)
    inside = (stream.u > lo) & (stream.u <= hi)
    if not inside.any():
        return Relation.INCOMPARABLE

    sign = int(stream.s[int(np.argmax(inside))])
    return Relation.PRECEDES if (y - x) * sign > 0 else Relation.FOLLOWS


def max_gap(stream: OrderStream, k: int) -> float:
    """Largest gap between consecutive points of {0, U_1..U_k, 1}."""
    if not 0 <= k <= len(stream):
        raise PreconditionError(f"Depth {k} outside 0..{len(stream)}")

    points = np.concatenate(([0.0], np.sort(stream.u[:k]), [1.0]))
    return float(np.diff(points).max())


@overload
def phi_k(stream: OrderStream, k: int, x: None = None) -> StepFunction: ...


@overload
def phi_k(stream: OrderStream, k: int, x: float) -> float: ...


def phi_k(stream: OrderStream, k: int, x: float | None = None) -> StepFunction | float:
    """
    Finite-depth approximation of the limit function.

    phi_k(x) is the Lebesgue mass of points y that precede x with the
    comparison decided by one of the first k stream indices. It is constant
    on the k + 1 cells cut by U_1..U_k, and a cell's value is the total
    length of the cells preceding it; cells are ordered like their left
    endpoints.

    Parameters
    ----------
    stream : OrderStream
        The stream to evaluate.
    k : int
        Depth, at most the stream length.
    x : float, optional
        Point of evaluation; when omitted the whole step function is
        returned.

    Returns
    -------
    StepFunction | float
        phi_k, or its value at x.
    """
    if not 0 <= k <= len(stream):
        raise PreconditionError(f"Depth {k} outside 0..{len(stream)}")

    breakpoints = np.concatenate(([0.0], np.sort(stream.u[:k]), [1.0]))
    lengths = np.diff(breakpoints)

    # Cells in position order are ranked like the permutation of their
    # left endpoints {U_0, ..., U_k}
    ranks = np.asarray(lambda_of_stream(stream, k + 1).entries) - 1
    by_rank = np.argsort(ranks)
    values = np.empty(k + 1)
    values[by_rank] = np.concatenate(([0.0], np.cumsum(lengths[by_rank])[:-1]))

    step = StepFunction(breakpoints, values)
    if x is None:
        return step
    return step(x)


def measure_preservation_gap(stream: OrderStream, k: int) -> float:
    """Kolmogorov distance from the push-forward of Lebesgue by phi_k to Lebesgue."""
    return kolmogorov_to_uniform(phi_k(stream, k))


###############################################################################


def perm_of_points(
    points: Sequence[_T],
    is_before: Callable[[_T, _T], bool],
    key: Callable[[_T], Hashable] | None = None,
) -> Permutation:
    """
    Permutation of a finite set carrying two total orders.

    Points are placed left to right by their natural order (or `key`), and
    the value of a point is one plus the number of points preceding it in
    the second order.

    Parameters
    ----------
    points : Sequence
        The points, at least one.
    is_before : Callable[[T, T], bool]
        Strict second order.
    key : Callable, optional
        Sort key for the first order, by default the natural order

    Returns
    -------
    Permutation
        The unique permutation matching both orders.

    Raises
    ------
    IncomparableError
        When the second order is not a strict total order on the points.
    """
    if len(points) == 0:
        raise PreconditionError("Cannot build a permutation from no points")

    ordered = sorted(points, key=key)  # type: ignore[arg-type]
    below = [0] * len(ordered)
    for a, b in itertools.combinations(range(len(ordered)), 2):
        forward = is_before(ordered[a], ordered[b])
        backward = is_before(ordered[b], ordered[a])
        if forward == backward:
            raise IncomparableError(
                f"Points {ordered[a]!r} and {ordered[b]!r} are not strictly ordered",
                pair=(ordered[a], ordered[b]),
            )
        below[b if forward else a] += 1

    values = tuple(1 + count for count in below)
    if sorted(values) != list(range(1, len(values) + 1)):
        raise IncomparableError("The second order is not transitive on the points")

    return Permutation._trusted(values)


def lambda_reference(stream: OrderStream, n: int) -> Permutation:
    """
    Permutation of {U_0, ..., U_{n-1}} under (<, random order), evaluated
    pair by pair in O(n^2).
    """
    _check_lambda_size(stream, n)

    points = np.concatenate(([0.0], stream.u[: n - 1]))
    order = np.argsort(points)
    indices = np.arange(n)[order]
    below = np.zeros(n, dtype=np.int64)
    for a in range(n - 1):
        # For sorted points a < b the deciding index is the smallest stream
        # index among points a+1..b
        deciders = np.minimum.accumulate(indices[a + 1 :])
        plus = stream.s[deciders - 1] > 0
        below[a + 1 :] += plus
        below[a] += int(np.count_nonzero(~plus))

    return Permutation._trusted(tuple(int(v) + 1 for v in below))


def lambda_of_stream(stream: OrderStream, n: int) -> Permutation:
    """
    Permutation of {U_0, ..., U_{n-1}} under (<, random order) by rank
    insertion in O(n log n).

    A new point U_j lands next to its predecessor x in value order: right
    after x in the random order when S_j is +, right before it otherwise.

    Parameters
    ----------
    stream : OrderStream
        The stream, of length at least n - 1.
    n : int
        Number of points.

    Returns
    -------
    Permutation
        lambda_n of the stream.
    """
    _check_lambda_size(stream, n)

    values = SortedList([0.0])
    owner = {0.0: 0}
    after = [-1] * n
    before = [-1] * n
    head = 0
    for j in range(1, n):
        u = float(stream.u[j - 1])
        pred = owner[values[values.bisect_left(u) - 1]]
        if stream.s[j - 1] > 0:
            after[j], before[j] = after[pred], pred
            if after[pred] != -1:
                before[after[pred]] = j
            after[pred] = j
        else:
            after[j], before[j] = pred, before[pred]
            if before[pred] != -1:
                after[before[pred]] = j
            else:
                head = j
            before[pred] = j

        values.add(u)
        owner[u] = j

    rank = [0] * n
    node, position = head, 1
    while node != -1:
        rank[node] = position
        node, position = after[node], position + 1

    return Permutation._trusted(tuple(rank[owner[v]] for v in values))


def _check_lambda_size(stream: OrderStream, n: int) -> None:
    if n < 1:
        raise PreconditionError(f"n must be >= 1, got {n}")
    if n - 1 > len(stream):
        raise PreconditionError(
            f"A stream of length {len(stream)} only supports n <= {len(stream) + 1}"
        )


def empirical_prec_mass(stream: OrderStream, n: int, x: float) -> float:
    """Fraction of {U_0, ..., U_{n-1}} strictly preceding x."""
    _check_lambda_size(stream, n)

    points = np.concatenate(([0.0], stream.u[: n - 1]))
    hits = sum(precedes(stream, float(y), x) is Relation.PRECEDES for y in points)
    return hits / n


###############################################################################


def sample_lambda(
    cfg: ChainConfig,
    rng: np.random.Generator | None = None,
) -> Permutation:
    """
    Draw lambda_n by rank insertion.

    The rank of a fresh uniform among the n current points is uniform on
    1..n, so inserting U_n with sign S_n inflates lambda_n at a uniform
    position.
    """
    rng = rng if rng is not None else path_rng(cfg.seed)
    stream = OrderStream.generate(cfg.n_target - 1, float(cfg.p), rng)
    return lambda_of_stream(stream, cfg.n_target)


class RankInsertion(Sampler):
    """Sampler building lambda_n from a fresh order stream."""

    name = "order"

    @staticmethod
    def sample(
        cfg: ChainConfig,
        rng: np.random.Generator | None = None,
    ) -> Permutation:
        return sample_lambda(cfg, rng)
