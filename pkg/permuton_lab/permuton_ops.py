#!/usr/bin/env python

"""Grid and step-function permutons, composition, pattern sampling, distances."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Union

import numpy as np
import ot
import pandas as pd

from .errors import (
    PreconditionError,
    ResolutionMismatchError,
    SizeBoundError,
    StructuralError,
)
from .perm_core import Permutation, Sign
from .samplers.base import path_rng
from .tree_density import ExactDist

###############################################################################

log = logging.getLogger(__name__)

###############################################################################

_DEFAULT_TRANSPORT_BOUND = 64
_DEFAULT_EXACT_SAMPLE_BOUND = 4
_MASS_TOLERANCE = 1e-12
_MARGINAL_TOLERANCE = 1e-9

###############################################################################


@dataclass(frozen=True)
class StepFunction:
    """
    Piecewise constant function on [0, 1].

    Cell i is [breakpoints[i], breakpoints[i + 1]), the last cell is closed.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        breakpoints = np.asarray(self.breakpoints, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if breakpoints.ndim != 1 or len(breakpoints) != len(values) + 1:
            raise StructuralError(
                f"{len(breakpoints)} breakpoints do not fit {len(values)} values"
            )
        if breakpoints[0] != 0.0 or breakpoints[-1] != 1.0:
            raise StructuralError("Breakpoints must start at 0 and end at 1")
        if np.any(np.diff(breakpoints) < 0):
            raise StructuralError("Breakpoints must be nondecreasing")
        if np.any(values < -_MASS_TOLERANCE) or np.any(values > 1 + _MASS_TOLERANCE):
            raise StructuralError("Step function values must lie in [0, 1]")

        object.__setattr__(self, "breakpoints", breakpoints)
        object.__setattr__(self, "values", values)

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def __call__(self, x: float | np.ndarray) -> float | np.ndarray:
        cells = np.searchsorted(self.breakpoints, x, side="right") - 1
        result = self.values[np.clip(cells, 0, len(self.values) - 1)]
        if np.ndim(result) == 0:
            return float(result)
        return result


@dataclass(frozen=True)
class PushforwardPermuton:
    """The law of (X, f(X)) for X uniform on [0, 1]."""

    f: StepFunction

    def measure_preservation_gap(self) -> float:
        return kolmogorov_to_uniform(self.f)

    def to_grid(self, k: int) -> GridMeasure:
        return grid_of_pushforward(self.f, k)


@dataclass(frozen=True)
class GridMeasure:
    """
    Probability measure on [0, 1]^2 with uniform density inside each cell
    of a k x k grid. `mass[i, j]` is the mass of the cell
    [i/k, (i+1)/k] x [j/k, (j+1)/k], so rows follow the x axis.
    """

    mass: np.ndarray

    def __post_init__(self) -> None:
        mass = np.asarray(self.mass, dtype=np.float64)
        if mass.ndim != 2 or mass.shape[0] != mass.shape[1] or mass.shape[0] < 1:
            raise StructuralError(f"Grid mass must be square, got {mass.shape}")
        if np.any(mass < -_MASS_TOLERANCE):
            raise StructuralError("Grid mass must be nonnegative")
        if abs(mass.sum() - 1.0) > _MASS_TOLERANCE * max(mass.size, 1):
            raise StructuralError(f"Grid total mass is {mass.sum()}, expected 1")

        mass = np.clip(mass, 0.0, None)
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    @property
    def k(self) -> int:
        return self.mass.shape[0]

    @classmethod
    def uniform(cls, k: int) -> GridMeasure:
        return cls(np.full((k, k), 1.0 / (k * k)))

    def row_sums(self) -> np.ndarray:
        return self.mass.sum(axis=1)

    def column_sums(self) -> np.ndarray:
        return self.mass.sum(axis=0)

    def marginal_error(self) -> float:
        """Largest deviation of a row or column sum from 1/k."""
        target = 1.0 / self.k
        return float(
            max(
                np.abs(self.row_sums() - target).max(),
                np.abs(self.column_sums() - target).max(),
            )
        )

    def is_permuton(self, tol: float = _MARGINAL_TOLERANCE) -> bool:
        return self.marginal_error() <= tol

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame(
            self.mass,
            index=pd.RangeIndex(1, self.k + 1, name="x_cell"),
            columns=pd.RangeIndex(1, self.k + 1, name="y_cell"),
        )

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(f"# k={self.k},total_mass={self.mass.sum():.17g}\n")
            self.to_dataframe().to_csv(
                handle,
                header=False,
                index=False,
                float_format="%.17g",
                lineterminator="\n",
            )

    @classmethod
    def read_csv(cls, path: str | Path) -> GridMeasure:
        return cls(pd.read_csv(path, header=None, comment="#").to_numpy())


Permuton = Union[GridMeasure, PushforwardPermuton, Permutation]

###############################################################################


def cell_overlap(edges: np.ndarray, k: int) -> np.ndarray:
    # Fraction of each source interval falling in each of the k target cells
    lo = np.minimum(edges[:-1, None], edges[1:, None])
    hi = np.maximum(edges[:-1, None], edges[1:, None])
    cells = np.arange(k + 1) / k
    inside = np.clip(
        np.minimum(hi, cells[None, 1:]) - np.maximum(lo, cells[None, :-1]), 0.0, None
    )
    widths = hi - lo
    return np.divide(inside, widths, out=np.zeros_like(inside), where=widths > 0)


def _rebin(
    mass: np.ndarray,
    x_edges: np.ndarray,
    y_edges: np.ndarray,
    k: int,
) -> np.ndarray:
    return cell_overlap(x_edges, k).T @ mass @ cell_overlap(y_edges, k)


def permuton_of_perm(pi: Permutation, k: int) -> GridMeasure:
    """
    Grid discretization of the permuton of pi.

    Point i of pi carries mass 1/n spread uniformly on the square
    [(i-1)/n, i/n] x [(pi(i)-1)/n, pi(i)/n]; squares are prorated onto the
    grid, which is exact when n divides k.

    Parameters
    ----------
    pi : Permutation
        The permutation.
    k : int
        Grid resolution.

    Returns
    -------
    GridMeasure
        The discretized permuton.
    """
    if k < 1:
        raise PreconditionError(f"Resolution must be >= 1, got {k}")

    n = len(pi)
    overlap = cell_overlap(np.linspace(0.0, 1.0, n + 1), k)
    values = np.asarray(pi.entries) - 1
    return GridMeasure(overlap.T @ overlap[values] / n)


def f_of_perm(pi: Permutation) -> StepFunction:
    """
    Step function x -> pi(ceil(n x)) / n.

    Cells are half-open on the right, so the function differs from the
    ceiling formula only on the breakpoints.
    """
    n = len(pi)
    return StepFunction(np.linspace(0.0, 1.0, n + 1), np.asarray(pi.entries) / n)


def grid_of_pushforward(f: StepFunction, k: int) -> GridMeasure:
    """Discretize the push-forward permuton of f; a value on a cell edge goes below."""
    merged = np.union1d(f.breakpoints, np.linspace(0.0, 1.0, k + 1))
    lengths = np.diff(merged)
    mids = (merged[:-1] + merged[1:]) / 2
    x_cells = np.minimum((mids * k).astype(np.int64), k - 1)
    upper = np.ceil(np.asarray(f(mids)) * k - 1e-9).astype(np.int64)
    y_cells = np.clip(upper - 1, 0, k - 1)

    mass = np.zeros((k, k))
    np.add.at(mass, (x_cells, y_cells), lengths)
    return GridMeasure(mass)


def kolmogorov_to_uniform(f: StepFunction) -> float:
    """Kolmogorov distance between the push-forward of Lebesgue by f and Lebesgue."""
    order = np.argsort(f.values, kind="stable")
    values = f.values[order]
    after = np.cumsum(f.lengths[order])
    before = after - f.lengths[order]
    return float(max(np.abs(after - values).max(), np.abs(before - values).max()))


###############################################################################


def compose(
    mu0: GridMeasure,
    mu1: GridMeasure,
    u: float,
    sign: Sign,
    k: int | None = None,
) -> GridMeasure:
    """
    Glue two permutons along a split point u.

    For a + split, mu0 is rescaled into [0, u]^2 and mu1 into [u, 1]^2;
    for a - split, mu0 goes to [0, u] x [1-u, 1] and mu1 to
    [u, 1] x [0, 1-u]. Masses are u and 1-u respectively.

    Parameters
    ----------
    mu0 : GridMeasure
        The left permuton.
    mu1 : GridMeasure
        The right permuton.
    u : float
        Split point in (0, 1).
    sign : Sign
        Block orientation.
    k : int, optional
        Output resolution, by default the larger input resolution

    Returns
    -------
    GridMeasure
        The glued permuton, cell-prorated.
    """
    if not 0 < u < 1:
        raise PreconditionError(f"Split point must lie in (0, 1), got {u}")

    k = k or max(mu0.k, mu1.k)
    left = np.linspace(0.0, 1.0, mu0.k + 1)
    right = np.linspace(0.0, 1.0, mu1.k + 1)
    if sign is Sign.PLUS:
        block0 = _rebin(mu0.mass, u * left, u * left, k)
        block1 = _rebin(mu1.mass, u + (1 - u) * right, u + (1 - u) * right, k)
    else:
        block0 = _rebin(mu0.mass, u * left, (1 - u) + u * left, k)
        block1 = _rebin(mu1.mass, u + (1 - u) * right, (1 - u) * right, k)

    return GridMeasure(u * block0 + (1 - u) * block1)


def phi_p_permuton(
    p: float,
    depth: int,
    k: int,
    rng: np.random.Generator | None = None,
) -> GridMeasure:
    """
    Random permuton obtained by applying the Phi_p recursion `depth` times
    to the uniform permuton: two independent copies of depth - 1 are glued
    at a uniform split point with a + sign of probability p.
    """
    if depth < 0:
        raise PreconditionError(f"depth must be >= 0, got {depth}")

    rng = rng if rng is not None else path_rng(0)
    if depth == 0:
        return GridMeasure.uniform(k)

    mu0 = phi_p_permuton(p, depth - 1, k, rng)
    mu1 = phi_p_permuton(p, depth - 1, k, rng)
    u = float(rng.random())
    while u == 0.0:
        u = float(rng.random())
    sign = Sign.PLUS if rng.random() < p else Sign.MINUS
    return compose(mu0, mu1, u, sign, k)


def phi_p_contraction(
    mu0: GridMeasure,
    nu0: GridMeasure,
    mu1: GridMeasure,
    nu1: GridMeasure,
    u: float,
    sign: Sign,
    k: int | None = None,
) -> tuple[float, float]:
    """
    Both sides of the transport bound behind the Phi_p contraction:
    W1(mu0 (x) mu1, nu0 (x) nu1) <= u^2 W1(mu0, nu0) + (1-u)^2 W1(mu1, nu1).
    """
    glued = w1_grid(compose(mu0, mu1, u, sign, k), compose(nu0, nu1, u, sign, k))
    bound = u**2 * w1_grid(mu0, nu0) + (1 - u) ** 2 * w1_grid(mu1, nu1)
    return glued, bound


###############################################################################


def _pattern_ranks(
    x: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    # Read the y ranks left to right; a random key breaks equal y values
    by_x = np.argsort(x, axis=1, kind="stable")
    ys = np.take_along_axis(y, by_x, axis=1)
    tiebreak = rng.random(ys.shape)
    by_y = np.lexsort((tiebreak, ys), axis=-1)
    ranks = np.empty_like(by_y)
    np.put_along_axis(ranks, by_y, np.arange(1, ys.shape[1] + 1)[None, :], axis=1)
    return ranks


def sample_patterns(
    mu: Permuton,
    k: int,
    count: int,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """
    Draw `count` independent size-k patterns of a permuton.

    Parameters
    ----------
    mu : GridMeasure | PushforwardPermuton | Permutation
        The permuton. A permutation stands for its exact permuton.
    k : int
        Pattern size.
    count : int
        Number of patterns.
    rng : np.random.Generator, optional
        Generator, by default the first stream of seed 0

    Returns
    -------
    np.ndarray
        Integer array of shape (count, k); row r is a pattern in one-line
        notation.
    """
    if k < 1:
        raise PreconditionError(f"Pattern size must be >= 1, got {k}")

    rng = rng if rng is not None else path_rng(0)
    shape = (count, k)
    if isinstance(mu, GridMeasure):
        flat = rng.choice(mu.k * mu.k, size=shape, p=mu.mass.ravel() / mu.mass.sum())
        x = (flat // mu.k + rng.random(shape)) / mu.k
        y = (flat % mu.k + rng.random(shape)) / mu.k
    elif isinstance(mu, PushforwardPermuton):
        x = rng.random(shape)
        y = np.asarray(mu.f(x)).reshape(shape)
    elif isinstance(mu, Permutation):
        n = len(mu)
        squares = rng.integers(0, n, size=shape)
        values = np.asarray(mu.entries)[squares] - 1
        x = (squares + rng.random(shape)) / n
        y = (values + rng.random(shape)) / n
    else:
        raise PreconditionError(f"Cannot sample patterns from {type(mu).__name__}")

    return _pattern_ranks(x, y, rng)


def sample_pattern(
    mu: Permuton,
    k: int,
    rng: np.random.Generator | None = None,
) -> Permutation:
    row = sample_patterns(mu, k, 1, rng)[0]
    return Permutation._trusted(tuple(int(v) for v in row))


def exact_sample_law(
    pi: Permutation,
    k: int,
    bound: int = _DEFAULT_EXACT_SAMPLE_BOUND,
) -> ExactDist:
    """
    Exact law of a size-k pattern of the permuton of pi.

    Every assignment of the k points to the squares of pi is enumerated;
    points sharing a square are ordered by independent uniform tie orders
    in x and y.
    """
    n = len(pi)
    if n > bound or k > bound:
        raise SizeBoundError(f"Exact pattern law is limited to n, k <= {bound}")

    tie_orders = list(itertools.permutations(range(k)))
    weight = Fraction(1, n**k * len(tie_orders) ** 2)
    probs: dict = {}
    for squares in itertools.product(range(n), repeat=k):
        for x_ties, y_ties in itertools.product(tie_orders, repeat=2):
            by_x = sorted(range(k), key=lambda i: (squares[i], x_ties[i]))
            y_keys = [(pi.entries[squares[i]], y_ties[i]) for i in by_x]
            ranks = [0] * k
            for rank, index in enumerate(sorted(range(k), key=y_keys.__getitem__), 1):
                ranks[index] = rank
            tau = Permutation._trusted(tuple(ranks))
            probs[tau] = probs.get(tau, Fraction(0)) + weight

    return ExactDist(k, probs)


###############################################################################


def l1_distance(f: StepFunction, g: StepFunction) -> float:
    """Exact integral of |f - g| over [0, 1]."""
    merged = np.union1d(f.breakpoints, g.breakpoints)
    mids = (merged[:-1] + merged[1:]) / 2
    gaps = np.abs(np.asarray(f(mids)) - np.asarray(g(mids)))
    return float(np.sum(gaps * np.diff(merged)))


def l1_cells(mu: GridMeasure, nu: GridMeasure) -> float:
    if mu.k != nu.k:
        raise ResolutionMismatchError(f"Grid resolutions differ: {mu.k} vs {nu.k}")
    return float(np.abs(mu.mass - nu.mass).sum())


def w1_grid(
    mu: GridMeasure,
    nu: GridMeasure,
    bound: int = _DEFAULT_TRANSPORT_BOUND,
) -> float:
    """
    Wasserstein-1 distance between two grids with masses at cell centers.

    Parameters
    ----------
    mu : GridMeasure
        First grid.
    nu : GridMeasure
        Second grid, same resolution.
    bound : int, optional
        Largest accepted resolution, by default 64

    Returns
    -------
    float
        Optimal transport cost under the Euclidean ground metric, solved
        exactly on the supports of both grids.
    """
    if mu.k != nu.k:
        raise ResolutionMismatchError(f"Grid resolutions differ: {mu.k} vs {nu.k}")
    if mu.k > bound:
        raise PreconditionError(f"Transport is limited to k <= {bound}, got {mu.k}")

    centers = (np.indices((mu.k, mu.k)).reshape(2, -1).T + 0.5) / mu.k
    source = mu.mass.ravel()
    target = nu.mass.ravel()
    keep_source = source > 0
    keep_target = target > 0
    cost = ot.dist(centers[keep_source], centers[keep_target], metric="euclidean")
    return float(
        ot.emd2(
            source[keep_source] / source[keep_source].sum(),
            target[keep_target] / target[keep_target].sum(),
            cost,
        )
    )
