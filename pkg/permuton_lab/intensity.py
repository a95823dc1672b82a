#!/usr/bin/env python

"""
The intensity measure of the recursive separable permuton.

Points of the intensity are (U, U X + (1 - U) X') with U uniform,
X ~ Beta(p, 1 - p) and X' ~ Beta(1 - p, p). Its density is the singular
integral

    (sin(pi p) / pi)^2 * int dz / (z^(1-p) (x-z)^p (y-z)^p (1-x-y+z)^(1-p))

over max(x + y - 1, 0) < z < min(x, y), which blows up on the diagonal for
p >= 1/2 and on the anti-diagonal for p <= 1/2.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate, stats
from tqdm import tqdm

from .errors import PreconditionError, QuadratureError
from .permuton_ops import GridMeasure, cell_overlap
from .samplers.base import ChainConfig, path_rng
from .samplers.order import sample_lambda

###############################################################################

log = logging.getLogger(__name__)

###############################################################################

_DEFAULT_TOLERANCE = 1e-8
_DEFAULT_MARGINAL_TOLERANCE = 1e-7
_DEFAULT_QUAD_LIMIT = 200
_DEFAULT_GAUSS_ORDER = 6
_DEFAULT_MC_SAMPLES = 200_000
_DEFAULT_CHUNK_SIZE = 250

# Distance under which a point counts as lying on a singular line
_LINE_TOLERANCE = 1e-12

# Slopes in z of the forms z, x - z, y - z and 1 - x - y + z
_FORM_SLOPES = np.array([1.0, -1.0, -1.0, 1.0])

###############################################################################


class Divergence(Enum):
    DIVERGENT = "divergent"


DIVERGENT = Divergence.DIVERGENT


@dataclass(frozen=True)
class BetaParams:
    a: float
    b: float

    def __post_init__(self) -> None:
        if not (self.a > 0 and self.b > 0):
            raise PreconditionError(
                f"Beta parameters must be positive, got ({self.a}, {self.b})"
            )

    @classmethod
    def of_p(cls, p: float) -> BetaParams:
        """Beta(p, 1 - p), the fixed point of the Psi_p map."""
        _check_p(p)
        return cls(float(p), 1.0 - float(p))

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)


def _check_p(p: float) -> None:
    if not 0 < p < 1:
        raise PreconditionError(f"p must lie in (0, 1), got {p}")


###############################################################################


def sample_beta(
    params: BetaParams,
    size: int | None = None,
    rng: np.random.Generator | None = None,
) -> float | np.ndarray:
    """
    Beta draws as G_a / (G_a + G_b) for independent Gamma variables.

    The Gamma sampler is numpy's Marsaglia-Tsang rejection scheme, which
    handles shapes below one by the U^(1/a) boost. Draws where both Gamma
    variables underflow to zero are redrawn.
    """
    rng = rng if rng is not None else path_rng(0)
    shape = 1 if size is None else size
    left = rng.standard_gamma(params.a, shape)
    right = rng.standard_gamma(params.b, shape)
    while np.any(empty := (left + right) == 0):
        left[empty] = rng.standard_gamma(params.a, int(empty.sum()))
        right[empty] = rng.standard_gamma(params.b, int(empty.sum()))

    draws = left / (left + right)
    return float(draws[0]) if size is None else draws


def beta_moments(params: BetaParams, order: int = 4) -> np.ndarray:
    """Raw moments E[X^r], r = 1..order."""
    steps = np.arange(order)
    return np.cumprod((params.a + steps) / (params.a + params.b + steps))


def psi_iterate(
    sample: np.ndarray,
    p: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Apply Y = B V + (1 - V) X to every point, B ~ Bernoulli(p), V uniform."""
    _check_p(p)
    rng = rng if rng is not None else path_rng(0)
    sample = np.asarray(sample, dtype=np.float64)
    coins = rng.random(sample.shape) < p
    v = rng.random(sample.shape)
    return coins * v + (1 - v) * sample


def w1_contraction(
    p: float,
    size: int = 100_000,
    steps: int = 3,
    starts: tuple[float, float] = (0.0, 1.0),
    seed: int = 0,
) -> np.ndarray:
    """
    Wasserstein-1 distances between Psi_p iterates of two point masses.

    Returns the distances d_0, ..., d_steps; each application of Psi_p
    should at least halve them.
    """
    left = np.full(size, float(starts[0]))
    right = np.full(size, float(starts[1]))
    left_rng, right_rng = path_rng(seed, 0), path_rng(seed, 1)
    distances = [stats.wasserstein_distance(left, right)]
    for _ in range(steps):
        left = psi_iterate(left, p, left_rng)
        right = psi_iterate(right, p, right_rng)
        distances.append(stats.wasserstein_distance(left, right))

    return np.asarray(distances)


def sample_intensity(
    p: float,
    size: int | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray] | tuple[float, float]:
    """Draw points (U, U X + (1 - U) X') of the intensity measure."""
    _check_p(p)
    rng = rng if rng is not None else path_rng(0)
    shape = 1 if size is None else size
    u = rng.random(shape)
    x = sample_beta(BetaParams(p, 1 - p), shape, rng)
    x_prime = sample_beta(BetaParams(1 - p, p), shape, rng)
    y = u * x + (1 - u) * x_prime
    if size is None:
        return float(u[0]), float(y[0])
    return u, y


###############################################################################


def on_singular_line(p: float, x: float, y: float) -> bool:
    return (p >= 0.5 and abs(x - y) <= _LINE_TOLERANCE) or (
        p <= 0.5 and abs(x + y - 1) <= _LINE_TOLERANCE
    )


def _half_integral(
    p: float,
    x: float,
    y: float,
    end: float,
    other: float,
    tol: float,
) -> tuple[float, float, str | None]:
    # Integral from a singular endpoint to the midpoint. Writing the
    # distance to the endpoint as s^beta with beta = 1 / (1 - alpha), where
    # alpha is the total blow-up exponent there, removes the singularity.
    direction = 1.0 if other > end else -1.0
    exponents = np.array([p - 1, -p, -p, p - 1])
    constants = np.array([end, x - end, y - end, 1 - x - y + end])
    vanishing = np.abs(constants) <= _LINE_TOLERANCE
    alpha = -exponents[vanishing].sum()
    beta = 1.0 / (1.0 - alpha)

    regular_constants = constants[~vanishing]
    regular_slopes = _FORM_SLOPES[~vanishing] * direction
    regular_exponents = exponents[~vanishing]

    def integrand(s: float) -> float:
        forms = regular_constants + regular_slopes * s**beta
        return beta * float(np.prod(forms**regular_exponents))

    upper = abs(other - end) ** (1.0 - alpha)
    result = integrate.quad(
        integrand,
        0.0,
        upper,
        epsabs=tol,
        epsrel=tol,
        limit=_DEFAULT_QUAD_LIMIT,
        full_output=1,
    )
    message = result[3] if len(result) > 3 else None
    return float(result[0]), float(result[1]), message


def intensity_density(
    p: float,
    x: float,
    y: float,
    tol: float = _DEFAULT_TOLERANCE,
) -> float | Divergence:
    """
    Density of the intensity measure at (x, y).

    Parameters
    ----------
    p : float
        Probability of a + inflation.
    x : float
        Abscissa in (0, 1).
    y : float
        Ordinate in (0, 1).
    tol : float, optional
        Absolute and relative tolerance of each quadrature, by default 1e-8

    Returns
    -------
    float | Divergence
        The density, or DIVERGENT on the diagonal when p >= 1/2 and on the
        anti-diagonal when p <= 1/2.

    Raises
    ------
    QuadratureError
        When a quadrature does not reach the tolerance; the error carries
        the partial estimate.
    """
    _check_p(p)
    if not (0 < x < 1 and 0 < y < 1):
        raise PreconditionError(f"({x}, {y}) is outside the open unit square")
    if on_singular_line(p, x, y):
        return DIVERGENT

    lower = max(x + y - 1.0, 0.0)
    upper = min(x, y)
    middle = (lower + upper) / 2
    scale = (np.sin(np.pi * p) / np.pi) ** 2

    left, left_err, left_msg = _half_integral(p, x, y, lower, middle, tol)
    right, right_err, right_msg = _half_integral(p, x, y, upper, middle, tol)
    estimate = scale * (left + right)
    if left_msg or right_msg:
        raise QuadratureError(
            f"Quadrature did not converge at p={p}, x={x}, y={y}: "
            f"{left_msg or right_msg}",
            estimate=estimate,
            abserr=scale * (left_err + right_err),
        )

    return estimate


def _density_value(p: float, x: float, y: float, tol: float) -> float:
    try:
        value = intensity_density(p, x, y, tol)
    except QuadratureError as e:
        log.warning(f"{e}; using estimate {e.estimate}")
        return e.estimate

    # Singular lines are only met at quadrature breakpoints, never evaluated
    return np.inf if value is DIVERGENT else float(value)  # type: ignore[arg-type]


def marginal_density(
    p: float,
    x: float,
    tol: float = _DEFAULT_MARGINAL_TOLERANCE,
) -> float:
    """Integral of the density over y at fixed x; equals 1 for every x."""
    _check_p(p)
    breaks = sorted({x, 1.0 - x})
    result = integrate.quad(
        lambda y: _density_value(p, x, y, tol / 10),
        0.0,
        1.0,
        points=breaks,
        epsabs=tol,
        epsrel=tol,
        limit=_DEFAULT_QUAD_LIMIT,
        full_output=1,
    )
    if len(result) > 3:
        raise QuadratureError(
            f"Marginal quadrature did not converge at p={p}, x={x}: {result[3]}",
            estimate=float(result[0]),
            abserr=float(result[1]),
        )

    return float(result[0])


###############################################################################


def histogram_grid(x: np.ndarray, y: np.ndarray, k: int) -> GridMeasure:
    """Normalized k x k histogram of points of the unit square."""
    counts, _, _ = np.histogram2d(x, y, bins=k, range=[[0.0, 1.0], [0.0, 1.0]])
    return GridMeasure(counts / counts.sum())


def singular_cells(p: float, k: int) -> np.ndarray:
    """Boolean mask of the cells whose closure meets a singular line."""
    i, j = np.indices((k, k))
    mask = np.zeros((k, k), dtype=bool)
    if p >= 0.5:
        mask |= np.abs(i - j) <= 1
    if p <= 0.5:
        mask |= np.abs(i + j - (k - 1)) <= 1
    return mask


def density_grid(
    p: float,
    k: int,
    order: int = _DEFAULT_GAUSS_ORDER,
    mc_samples: int = _DEFAULT_MC_SAMPLES,
    seed: int = 0,
    tol: float = _DEFAULT_TOLERANCE,
    raise_on_error: bool = True,
    tqdm_kwargs: dict | None = None,
) -> GridMeasure:
    """
    Cell masses of the intensity measure on a k x k grid.

    Cells away from the singular lines are integrated by a tensor
    Gauss-Legendre rule on the closed-form density. Cells touching a
    singular line take Monte Carlo counts instead, rescaled row by row so
    every row carries exactly 1/k.

    Parameters
    ----------
    p : float
        Probability of a + inflation.
    k : int
        Grid resolution.
    order : int, optional
        Gauss-Legendre nodes per axis and cell, by default 6
    mc_samples : int, optional
        Intensity draws used for singular cells, by default 200_000
    seed : int, optional
        Seed of the Monte Carlo draws, by default 0
    tol : float, optional
        Tolerance of the pointwise quadratures, by default 1e-8
    raise_on_error : bool, optional
        Whether to raise when a cell quadrature fails, or to fill the cell
        from Monte Carlo counts, by default True
    tqdm_kwargs : dict, optional
        Additional keyword arguments to pass to tqdm, by
        default None

    Returns
    -------
    GridMeasure
        The cell-integrated intensity.
    """
    _check_p(p)
    if k < 1:
        raise PreconditionError(f"Resolution must be >= 1, got {k}")

    nodes, weights = np.polynomial.legendre.leggauss(order)
    offsets = (nodes + 1) / 2
    cell_weights = np.outer(weights, weights) / (4 * k * k)

    from_counts = singular_cells(p, k)
    mass = np.zeros((k, k))
    cells = [(i, j) for i in range(k) for j in range(k) if not from_counts[i, j]]
    for i, j in tqdm(cells, **(tqdm_kwargs or {})):
        try:
            values = np.array(
                [
                    [
                        intensity_density(p, (i + a) / k, (j + b) / k, tol)
                        for b in offsets
                    ]
                    for a in offsets
                ],
                dtype=np.float64,
            )
        except QuadratureError as e:
            # Handle raise on error or ignore
            if raise_on_error:
                raise ValueError(f"Error while integrating cell ({i}, {j}): {e}") from e

            log.error(
                f"Error while integrating cell ({i}, {j}): {e}; "
                f"'raise_on_error' is False, ignoring..."
            )
            from_counts[i, j] = True
            continue

        mass[i, j] = float(np.sum(cell_weights * values))

    if from_counts.any():
        x, y = sample_intensity(p, mc_samples, path_rng(seed))
        counts = histogram_grid(x, y, k).mass
        for i in range(k):
            row = from_counts[i]
            if not row.any():
                continue

            missing = max(1.0 / k - mass[i, ~row].sum(), 0.0)
            observed = counts[i, row].sum()
            if observed > 0:
                mass[i, row] = counts[i, row] * missing / observed
            else:
                mass[i, row] = missing / row.sum()

    return GridMeasure(mass / mass.sum())


###############################################################################


def _accumulate_chunk(
    cfg: ChainConfig,
    indices: range,
    overlap: np.ndarray,
) -> np.ndarray:
    # Rows are positions, columns the grid cells hit by each value's square
    partial = np.zeros_like(overlap)
    for index in indices:
        sigma = sample_lambda(cfg, path_rng(cfg.seed, index))
        partial += overlap[np.asarray(sigma.entries) - 1]
    return partial


def empirical_intensity_grid(
    n: int,
    count: int,
    p: float,
    k: int,
    seed: int = 0,
    threads: int = 1,
    tqdm_kwargs: dict | None = None,
) -> GridMeasure:
    """
    Average of the grid permutons of `count` independent permutations of
    size n.

    Parameters
    ----------
    n : int
        Permutation size.
    count : int
        Number of permutations averaged.
    p : float
        Probability of a + inflation.
    k : int
        Grid resolution.
    seed : int, optional
        Run seed; permutation i uses stream i, by default 0
    threads : int, optional
        Number of worker threads, by default 1. Output does not depend
        on it.
    tqdm_kwargs : dict, optional
        Additional keyword arguments to pass to tqdm, by
        default None

    Returns
    -------
    GridMeasure
        The empirical intensity grid.
    """
    if count < 1:
        raise PreconditionError(f"count must be >= 1, got {count}")
    if k < 1:
        raise PreconditionError(f"Resolution must be >= 1, got {k}")

    cfg = ChainConfig(p=p, seed=seed, n_target=n)
    overlap = cell_overlap(np.linspace(0.0, 1.0, n + 1), k)
    chunks = [
        range(start, min(start + _DEFAULT_CHUNK_SIZE, count))
        for start in range(0, count, _DEFAULT_CHUNK_SIZE)
    ]
    log.info(f"Averaging {count} permutations of size {n} on a {k}x{k} grid")

    # Partials are merged in chunk order
    total = np.zeros_like(overlap)
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as executor:
        for partial in tqdm(
            executor.map(lambda chunk: _accumulate_chunk(cfg, chunk, overlap), chunks),
            total=len(chunks),
            **(tqdm_kwargs or {}),
        ):
            total += partial

    return GridMeasure(overlap.T @ total / (n * count))
