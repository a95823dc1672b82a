#!/usr/bin/env python

"""Statistics telling the recursive permuton from the Brownian surrogate."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
import pandas as pd
from scipy import stats
from tqdm import tqdm

from .errors import PreconditionError
from .intensity import (
    BetaParams,
    beta_moments,
    psi_iterate,
    sample_beta,
    w1_contraction,
)
from .perm_core import Permutation, is_cograph, is_separable
from .permuton_ops import f_of_perm, l1_distance, sample_patterns
from .samplers.base import (
    ChainConfig,
    SampleFields,
    frequencies,
    path_rng,
    tv_distance,
)
from .samplers.brownian import sample_brownian_permutation
from .samplers.chain import InflationChain, sample_cographs
from .samplers.order import (
    OrderStream,
    RankInsertion,
    lambda_of_stream,
    max_gap,
    phi_k,
    sample_lambda,
)
from .tree_density import as_exact, exact_distribution

###############################################################################

log = logging.getLogger(__name__)

###############################################################################


class StatisticFields:
    model = "model"
    statistic = "statistic"
    value = "value"
    stderr = "stderr"


ALL_STATISTIC_FIELDS = [
    field_value
    for field_name, field_value in vars(StatisticFields).items()
    if not field_name.startswith("_")
]

###############################################################################


class Model(Enum):
    RECURSIVE = "recursive"
    BROWNIAN = "brownian"


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class CornerFrequencies:
    bottom_left: float
    top_left: float
    both: float
    reps: int

    def stderr(self, frequency: float) -> float:
        return float(np.sqrt(frequency * (1 - frequency) / self.reps))


def realization(
    model: Model | str,
    p: float,
    size: int,
    rng: np.random.Generator,
) -> Permutation:
    """
    One discrete realization of a model: lambda_size for the recursive
    model, the peaks permutation of an excursion of half length `size` for
    the Brownian surrogate.
    """
    cfg = ChainConfig(p=p, n_target=size)
    if Model(model) is Model.RECURSIVE:
        return sample_lambda(cfg, rng)
    return sample_brownian_permutation(cfg, rng)


###############################################################################


def dn_statistic(
    model: Model | str,
    p: float,
    n_perm: int,
    k: int,
    reps: int,
    seed: int = 0,
    realizations: int = 1,
) -> Estimate:
    """
    Descent density of sampled k-patterns, des / (k - 1).

    Parameters
    ----------
    model : Model | str
        "recursive" or "brownian".
    p : float
        Probability of a + sign.
    n_perm : int
        Size parameter of each realization.
    k : int
        Pattern size, at least 2.
    reps : int
        Patterns drawn from each realization.
    seed : int, optional
        Run seed; realization i uses stream i, by default 0
    realizations : int, optional
        Number of independent realizations, by default 1

    Returns
    -------
    Estimate
        Mean descent density. With several realizations the standard error
        is taken across realization means; otherwise across patterns of the
        single realization.
    """
    if k < 2:
        raise PreconditionError(f"Pattern size must be >= 2, got {k}")
    if reps < 1 or realizations < 1:
        raise PreconditionError("reps and realizations must be >= 1")

    means = []
    last = np.zeros(0)
    for index in range(realizations):
        rng = path_rng(seed, index)
        sigma = realization(model, p, n_perm, rng)
        patterns = sample_patterns(sigma, k, reps, rng)
        last = np.count_nonzero(np.diff(patterns, axis=1) < 0, axis=1) / (k - 1)
        means.append(float(last.mean()))

    if realizations > 1:
        stderr = float(np.std(means, ddof=1) / np.sqrt(realizations))
    else:
        stderr = float(np.std(last, ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0

    return Estimate(float(np.mean(means)), stderr)


def _corners(sigma: Permutation, eps: float) -> tuple[bool, bool]:
    n = len(sigma)
    positions = np.arange(1, n + 1) / n
    values = np.asarray(sigma.entries) / n
    left = positions <= eps
    bottom_left = bool(np.any(left & (values <= eps)))
    top_left = bool(np.any(left & (values > 1 - eps)))
    return bottom_left, top_left


def corner_events(
    model: Model | str,
    p: float,
    eps: float,
    n: int,
    reps: int,
    seed: int = 0,
    threads: int = 1,
    tqdm_kwargs: dict | None = None,
) -> CornerFrequencies:
    """
    Frequencies of diagram points in [0, eps]^2 and in [0, eps] x [1-eps, 1].

    Each of `reps` independent realizations contributes one indicator per
    corner; the both-corners event requires the two in the same
    realization.
    """
    if not 0 < eps < 0.5:
        raise PreconditionError(f"eps must lie in (0, 1/2), got {eps}")
    if reps < 1:
        raise PreconditionError(f"reps must be >= 1, got {reps}")

    def indicators(index: int) -> tuple[bool, bool]:
        return _corners(realization(model, p, n, path_rng(seed, index)), eps)

    with ThreadPoolExecutor(max_workers=max(threads, 1)) as executor:
        hits = np.array(
            list(
                tqdm(
                    executor.map(indicators, range(reps)),
                    total=reps,
                    **(tqdm_kwargs or {}),
                )
            ),
            dtype=bool,
        )

    return CornerFrequencies(
        bottom_left=float(hits[:, 0].mean()),
        top_left=float(hits[:, 1].mean()),
        both=float((hits[:, 0] & hits[:, 1]).mean()),
        reps=reps,
    )


def compare_models(
    p: float,
    n_perm: int,
    m: int,
    k: int,
    reps: int,
    eps: float,
    corner_reps: int,
    realizations: int = 1,
    seed: int = 0,
    threads: int = 1,
    tqdm_kwargs: dict | None = None,
) -> pd.DataFrame:
    """
    Descent density and corner frequencies for both models.

    Parameters
    ----------
    p : float
        Probability of a + sign.
    n_perm : int
        Size of the recursive realizations.
    m : int
        Half length of the Brownian excursions.
    k : int
        Pattern size of the descent statistic.
    reps : int
        Patterns per realization.
    eps : float
        Corner side.
    corner_reps : int
        Realizations per corner frequency.
    realizations : int, optional
        Realizations behind the descent statistic, by default 1
    seed : int, optional
        Run seed, by default 0
    threads : int, optional
        Number of worker threads for corner events, by default 1
    tqdm_kwargs : dict, optional
        Additional keyword arguments to pass to tqdm, by
        default None

    Returns
    -------
    pd.DataFrame
        One row per (model, statistic) with its value and standard error.
    """
    rows = []
    for model, size in ((Model.RECURSIVE, n_perm), (Model.BROWNIAN, m)):
        log.info(f"Computing statistics for the {model.value} model")
        descent = dn_statistic(model, p, size, k, reps, seed, realizations)
        corners = corner_events(
            model, p, eps, size, corner_reps, seed, threads, tqdm_kwargs
        )
        rows.append((model.value, f"D_{k}", descent.value, descent.stderr))
        for name, frequency in (
            ("BL", corners.bottom_left),
            ("TL", corners.top_left),
            ("BL&TL", corners.both),
        ):
            rows.append((model.value, name, frequency, corners.stderr(frequency)))

    return pd.DataFrame(rows, columns=ALL_STATISTIC_FIELDS)


###############################################################################


def sampler_agreement(
    n: int,
    p: float,
    draws: int,
    seed: int = 0,
    threads: int = 1,
    tqdm_kwargs: dict | None = None,
) -> pd.DataFrame:
    """Total-variation distances between both samplers and the exact law."""
    cfg = ChainConfig(p=p, seed=seed, n_target=n)
    chain = InflationChain.get_samples(cfg, draws, threads, tqdm_kwargs=tqdm_kwargs)
    order = RankInsertion.get_samples(
        ChainConfig(p=p, seed=seed + 1, n_target=n),
        draws,
        threads,
        tqdm_kwargs=tqdm_kwargs,
    )
    exact = exact_distribution(n, as_exact(p)).probs

    chain_freq = frequencies(chain[SampleFields.permutation])
    order_freq = frequencies(order[SampleFields.permutation])
    return pd.DataFrame(
        [
            ("chain", "order", tv_distance(chain_freq, order_freq)),
            ("chain", "exact", tv_distance(chain_freq, exact)),
            ("order", "exact", tv_distance(order_freq, exact)),
        ],
        columns=["left", "right", "tv_distance"],
    )


def descent_chi_square(
    n: int,
    p: float,
    draws: int,
    seed: int = 0,
    threads: int = 1,
    min_expected: float = 5.0,
) -> tuple[float, float]:
    """
    Chi-square test of sampled descent counts against Binomial(n-1, 1-p).

    Tail bins are pooled until every expected count reaches `min_expected`.
    Returns the statistic and its p-value.
    """
    samples = InflationChain.get_samples(
        ChainConfig(p=p, seed=seed, n_target=n), draws, threads
    )
    observed = np.bincount(
        samples[SampleFields.descents].to_numpy(dtype=np.int64), minlength=n
    )
    expected = stats.binom.pmf(np.arange(n), n - 1, 1 - p) * len(samples)

    # Pool bins left to right, then fold a short last bin into its neighbour
    pooled_obs, pooled_exp = [0.0], [0.0]
    for obs, exp in zip(observed, expected):
        if pooled_exp[-1] >= min_expected:
            pooled_obs.append(0.0)
            pooled_exp.append(0.0)
        pooled_obs[-1] += obs
        pooled_exp[-1] += exp
    if len(pooled_exp) > 1 and pooled_exp[-1] < min_expected:
        pooled_obs[-2] += pooled_obs.pop()
        pooled_exp[-2] += pooled_exp.pop()

    expected_arr = np.asarray(pooled_exp)
    expected_arr *= sum(pooled_obs) / expected_arr.sum()
    result = stats.chisquare(pooled_obs, expected_arr)
    return float(result.statistic), float(result.pvalue)


def psi_fixed_point_table(
    p: float,
    draws: int,
    seed: int = 0,
    steps: int = 3,
) -> pd.DataFrame:
    """
    Moments of one Psi_p application to Beta(p, 1-p) draws against the
    exact Beta moments, and the contraction of W1 between two point masses.
    """
    params = BetaParams.of_p(p)
    rng = path_rng(seed)
    image = psi_iterate(sample_beta(params, draws, rng), p, rng)
    exact = beta_moments(params, 4)

    rows = []
    for order, target in enumerate(exact, 1):
        powers = image**order
        rows.append(
            (
                f"moment_{order}",
                float(powers.mean()),
                float(target),
                float(powers.std(ddof=1) / np.sqrt(draws)),
            )
        )

    distances = w1_contraction(p, draws, steps, seed=seed + 1)
    for step in range(1, len(distances)):
        ratio = distances[step] / distances[step - 1]
        rows.append((f"w1_ratio_{step}", float(ratio), 0.5, float("nan")))

    return pd.DataFrame(rows, columns=["statistic", "value", "expected", "stderr"])


def convergence_table(
    p: float,
    sizes: list[int],
    streams: int,
    depth: int,
    seed: int = 0,
    tqdm_kwargs: dict | None = None,
) -> pd.DataFrame:
    """
    L1 distance between f of lambda_n and phi_depth on shared streams.

    Every stream of length depth serves all sizes, so the distances of one
    row trace a single path converging to its limit.
    """
    if max(sizes) - 1 > depth:
        raise PreconditionError(
            f"Sizes up to {max(sizes)} need depth >= {max(sizes) - 1}"
        )

    rows = []
    for index in tqdm(range(streams), **(tqdm_kwargs or {})):
        stream = OrderStream.generate(depth, p, path_rng(seed, index))
        limit = phi_k(stream, depth)
        for n in sizes:
            distance = l1_distance(f_of_perm(lambda_of_stream(stream, n)), limit)
            rows.append(
                {
                    "stream": index,
                    "n": n,
                    "l1_distance": distance,
                    "max_gap": max_gap(stream, n - 1),
                }
            )

    df = pd.DataFrame(rows)
    return (
        df.groupby("n")
        .agg(
            median_l1=("l1_distance", "median"),
            max_l1=("l1_distance", "max"),
            median_gap=("max_gap", "median"),
        )
        .reset_index()
    )


def separability_check(
    n: int,
    p: float,
    count: int,
    graph_n: int,
    graph_count: int,
    seed: int = 0,
    threads: int = 1,
) -> pd.DataFrame:
    """Count chain samples that are not separable and cographs that are not P4-free."""
    perms = InflationChain.get_samples(
        ChainConfig(p=p, seed=seed, n_target=n), count, threads
    )
    perm_failures = sum(
        not is_separable(sigma) for sigma in perms[SampleFields.permutation]
    )
    graphs = sample_cographs(
        ChainConfig(p=p, seed=seed + 1, n_target=graph_n), graph_count
    )
    graph_failures = sum(not is_cograph(graph) for graph in graphs)

    return pd.DataFrame(
        [
            ("separable_permutation", n, count, perm_failures),
            ("p4_free_cograph", graph_n, graph_count, graph_failures),
        ],
        columns=["check", "n", "samples", "failures"],
    )
