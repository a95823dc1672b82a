#!/usr/bin/env python

from __future__ import annotations

import logging

import networkx as nx
import numpy as np
from tqdm import tqdm

from ..errors import PreconditionError
from ..perm_core import Permutation, Sign, direct_sum, skew_sum
from ..tree_density import DecoratedTree, HistoryTree, perm_of_tree
from .base import ChainConfig, Sampler, draw_sign, path_rng

###############################################################################

log = logging.getLogger(__name__)

###############################################################################


def inflate_at_value(tau: Permutation, j: int, sign: Sign) -> Permutation:
    """
    Replace the value j of tau by two adjacent points.

    Values above j are shifted up by one, then j is replaced in place by
    (j, j+1) for a + inflation or by (j+1, j) for a - inflation.
    """
    if not 1 <= j <= len(tau):
        raise PreconditionError(f"Value {j} outside 1..{len(tau)}")

    pair = (j, j + 1) if sign is Sign.PLUS else (j + 1, j)
    entries: list[int] = []
    for value in tau.entries:
        if value == j:
            entries.extend(pair)
        else:
            entries.append(value + 1 if value > j else value)

    return Permutation._trusted(tuple(entries))


def inflate_at_position(tau: Permutation, k: int, sign: Sign) -> Permutation:
    if not 1 <= k <= len(tau):
        raise PreconditionError(f"Position {k} outside 1..{len(tau)}")

    return inflate_at_value(tau, tau.entries[k - 1], sign)


def compose_split(tau: Permutation, rho: Permutation, sign: Sign) -> Permutation:
    return direct_sum(tau, rho) if sign is Sign.PLUS else skew_sum(tau, rho)


###############################################################################


def sample_chain(
    cfg: ChainConfig,
    rng: np.random.Generator | None = None,
) -> tuple[Permutation, HistoryTree]:
    """
    Run the inflation chain up to size cfg.n_target.

    Each step picks a value uniformly among the current ones and inflates
    it, + with probability p. Values and leaves of the history tree are in
    bijection, so the step splits a uniform leaf into a node labelled by
    the step number; the permutation is read off the tree at the end.

    Parameters
    ----------
    cfg : ChainConfig
        Target size, sign probability and seed.
    rng : np.random.Generator, optional
        Generator to draw from, by default the first stream of cfg.seed

    Returns
    -------
    tuple[Permutation, HistoryTree]
        The sampled permutation and its history tree.
    """
    rng = rng if rng is not None else path_rng(cfg.seed)
    p = float(cfg.p)

    root = DecoratedTree()
    # Unordered pool of leaves; a uniform slot is a uniform value
    leaves = [root]
    for step in range(1, cfg.n_target):
        slot = int(rng.integers(0, step))
        sign = draw_sign(rng, p)
        left, right = leaves[slot].split(sign, step)
        leaves[slot] = left
        leaves.append(right)

    return perm_of_tree(root), root


class InflationChain(Sampler):
    """Sampler running the value-inflation chain."""

    name = "chain"

    @staticmethod
    def sample(
        cfg: ChainConfig,
        rng: np.random.Generator | None = None,
    ) -> Permutation:
        perm, _ = sample_chain(cfg, rng)
        return perm


###############################################################################


def sample_cograph_chain(
    cfg: ChainConfig,
    rng: np.random.Generator | None = None,
) -> nx.Graph:
    """
    Run the vertex-duplication chain up to cfg.n_target vertices.

    Each step picks a vertex v uniformly, adds a twin v' with the same
    neighbours and joins v to v' with probability 1 - p.
    """
    rng = rng if rng is not None else path_rng(cfg.seed)
    p = float(cfg.p)

    neighbours: list[set[int]] = [set()]
    for size in range(1, cfg.n_target):
        v = int(rng.integers(0, size))
        twin = size
        neighbours.append(set(neighbours[v]))
        for w in neighbours[v]:
            neighbours[w].add(twin)
        if rng.random() >= p:
            neighbours[v].add(twin)
            neighbours[twin].add(v)

    graph = nx.Graph()
    graph.add_nodes_from(range(1, cfg.n_target + 1))
    graph.add_edges_from(
        (v + 1, w + 1)
        for v, adjacent in enumerate(neighbours)
        for w in adjacent
        if v < w
    )
    return graph


def sample_cographs(
    cfg: ChainConfig,
    count: int,
    tqdm_kwargs: dict | None = None,
) -> list[nx.Graph]:
    """Independent cograph chain runs, one stream per run."""
    return [
        sample_cograph_chain(cfg, path_rng(cfg.seed, index))
        for index in tqdm(range(count), **(tqdm_kwargs or {}))
    ]
