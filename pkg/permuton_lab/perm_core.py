#!/usr/bin/env python

"""Permutations, patterns, sums, descents, separability and inversion graphs."""

from __future__ import annotations

import functools
import itertools
import logging
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Literal

import networkx as nx
import numpy as np

from .errors import PreconditionError, SizeBoundError

###############################################################################

log = logging.getLogger(__name__)

###############################################################################

_DEFAULT_SCAN_BOUND = 50
_DEFAULT_P4_SCAN_BOUND = 20
_DEFAULT_CANONICAL_BOUND = 8

# Patterns whose avoidance characterizes separable permutations
_SEPARABILITY_OBSTRUCTIONS = frozenset({(3, 1, 4, 2), (2, 4, 1, 3)})

###############################################################################


class Sign(IntEnum):
    """Decoration of an inflation or of an internal tree node."""

    PLUS = 1
    MINUS = -1

    def __str__(self) -> str:
        return "+" if self is Sign.PLUS else "-"

    @staticmethod
    def parse(text: str) -> Sign:
        if text in ("+", "⊕", "plus", "1"):
            return Sign.PLUS
        if text in ("-", "⊖", "minus", "-1"):
            return Sign.MINUS

        raise PreconditionError(f"Unknown sign '{text}'")


@dataclass(frozen=True, order=True)
class Permutation:
    """
    A permutation in one-line notation with 1-based values.

    Calling the permutation with a 1-based position returns its value,
    so `sigma(2)` is the second entry.
    """

    entries: tuple[int, ...]

    def __post_init__(self) -> None:
        entries = tuple(int(v) for v in self.entries)
        object.__setattr__(self, "entries", entries)
        if len(entries) == 0:
            raise PreconditionError("A permutation needs at least one entry")
        if sorted(entries) != list(range(1, len(entries) + 1)):
            raise PreconditionError(
                f"Entries {entries} are not a bijection of 1..{len(entries)}"
            )

    @classmethod
    def _trusted(cls, entries: tuple[int, ...]) -> Permutation:
        # Skip validation for entries built by an operation of this module
        obj = object.__new__(cls)
        object.__setattr__(obj, "entries", entries)
        return obj

    @classmethod
    def of(cls, *values: int) -> Permutation:
        return cls(tuple(values))

    @classmethod
    def identity(cls, n: int) -> Permutation:
        return cls._trusted(tuple(range(1, n + 1)))

    @classmethod
    def decreasing(cls, n: int) -> Permutation:
        return cls._trusted(tuple(range(n, 0, -1)))

    @classmethod
    def parse(cls, text: str) -> Permutation:
        """
        Parse one-line notation.

        Space or comma separated values are always accepted; a bare digit
        string such as "52413" is read one digit per entry.
        """
        cleaned = text.replace(",", " ").strip()
        if " " in cleaned:
            return cls(tuple(int(token) for token in cleaned.split()))
        if cleaned.isdigit():
            return cls(tuple(int(char) for char in cleaned))

        raise PreconditionError(f"Cannot parse permutation from '{text}'")

    @property
    def n(self) -> int:
        return len(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[int]:
        return iter(self.entries)

    def __call__(self, position: int) -> int:
        if not 1 <= position <= len(self.entries):
            raise PreconditionError(
                f"Position {position} outside 1..{len(self.entries)}"
            )
        return self.entries[position - 1]

    def __str__(self) -> str:
        return " ".join(str(v) for v in self.entries)

    def compact(self) -> str:
        # Digit-string form, only unambiguous below size 10
        if len(self.entries) >= 10:
            return str(self)
        return "".join(str(v) for v in self.entries)

    def inverse(self) -> Permutation:
        inv = [0] * len(self.entries)
        for position, value in enumerate(self.entries, start=1):
            inv[value - 1] = position
        return Permutation._trusted(tuple(inv))

    def reverse_complement(self) -> Permutation:
        n = len(self.entries)
        return Permutation._trusted(tuple(n + 1 - v for v in reversed(self.entries)))


###############################################################################


def standardize(values: Sequence[float]) -> Permutation:
    """Return the permutation order-isomorphic to a sequence of distinct values."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0] * len(values)
    for rank, index in enumerate(order, start=1):
        ranks[index] = rank

    return Permutation._trusted(tuple(ranks))


def pattern(sigma: Permutation, positions: Sequence[int]) -> Permutation:
    """
    Extract the pattern of sigma induced by a set of positions.

    Parameters
    ----------
    sigma : Permutation
        The host permutation.
    positions : Sequence[int]
        Strictly increasing 1-based positions of sigma.

    Returns
    -------
    Permutation
        The |positions|-permutation order-isomorphic to the subsequence.
    """
    if len(positions) == 0:
        raise PreconditionError("Cannot extract a pattern on an empty position set")
    if any(b <= a for a, b in itertools.pairwise(positions)):
        raise PreconditionError(f"Positions {tuple(positions)} are not increasing")
    if positions[0] < 1 or positions[-1] > len(sigma):
        raise PreconditionError(
            f"Positions {tuple(positions)} outside 1..{len(sigma)}"
        )

    return standardize([sigma.entries[i - 1] for i in positions])


def direct_sum(pi: Permutation, sigma: Permutation) -> Permutation:
    shift = len(pi)
    return Permutation._trusted(pi.entries + tuple(v + shift for v in sigma.entries))


def skew_sum(pi: Permutation, sigma: Permutation) -> Permutation:
    shift = len(sigma)
    return Permutation._trusted(tuple(v + shift for v in pi.entries) + sigma.entries)


def descents(sigma: Permutation) -> int:
    return sum(a > b for a, b in itertools.pairwise(sigma.entries))


@functools.lru_cache(maxsize=16)
def separable_permutations(n: int) -> tuple[Permutation, ...]:
    """All separable permutations of size n, in lexicographic order."""
    if n < 1:
        raise PreconditionError(f"n must be >= 1, got {n}")
    if n == 1:
        return (Permutation.identity(1),)

    found: set[Permutation] = set()
    for k in range(1, n):
        for left in separable_permutations(k):
            for right in separable_permutations(n - k):
                found.add(direct_sum(left, right))
                found.add(skew_sum(left, right))

    return tuple(sorted(found))


def remove_point(sigma: Permutation, position: int) -> Permutation:
    """Delete the point at a 1-based position and standardize the rest."""
    if len(sigma) < 2:
        raise PreconditionError("Cannot remove the only point of a permutation")
    if not 1 <= position <= len(sigma):
        raise PreconditionError(f"Position {position} outside 1..{len(sigma)}")

    removed = sigma.entries[position - 1]
    return Permutation._trusted(
        tuple(
            v - (v > removed)
            for i, v in enumerate(sigma.entries, start=1)
            if i != position
        )
    )


###############################################################################


def _contains_obstruction(sigma: Permutation, bound: int) -> bool:
    if len(sigma) > bound:
        raise SizeBoundError(
            f"Subset scan is limited to n <= {bound}, got n = {len(sigma)}"
        )

    entries = sigma.entries
    for quad in itertools.combinations(entries, 4):
        if standardize(quad).entries in _SEPARABILITY_OBSTRUCTIONS:
            return True

    return False


def _decomposes(sigma: Permutation) -> bool:
    # Blocks are (start, stop) slices whose values form a contiguous range;
    # each block is split at its leftmost valid boundary
    entries = sigma.entries
    stack = [(0, len(entries))]
    while stack:
        start, stop = stack.pop()
        if stop - start == 1:
            continue

        block_min = min(entries[start:stop])
        block_max = block_min + (stop - start) - 1
        prefix_min = prefix_max = entries[start]
        split = None
        for cut in range(start + 1, stop):
            if prefix_max - prefix_min == cut - start - 1 and (
                prefix_min == block_min or prefix_max == block_max
            ):
                split = cut
                break
            prefix_min = min(prefix_min, entries[cut])
            prefix_max = max(prefix_max, entries[cut])

        if split is None:
            return False

        stack.append((start, split))
        stack.append((split, stop))

    return True


def is_separable(
    sigma: Permutation,
    method: Literal["decomposition", "scan"] = "decomposition",
    scan_bound: int = _DEFAULT_SCAN_BOUND,
) -> bool:
    """
    Check whether sigma avoids both 3142 and 2413.

    Parameters
    ----------
    sigma : Permutation
        The permutation to check.
    method : Literal["decomposition", "scan"]
        "decomposition" attempts a separating-tree decomposition and works
        for every size; "scan" looks at every 4-subset of positions and is
        limited to `scan_bound`. Default: "decomposition"
    scan_bound : int
        Largest size accepted by the subset scan. Default: 50

    Returns
    -------
    bool
        True when sigma is separable.
    """
    if method == "scan":
        return not _contains_obstruction(sigma, scan_bound)
    if method == "decomposition":
        return _decomposes(sigma)

    raise PreconditionError(f"Unknown separability method '{method}'")


###############################################################################


def inversion_graph(sigma: Permutation) -> nx.Graph:
    """Graph on positions 1..n with an edge for every inverted pair."""
    graph = nx.Graph()
    graph.add_nodes_from(range(1, len(sigma) + 1))
    entries = sigma.entries
    graph.add_edges_from(
        (i + 1, j + 1)
        for i, j in itertools.combinations(range(len(entries)), 2)
        if entries[i] > entries[j]
    )
    return graph


def has_induced_p4(graph: nx.Graph, bound: int = _DEFAULT_P4_SCAN_BOUND) -> bool:
    if graph.number_of_nodes() > bound:
        raise SizeBoundError(
            f"Induced P4 scan is limited to {bound} vertices, "
            f"got {graph.number_of_nodes()}"
        )

    for quad in itertools.combinations(graph.nodes, 4):
        sub = graph.subgraph(quad)
        degrees = sorted(d for _, d in sub.degree)
        # Three edges with degrees 1, 1, 2, 2 only fit a path
        if sub.number_of_edges() == 3 and degrees == [1, 1, 2, 2]:
            return True

    return False


class CotreeKind(Enum):
    LEAF = "leaf"
    UNION = "union"
    JOIN = "join"


@dataclass(frozen=True)
class Cotree:
    kind: CotreeKind
    children: tuple[Cotree, ...] = ()
    vertex: object | None = None

    def union_count(self) -> int:
        """Number of union nodes in any binary refinement of this cotree."""
        own = len(self.children) - 1 if self.kind is CotreeKind.UNION else 0
        return own + sum(child.union_count() for child in self.children)

    def leaves(self) -> list[object]:
        if self.kind is CotreeKind.LEAF:
            return [self.vertex]
        return [v for child in self.children for v in child.leaves()]


def cotree(graph: nx.Graph) -> Cotree | None:
    """
    Recognize a cograph by recursive decomposition.

    Every induced subgraph of a cograph on two or more vertices is either
    disconnected or has a disconnected complement; the parts become the
    children of a union or join node respectively.

    Parameters
    ----------
    graph : nx.Graph
        The graph to decompose.

    Returns
    -------
    Cotree | None
        The canonical cotree, or None when the graph is not a cograph.
    """
    if graph.number_of_nodes() == 0:
        raise PreconditionError("Cannot build a cotree of an empty graph")
    if graph.number_of_nodes() == 1:
        return Cotree(CotreeKind.LEAF, vertex=next(iter(graph.nodes)))

    parts = list(nx.connected_components(graph))
    kind = CotreeKind.UNION
    if len(parts) == 1:
        parts = list(nx.connected_components(nx.complement(graph)))
        kind = CotreeKind.JOIN
        if len(parts) == 1:
            return None

    children = []
    for part in sorted(parts, key=min):
        child = cotree(graph.subgraph(part))
        if child is None:
            return None
        children.append(child)

    return Cotree(kind, tuple(children))


def is_cograph(graph: nx.Graph) -> bool:
    return cotree(graph) is not None


###############################################################################


def canonical_form(graph: nx.Graph, bound: int = _DEFAULT_CANONICAL_BOUND) -> str:
    """
    Canonical key of a small graph: the minimum upper-triangle adjacency
    string over all vertex orders, prefixed by the vertex count.
    """
    n = graph.number_of_nodes()
    if n > bound:
        raise SizeBoundError(f"Canonical forms are limited to n <= {bound}, got {n}")

    adjacency = nx.to_numpy_array(graph, nodelist=sorted(graph.nodes), dtype=bool)
    upper = np.triu_indices(n, k=1)
    best = None
    for order in itertools.permutations(range(n)):
        relabelled = adjacency[np.ix_(order, order)][upper]
        bits = "".join("1" if b else "0" for b in relabelled)
        if best is None or bits < best:
            best = bits

    return f"{n}|{best}"


def graph_from_canonical(key: str) -> nx.Graph:
    n_text, bits = key.split("|")
    n = int(n_text)
    graph = nx.Graph()
    graph.add_nodes_from(range(1, n + 1))
    pairs = zip(*np.triu_indices(n, k=1))
    graph.add_edges_from(
        (int(i) + 1, int(j) + 1) for (i, j), bit in zip(pairs, bits) if bit == "1"
    )
    return graph


def format_graph(graph: nx.Graph) -> str:
    lines = [str(graph.number_of_nodes())]
    lines.extend(f"{i} {j}" for i, j in sorted(tuple(sorted(e)) for e in graph.edges))
    return "\n".join(lines)


def parse_graph(text: str | Iterable[str]) -> nx.Graph:
    lines = text.splitlines() if isinstance(text, str) else list(text)
    lines = [line.strip() for line in lines if line.strip()]
    if not lines:
        raise PreconditionError("Empty graph description")

    graph = nx.Graph()
    graph.add_nodes_from(range(1, int(lines[0]) + 1))
    for line in lines[1:]:
        i, j = (int(token) for token in line.split())
        if i == j or not graph.has_node(i) or not graph.has_node(j):
            raise PreconditionError(f"Invalid edge line '{line}'")
        graph.add_edge(i, j)

    return graph
