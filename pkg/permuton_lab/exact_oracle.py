#!/usr/bin/env python

"""
Brute-force ground truth for the recursive separable laws.

Every law here is obtained by pushing exact rational weights through the
state lattice of a chain, never through a closed formula, so the results
can be compared entrywise with the formulas of `tree_density`.
"""

from __future__ import annotations

import functools
import itertools
import logging
from collections.abc import Hashable
from fractions import Fraction
from math import factorial

import networkx as nx
import sympy

from .errors import PreconditionError, SizeBoundError
from .perm_core import (
    Permutation,
    Sign,
    canonical_form,
    cotree,
    direct_sum,
    graph_from_canonical,
    inversion_graph,
    remove_point,
    separable_permutations,
    skew_sum,
)
from .samplers.chain import inflate_at_value
from .tree_density import ExactDist, Probability, as_exact, enumerate_trees

###############################################################################

log = logging.getLogger(__name__)

###############################################################################

_DEFAULT_ENUMERATION_BOUND = 8
_DEFAULT_SELF_SIMILARITY_BOUND = 7
_DEFAULT_COGRAPH_BOUND = 6
_DEFAULT_SPLIT_BOUND = 7

_ONE = Permutation.identity(1)
_SINGLE_VERTEX = "1|"

###############################################################################


def _check_size(n: int, bound: int, what: str) -> None:
    if n < 1:
        raise PreconditionError(f"n must be >= 1, got {n}")
    if n > bound:
        raise SizeBoundError(f"{what} is limited to n <= {bound}, got {n}")


def _zero(p: Probability) -> Probability:
    return sympy.Integer(0) if isinstance(p, sympy.Basic) else Fraction(0)


def _sign_probs(p: Probability) -> dict[Sign, Probability]:
    return {Sign.PLUS: p, Sign.MINUS: 1 - p}


def _expanded(probs: dict[Hashable, Probability]) -> dict[Hashable, Probability]:
    return {
        key: sympy.expand(value) if isinstance(value, sympy.Basic) else value
        for key, value in probs.items()
    }


###############################################################################


def enumerate_law(
    n: int,
    p: float | Fraction | sympy.Expr,
    bound: int = _DEFAULT_ENUMERATION_BOUND,
) -> ExactDist:
    """
    Exact law of the inflation chain at size n.

    Probability is pushed through the lattice of reachable permutations one
    step at a time: from size k, each of the k values is inflated with
    weight 1/k, with sign + of weight p and sign - of weight 1 - p. Summing
    over the lattice is the same as summing the weights of all
    (n-1)! 2^(n-1) trajectories.

    Parameters
    ----------
    n : int
        Permutation size.
    p : Fraction | sympy.Expr
        Probability of a + inflation.
    bound : int, optional
        Largest accepted size, by default 8

    Returns
    -------
    ExactDist
        The law of the chain at size n.
    """
    _check_size(n, bound, "Chain enumeration")

    exact = as_exact(p)
    signs = _sign_probs(exact)
    law: dict[Hashable, Probability] = {_ONE: Fraction(1)}
    for size in range(1, n):
        step: dict[Hashable, Probability] = {}
        for tau, weight in law.items():
            for j, (sign, sign_prob) in itertools.product(
                range(1, size + 1), signs.items()
            ):
                child = inflate_at_value(tau, j, sign)
                share = weight * sign_prob / size
                step[child] = step.get(child, _zero(exact)) + share
        law = _expanded(step)
        log.debug(f"Chain lattice at size {size + 1} has {len(law)} states")

    return ExactDist(n, law)


@functools.lru_cache(maxsize=None)
def _cached_law(n: int, p: Fraction) -> ExactDist:
    return enumerate_law(n, p)


def _law(n: int, p: Fraction | sympy.Expr) -> ExactDist:
    if isinstance(p, sympy.Basic):
        return enumerate_law(n, p)
    return _cached_law(n, p)


def check_consistency(
    n: int,
    p: float | Fraction | sympy.Expr,
    bound: int = _DEFAULT_ENUMERATION_BOUND,
) -> Probability:
    """
    Largest gap between the law at size n and the law at size n + 1 with a
    uniformly random point removed.
    """
    _check_size(n + 1, bound, "Consistency check")

    exact = as_exact(p)
    reduced: dict[Hashable, Probability] = {}
    for sigma, weight in _law(n + 1, exact).probs.items():
        for position in range(1, n + 2):
            tau = remove_point(sigma, position)
            reduced[tau] = reduced.get(tau, _zero(exact)) + weight / (n + 1)

    return ExactDist(n, _expanded(reduced)).max_deviation(_law(n, exact))


def split_size_law(
    n: int,
    p: float | Fraction | sympy.Expr,
    bound: int = _DEFAULT_SPLIT_BOUND,
) -> ExactDist:
    """
    Law of the size of the left block of the root split at size n, given
    that the first inflation is + (the chain passes through 12).

    Every trajectory of the chain is replayed as a history tree with weight
    p^(+ steps) (1-p)^(- steps) / (n-1)!. The weights of the trees with a +
    root are grouped by the number of leaves under the root's left child
    and normalized.
    """
    if n < 2:
        raise PreconditionError(f"A root split needs n >= 2, got {n}")
    _check_size(n, bound, "Split size law")

    exact = as_exact(p)
    symbolic = isinstance(exact, sympy.Basic)
    path_weight = (
        sympy.Rational(1, factorial(n - 1))
        if symbolic
        else Fraction(1, factorial(n - 1))
    )

    law: dict[Hashable, Probability] = {}
    for tree in enumerate_trees(n, bound=bound):
        if tree.sign is not Sign.PLUS or tree.left is None:
            continue
        plus = tree.sign_count(Sign.PLUS)
        weight = path_weight * exact**plus * (1 - exact) ** (n - 1 - plus)
        left = len(tree.left.leaves())
        law[left] = law.get(left, _zero(exact)) + weight

    total = sum(law.values(), _zero(exact))
    conditioned = {
        left: sympy.cancel(weight / total) if symbolic else weight / total
        for left, weight in law.items()
    }
    return ExactDist(n, conditioned)


def check_self_similarity(
    n: int,
    p: float | Fraction | sympy.Expr,
    bound: int = _DEFAULT_SELF_SIMILARITY_BOUND,
) -> Probability:
    """
    Largest gap between the law at size n and the mixture
    p Law(tau_I + rho_(n-I)) + (1-p) Law(tau_I - rho_(n-I)), with I uniform
    on 1..n-1 and independent copies tau, rho.
    """
    if n < 2:
        raise PreconditionError(f"The split mixture needs n >= 2, got {n}")
    _check_size(n, bound, "Self-similarity check")

    exact = as_exact(p)
    mixture: dict[Hashable, Probability] = {}
    for left in range(1, n):
        right_law = _law(n - left, exact)
        for (tau, a), (rho, b) in itertools.product(
            _law(left, exact).probs.items(), right_law.probs.items()
        ):
            weight = a * b / (n - 1)
            plus = direct_sum(tau, rho)
            minus = skew_sum(tau, rho)
            mixture[plus] = mixture.get(plus, _zero(exact)) + exact * weight
            mixture[minus] = mixture.get(minus, _zero(exact)) + (1 - exact) * weight

    return ExactDist(n, _expanded(mixture)).max_deviation(_law(n, exact))


###############################################################################


def _twin(key: str, vertex: int, joined: bool) -> str:
    graph = graph_from_canonical(key)
    twin = graph.number_of_nodes() + 1
    graph.add_edges_from((twin, w) for w in list(graph.neighbors(vertex)))
    graph.add_node(twin)
    if joined:
        graph.add_edge(vertex, twin)
    return canonical_form(graph)


def cograph_chain_law(
    n: int,
    p: float | Fraction | sympy.Expr,
    bound: int = _DEFAULT_COGRAPH_BOUND,
) -> ExactDist:
    """
    Exact law of the vertex-duplication chain at n vertices, keyed by
    canonical form.

    Each step picks one of the k vertices with weight 1/k and adds a twin,
    left unconnected to it with weight p and joined to it with weight 1 - p.
    """
    _check_size(n, bound, "Cograph chain enumeration")

    exact = as_exact(p)
    law: dict[Hashable, Probability] = {_SINGLE_VERTEX: Fraction(1)}
    for size in range(1, n):
        step: dict[Hashable, Probability] = {}
        for key, weight in law.items():
            for vertex in range(1, size + 1):
                for joined, link_prob in ((False, exact), (True, 1 - exact)):
                    child = _twin(str(key), vertex, joined)
                    share = weight * link_prob / size
                    step[child] = step.get(child, _zero(exact)) + share
        law = _expanded(step)

    return ExactDist(n, law)


def cograph_law(
    n: int,
    p: float | Fraction | sympy.Expr,
    bound: int = _DEFAULT_COGRAPH_BOUND,
) -> ExactDist:
    """Law of the inversion graph of the size-n permutation, by canonical form."""
    _check_size(n, bound, "Cograph law")

    return _law(n, as_exact(p)).pushforward(
        lambda sigma: canonical_form(inversion_graph(sigma))  # type: ignore[arg-type]
    )


def _parts(graph: nx.Graph) -> list[set]:
    parts = list(nx.connected_components(graph))
    if len(parts) == 1:
        parts = list(nx.connected_components(nx.complement(graph)))
    return parts


@functools.lru_cache(maxsize=None)
def _cotree_weight(key: str) -> Fraction:
    # Total of 1 / prod(subtree sizes) over plane binary cotrees of the graph
    graph = graph_from_canonical(key)
    n = graph.number_of_nodes()
    if n == 1:
        return Fraction(1)

    # Group isomorphic parts so every split is counted once up to isomorphism
    classes: dict[str, list[set]] = {}
    for part in _parts(graph):
        classes.setdefault(canonical_form(graph.subgraph(part)), []).append(part)
    groups = list(classes.values())

    total = Fraction(0)
    for counts in itertools.product(*(range(len(g) + 1) for g in groups)):
        chosen = [v for g, c in zip(groups, counts) for part in g[:c] for v in part]
        if len(chosen) in (0, n):
            continue

        rest = set(graph.nodes) - set(chosen)
        left = canonical_form(graph.subgraph(chosen))
        right = canonical_form(graph.subgraph(rest))
        total += _cotree_weight(left) * _cotree_weight(right)

    return total / (n - 1)


def count_inc_cotrees(graph: nx.Graph) -> int:
    """
    Number of increasing plane binary cotrees encoding the cograph.

    Parameters
    ----------
    graph : nx.Graph
        A cograph with at most 8 vertices.

    Returns
    -------
    int
        N_inc of the graph; 0 when the graph is not a cograph.
    """
    if cotree(graph) is None:
        return 0

    n = graph.number_of_nodes()
    return int(factorial(n - 1) * _cotree_weight(canonical_form(graph)))


def cograph_formula_law(
    n: int,
    p: float | Fraction | sympy.Expr,
    bound: int = _DEFAULT_COGRAPH_BOUND,
) -> ExactDist:
    """
    Cograph law from the closed form N_inc(H) / (n-1)! p^Z(H) (1-p)^(n-1-Z(H)),
    with Z(H) the number of union nodes of any binary cotree of H.
    """
    _check_size(n, bound, "Cograph formula law")

    exact = as_exact(p)
    keys = {canonical_form(inversion_graph(pi)) for pi in separable_permutations(n)}
    probs: dict[Hashable, Probability] = {}
    for key in sorted(keys):
        graph = graph_from_canonical(key)
        tree = cotree(graph)
        assert tree is not None
        unions = tree.union_count()
        weight = Fraction(count_inc_cotrees(graph), factorial(n - 1))
        probs[key] = weight * exact**unions * (1 - exact) ** (n - 1 - unions)

    return ExactDist(n, _expanded(probs))


def check_cograph_agreement(
    n: int,
    p: float | Fraction | sympy.Expr,
    bound: int = _DEFAULT_COGRAPH_BOUND,
) -> Probability:
    """Largest pairwise gap between the chain, pushforward and formula laws."""
    chain = cograph_chain_law(n, p, bound)
    pushed = cograph_law(n, p, bound)
    formula = cograph_formula_law(n, p, bound)
    gaps = [
        chain.max_deviation(pushed),
        chain.max_deviation(formula),
        pushed.max_deviation(formula),
    ]
    if any(isinstance(gap, sympy.Basic) for gap in gaps):
        return sympy.Max(*gaps)
    return max(gaps)


def _glue(left: str, right: str, joined: bool) -> str:
    graph = nx.disjoint_union(graph_from_canonical(left), graph_from_canonical(right))
    if joined:
        size = graph_from_canonical(left).number_of_nodes()
        graph.add_edges_from(
            (v, w)
            for v in range(size)
            for w in range(size, graph.number_of_nodes())
        )
    return canonical_form(graph)


def check_cograph_self_similarity(
    n: int,
    p: float | Fraction | sympy.Expr,
    bound: int = _DEFAULT_COGRAPH_BOUND,
) -> Probability:
    """
    Largest gap between the cograph law at size n and the mixture gluing
    independent copies of sizes I and n - I, I uniform on 1..n-1, by a
    disjoint union with probability p or a join with probability 1 - p.
    """
    if n < 2:
        raise PreconditionError(f"The split mixture needs n >= 2, got {n}")
    _check_size(n, bound, "Cograph self-similarity check")

    exact = as_exact(p)
    mixture: dict[Hashable, Probability] = {}
    for left in range(1, n):
        left_law = cograph_chain_law(left, exact, bound)
        right_law = cograph_chain_law(n - left, exact, bound)
        for (g, a), (h, b) in itertools.product(
            left_law.probs.items(), right_law.probs.items()
        ):
            weight = a * b / (n - 1)
            for joined, link_prob in ((False, exact), (True, 1 - exact)):
                key = _glue(str(g), str(h), joined)
                mixture[key] = mixture.get(key, _zero(exact)) + link_prob * weight

    target = cograph_chain_law(n, exact, bound)
    return ExactDist(n, _expanded(mixture)).max_deviation(target)
