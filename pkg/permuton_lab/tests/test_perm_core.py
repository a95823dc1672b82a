#!/usr/bin/env python

import itertools

import networkx as nx
import pytest

from permuton_lab.errors import PreconditionError, SizeBoundError
from permuton_lab.perm_core import (
    CotreeKind,
    Permutation,
    Sign,
    canonical_form,
    cotree,
    descents,
    direct_sum,
    format_graph,
    graph_from_canonical,
    has_induced_p4,
    inversion_graph,
    is_cograph,
    is_separable,
    parse_graph,
    pattern,
    remove_point,
    separable_permutations,
    skew_sum,
)

###############################################################################


def test_parse_and_format() -> None:
    # Get data
    sigma = Permutation.parse("52413")

    # Run tests
    assert sigma.entries == (5, 2, 4, 1, 3)
    assert Permutation.parse("5, 2, 4, 1, 3") == sigma
    assert str(sigma) == "5 2 4 1 3"
    assert sigma.compact() == "52413"
    assert sigma(1) == 5
    assert Sign.parse("⊖") is Sign.MINUS
    with pytest.raises(PreconditionError):
        Permutation.of(1, 1)
    with pytest.raises(PreconditionError):
        Permutation.parse("abc")


def test_pattern_extraction() -> None:
    # Get data
    sigma = Permutation.parse("52413")

    # Run tests
    assert pattern(sigma, [1, 3, 5]) == Permutation.parse("312")
    assert pattern(sigma, [2, 4]) == Permutation.parse("21")
    with pytest.raises(PreconditionError):
        pattern(sigma, [3, 2])
    with pytest.raises(PreconditionError):
        pattern(sigma, [])


def test_sums_and_descents() -> None:
    # Get data
    left = Permutation.parse("21")
    right = Permutation.parse("132")

    # Run tests
    assert direct_sum(left, right) == Permutation.parse("21354")
    assert skew_sum(left, right) == Permutation.parse("54132")
    assert descents(Permutation.parse("2413")) == 1
    assert descents(Permutation.identity(5)) == 0
    assert descents(Permutation.decreasing(5)) == 4


@pytest.mark.parametrize("sizes", [(1, 1), (1, 3), (2, 2), (3, 2), (4, 3)])
def test_sums_of_separable_permutations(sizes: tuple[int, int]) -> None:
    # Get data
    obstruction = Permutation.parse("2413")
    pairs = itertools.product(
        separable_permutations(sizes[0]), separable_permutations(sizes[1])
    )

    # Run tests
    for pi, sigma in pairs:
        plus = direct_sum(pi, sigma)
        minus = skew_sum(pi, sigma)
        assert descents(plus) == descents(pi) + descents(sigma)
        assert descents(minus) == descents(pi) + descents(sigma) + 1
        assert is_separable(plus) and is_separable(minus)
        assert not is_separable(direct_sum(pi, obstruction))
        assert not is_separable(skew_sum(obstruction, sigma))


def test_inverse_and_reverse_complement() -> None:
    # Get data
    sigma = Permutation.parse("2413")

    # Run tests
    assert sigma.inverse() == Permutation.parse("3142")
    assert sigma.reverse_complement() == Permutation.parse("2413")
    assert Permutation.parse("3142").reverse_complement() == Permutation.parse("3142")


def test_remove_point() -> None:
    # Get data
    sigma = Permutation.parse("2413")

    # Run tests
    assert remove_point(sigma, 1) == Permutation.parse("312")
    assert remove_point(sigma, 4) == Permutation.parse("231")
    with pytest.raises(PreconditionError):
        remove_point(Permutation.identity(1), 1)


def test_separability() -> None:
    # Run tests
    assert is_separable(Permutation.parse("1"))
    assert is_separable(Permutation.parse("2143"))
    assert not is_separable(Permutation.parse("2413"))
    assert not is_separable(Permutation.parse("3142"))
    assert not is_separable(Permutation.parse("25314"))

    # Both methods agree on every permutation of size 6
    for entries in itertools.permutations(range(1, 7)):
        sigma = Permutation(entries)
        assert is_separable(sigma) == is_separable(sigma, method="scan")

    with pytest.raises(SizeBoundError):
        is_separable(Permutation.identity(60), method="scan")


def test_separable_counts() -> None:
    # Large Schroeder numbers
    for n, count in zip(range(1, 8), [1, 2, 6, 22, 90, 394, 1806]):
        assert len(separable_permutations(n)) == count


def test_inversion_graph() -> None:
    # Get data
    graph = inversion_graph(Permutation.parse("2413"))

    # Run tests
    assert sorted(graph.nodes) == [1, 2, 3, 4]
    assert sorted(tuple(sorted(e)) for e in graph.edges) == [(1, 3), (2, 3), (2, 4)]
    assert has_induced_p4(graph)
    assert not is_cograph(graph)


def test_cotree_recognition() -> None:
    # Get data
    graph = inversion_graph(Permutation.parse("21354"))
    tree = cotree(graph)

    # Run tests
    assert tree is not None
    assert tree.kind is CotreeKind.UNION
    assert sorted(tree.leaves()) == [1, 2, 3, 4, 5]
    # Three blocks 21, 3, 54 joined by two unions
    assert tree.union_count() == 2
    assert cotree(nx.path_graph(4)) is None

    # Cographs are exactly the P4-free graphs
    for sigma in itertools.permutations(range(1, 6)):
        g = inversion_graph(Permutation(sigma))
        assert is_cograph(g) == (not has_induced_p4(g))


def test_canonical_form() -> None:
    # Get data
    path = nx.Graph([(1, 2), (2, 3)])
    relabelled = nx.Graph([(1, 3), (3, 2)])

    # Run tests
    assert canonical_form(path) == canonical_form(relabelled)
    assert canonical_form(path) != canonical_form(nx.complete_graph(3))
    key = canonical_form(path)
    assert canonical_form(graph_from_canonical(key)) == key
    with pytest.raises(SizeBoundError):
        canonical_form(nx.empty_graph(9))


def test_graph_text_format() -> None:
    # Get data
    graph = inversion_graph(Permutation.parse("321"))
    text = format_graph(graph)

    # Run tests
    assert text == "3\n1 2\n1 3\n2 3"
    assert nx.utils.graphs_equal(parse_graph(text), graph)
    with pytest.raises(PreconditionError):
        parse_graph("2\n1 1")
