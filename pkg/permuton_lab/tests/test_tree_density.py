#!/usr/bin/env python

import itertools
from collections import Counter
from fractions import Fraction

import pytest
import sympy

from permuton_lab.errors import PreconditionError, SizeBoundError, StructuralError
from permuton_lab.perm_core import Permutation, Sign, descents, separable_permutations
from permuton_lab.samplers.base import path_rng
from permuton_lab.tree_density import (
    ALL_EXACT_FIELDS,
    DecoratedTree,
    as_exact,
    build_history_tree,
    count_inc_trees,
    count_inc_trees_brute,
    descent_law,
    enumerate_trees,
    exact_distribution,
    exact_pattern_prob,
    perm_of_tree,
)

from .utils import assert_exact_dist_basics

###############################################################################


def test_perm_of_tree() -> None:
    # Get data
    tree = DecoratedTree.from_nested(("+", None, ("-", None, None)))

    # Run tests
    tree.validate()
    assert perm_of_tree(tree) == Permutation.parse("132")
    assert perm_of_tree(DecoratedTree()) == Permutation.identity(1)
    assert tree.to_nested() == ("+", None, ("-", None, None))
    assert tree.sign_count(Sign.MINUS) == 1


def test_build_history_tree() -> None:
    # Split the root with -, then the right leaf with +
    tree = build_history_tree([(1, Sign.MINUS), (2, Sign.PLUS)])

    # Run tests
    tree.validate()
    assert perm_of_tree(tree) == Permutation.parse("312")
    assert [node.label for node in tree.internal_nodes()] == [1, 2]
    with pytest.raises(PreconditionError):
        build_history_tree([(2, Sign.PLUS)])


def test_validate_rejects_bad_labels() -> None:
    # Get data
    tree = DecoratedTree.from_nested(("+", ("+", None, None), None))

    # Run tests
    with pytest.raises(StructuralError):
        tree.relabel([2, 1]).validate()
    with pytest.raises(StructuralError):
        tree.relabel([1, 3]).validate()
    with pytest.raises(StructuralError):
        DecoratedTree(left=DecoratedTree()).validate()


def test_count_inc_trees_small() -> None:
    # Run tests
    assert count_inc_trees(Permutation.identity(1)) == 1
    assert count_inc_trees(Permutation.parse("12")) == 1
    assert count_inc_trees(Permutation.parse("123")) == 2
    assert count_inc_trees(Permutation.parse("132")) == 1
    assert count_inc_trees(Permutation.parse("2413")) == 0
    assert count_inc_trees(Permutation.parse("3142")) == 0


def test_count_inc_trees_matches_enumeration() -> None:
    # Get data
    n = 5
    counts = Counter(perm_of_tree(tree) for tree in enumerate_trees(n))

    # Run tests
    assert sum(counts.values()) == 4 * 3 * 2 * 2**4
    for entries in itertools.permutations(range(1, n + 1)):
        pi = Permutation(entries)
        assert count_inc_trees(pi) == counts.get(pi, 0)

    assert count_inc_trees_brute(Permutation.parse("2143")) == count_inc_trees(
        Permutation.parse("2143")
    )
    with pytest.raises(SizeBoundError):
        next(enumerate_trees(7))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_count_inc_trees_reverse_complement(n: int) -> None:
    # Run tests
    for pi in separable_permutations(n):
        assert count_inc_trees(pi.reverse_complement()) == count_inc_trees(pi)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_minus_nodes_count_descents(n: int) -> None:
    # Run tests
    for tree in enumerate_trees(n):
        assert tree.sign_count(Sign.MINUS) == descents(perm_of_tree(tree))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_minus_nodes_count_descents_on_histories(seed: int) -> None:
    # Get data
    rng = path_rng(seed)
    trees = []
    for n in (10, 50, 200):
        positions = [int(rng.integers(1, t + 1)) for t in range(1, n)]
        signs = [Sign.PLUS if rng.random() < 0.3 else Sign.MINUS for _ in positions]
        trees.append(build_history_tree(list(zip(positions, signs))))

    # Run tests
    for tree in trees:
        tree.validate()
        assert tree.sign_count(Sign.MINUS) == descents(perm_of_tree(tree))


def test_exact_pattern_prob() -> None:
    # Get data
    third = Fraction(1, 3)

    # Run tests
    assert exact_pattern_prob(Permutation.parse("123"), third) == Fraction(1, 9)
    assert exact_pattern_prob(Permutation.parse("12"), third) == third
    assert exact_pattern_prob(Permutation.parse("21"), third) == Fraction(2, 3)
    assert exact_pattern_prob(Permutation.parse("2413"), third) == 0


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6, 7])
@pytest.mark.parametrize(
    "p", [Fraction(1, 2), Fraction(1, 3), Fraction(3, 4), Fraction(4, 5)]
)
def test_exact_distribution(n: int, p: Fraction) -> None:
    # Get data
    dist = exact_distribution(n, p)

    # Run tests
    assert_exact_dist_basics(dist)
    assert len(dist) == [1, 2, 6, 22, 90, 394, 1806][n - 1]
    assert dist.pushforward(descents).max_deviation(descent_law(n, p)) == 0


def test_exact_distribution_symbolic() -> None:
    # Get data
    dist = exact_distribution(3)
    p = sympy.Symbol("p")

    # Run tests
    assert dist.symbolic
    assert dist.total() == 1
    assert sympy.expand(dist[Permutation.parse("123")] - p**2) == 0
    assert dist[Permutation.parse("123")].subs(p, sympy.Rational(1, 3)) == (
        sympy.Rational(1, 9)
    )


def test_exact_distribution_bounds() -> None:
    # Run tests
    with pytest.raises(SizeBoundError):
        exact_distribution(9, Fraction(1, 2))
    with pytest.raises(PreconditionError):
        exact_distribution(0, Fraction(1, 2))
    with pytest.raises(PreconditionError):
        exact_distribution(3, Fraction(1))


def test_as_exact() -> None:
    # Run tests
    assert as_exact(0.3) == Fraction(3, 10)
    assert as_exact(Fraction(2, 7)) == Fraction(2, 7)
    with pytest.raises(PreconditionError):
        as_exact(0.0)


def test_exact_dist_dataframe() -> None:
    # Get data
    df = exact_distribution(2, Fraction(1, 3)).to_dataframe()

    # Run tests
    assert list(df.columns) == ALL_EXACT_FIELDS
    assert df.to_dict("records") == [
        {"pattern": "1 2", "numerator": "1", "denominator": "3"},
        {"pattern": "2 1", "numerator": "2", "denominator": "3"},
    ]
