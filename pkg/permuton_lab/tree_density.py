#!/usr/bin/env python

"""Increasing decorated binary trees and the closed-form pattern law."""

from __future__ import annotations

import itertools
import logging
from collections.abc import Callable, Hashable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial
from pathlib import Path
from typing import Union

import pandas as pd
import sympy

from .errors import PreconditionError, SizeBoundError, StructuralError
from .perm_core import (
    Permutation,
    Sign,
    descents,
    separable_permutations,
)

###############################################################################

log = logging.getLogger(__name__)

###############################################################################

_DEFAULT_EXACT_BOUND = 8
_DEFAULT_BRUTE_FORCE_BOUND = 6

Probability = Union[Fraction, sympy.Expr]

###############################################################################


@dataclass(eq=False)
class DecoratedTree:
    """
    Rooted binary tree with signed, labelled internal nodes.

    A node without children is a leaf. Internal nodes carry a sign and a
    label; in a history tree the labels are the sampler steps, so they
    increase along every root-to-leaf path.
    """

    sign: Sign | None = None
    label: int | None = None
    left: DecoratedTree | None = None
    right: DecoratedTree | None = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None and self.right is None

    def split(self, sign: Sign, label: int) -> tuple[DecoratedTree, DecoratedTree]:
        """Turn this leaf into an internal node with two new leaves."""
        if not self.is_leaf:
            raise StructuralError("Only a leaf can be split")

        self.sign = sign
        self.label = label
        self.left = DecoratedTree()
        self.right = DecoratedTree()
        return self.left, self.right

    def nodes(self) -> Iterator[DecoratedTree]:
        # Preorder, without recursion so deep caterpillars are fine
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            if node.right is not None:
                stack.append(node.right)
            if node.left is not None:
                stack.append(node.left)

    def leaves(self) -> list[DecoratedTree]:
        return [node for node in self.nodes() if node.is_leaf]

    def internal_nodes(self) -> list[DecoratedTree]:
        return [node for node in self.nodes() if not node.is_leaf]

    def sign_count(self, sign: Sign) -> int:
        return sum(node.sign is sign for node in self.internal_nodes())

    def copy(self) -> DecoratedTree:
        clone = DecoratedTree(sign=self.sign, label=self.label)
        stack = [(self, clone)]
        while stack:
            source, target = stack.pop()
            for side in ("left", "right"):
                child = getattr(source, side)
                if child is not None:
                    twin = DecoratedTree(sign=child.sign, label=child.label)
                    setattr(target, side, twin)
                    stack.append((child, twin))

        return clone

    def relabel(self, labels: Sequence[int]) -> DecoratedTree:
        """Copy of the tree with internal labels replaced in preorder."""
        clone = self.copy()
        internal = clone.internal_nodes()
        if len(labels) != len(internal):
            raise PreconditionError(
                f"Expected {len(internal)} labels, got {len(labels)}"
            )
        for node, label in zip(internal, labels):
            node.label = label

        return clone

    def validate(self) -> None:
        """
        Check the history-tree invariants.

        Raises
        ------
        StructuralError
            When a node has one child, an internal node lacks a sign, the
            labels are not a bijection with 1..k, or a label does not exceed
            its parent's.
        """
        seen: set[int] = set()
        labels = []
        stack: list[tuple[DecoratedTree, int]] = [(self, 0)]
        while stack:
            node, parent_label = stack.pop()
            if id(node) in seen:
                raise StructuralError("Tree shares a node between two parents")
            seen.add(id(node))

            if node.is_leaf:
                continue
            if node.left is None or node.right is None:
                raise StructuralError("Internal node with a single child")
            if node.sign is None or node.label is None:
                raise StructuralError("Internal node without sign or label")
            if node.label <= parent_label:
                raise StructuralError(
                    f"Label {node.label} does not exceed parent label {parent_label}"
                )

            labels.append(node.label)
            stack.append((node.left, node.label))
            stack.append((node.right, node.label))

        if sorted(labels) != list(range(1, len(labels) + 1)):
            raise StructuralError(f"Labels {sorted(labels)} are not 1..{len(labels)}")

    @classmethod
    def from_nested(cls, nested: tuple | None) -> DecoratedTree:
        """
        Build a tree from nested tuples `(sign, left, right)`, None for a
        leaf. Labels are assigned in breadth-first order, which is always an
        increasing labelling.
        """
        root = cls()
        queue = [(root, nested)]
        label = 0
        while queue:
            node, spec = queue.pop(0)
            if spec is None:
                continue

            sign, left_spec, right_spec = spec
            label += 1
            left, right = node.split(
                sign if isinstance(sign, Sign) else Sign.parse(sign), label
            )
            queue.append((left, left_spec))
            queue.append((right, right_spec))

        return root

    def to_nested(self) -> tuple | None:
        if self.is_leaf:
            return None
        assert self.left is not None and self.right is not None
        return (str(self.sign), self.left.to_nested(), self.right.to_nested())


# A history tree is a decorated tree grown online by the inflation chain
HistoryTree = DecoratedTree

###############################################################################


def perm_of_tree(tree: DecoratedTree) -> Permutation:
    """
    Evaluate a decorated tree: leaves are the permutation 1, internal nodes
    combine their children by direct (+) or skew (-) sum.

    Leaves give the positions from left to right. Their values come from a
    second walk that visits the children of a + node left first and those of
    a - node right first, so the whole evaluation is linear in the size.

    Parameters
    ----------
    tree : DecoratedTree
        The tree to evaluate. Internal labels are ignored.

    Returns
    -------
    Permutation
        The permutation encoded by the tree.
    """
    by_value: list[DecoratedTree] = []
    visited: set[int] = set()
    stack = [tree]
    while stack:
        node = stack.pop()
        if id(node) in visited:
            raise StructuralError("Tree shares a node between two parents")
        visited.add(id(node))
        if node.is_leaf:
            if node.sign is not None:
                raise StructuralError("Leaf carries a sign")
            by_value.append(node)
            continue
        if node.left is None or node.right is None or node.sign is None:
            raise StructuralError("Internal node with a missing child or sign")

        if node.sign is Sign.PLUS:
            stack.extend((node.right, node.left))
        else:
            stack.extend((node.left, node.right))

    values = {id(leaf): value for value, leaf in enumerate(by_value, start=1)}
    return Permutation._trusted(tuple(values[id(leaf)] for leaf in tree.leaves()))


def build_history_tree(steps: Sequence[tuple[int, Sign]]) -> DecoratedTree:
    """
    Grow a tree from a list of (leaf position, sign) steps; step t splits
    the leaf at the given 1-based left-to-right position and gets label t.
    """
    root = DecoratedTree()
    leaves = [root]
    for label, (position, sign) in enumerate(steps, start=1):
        if not 1 <= position <= len(leaves):
            raise PreconditionError(
                f"Step {label}: leaf position {position} outside 1..{len(leaves)}"
            )
        leaves[position - 1 : position] = leaves[position - 1].split(sign, label)

    return root


def enumerate_trees(
    n: int,
    bound: int = _DEFAULT_BRUTE_FORCE_BOUND,
) -> Iterator[DecoratedTree]:
    """All increasing decorated binary trees with n leaves."""
    if n > bound:
        raise SizeBoundError(f"Tree enumeration is limited to n <= {bound}, got {n}")

    # Step t chooses one of t leaves and one of two signs
    choices = [
        [(position, sign) for position in range(1, t + 1) for sign in Sign]
        for t in range(1, n)
    ]
    for steps in itertools.product(*choices):
        yield build_history_tree(steps)


###############################################################################


def _weight_table(entries: tuple[int, ...]) -> Fraction:
    # W[i][j] is the weighted count of trees for the block entries[i:j],
    # nonzero only when the block's values are contiguous
    n = len(entries)
    weights: dict[tuple[int, int], Fraction] = {}
    for i in range(n):
        weights[(i, i + 1)] = Fraction(1)

    for length in range(2, n + 1):
        for i in range(0, n - length + 1):
            j = i + length
            block = entries[i:j]
            if max(block) - min(block) != length - 1:
                weights[(i, j)] = Fraction(0)
                continue

            # Contiguous halves of a contiguous block always form a + or - split
            total = sum(
                (weights[(i, cut)] * weights[(cut, j)] for cut in range(i + 1, j)),
                Fraction(0),
            )
            weights[(i, j)] = total / (length - 1)

    return weights[(0, n)]


def count_inc_trees(pi: Permutation) -> int:
    """
    Number of increasing decorated binary trees evaluating to pi.

    Uses an interval dynamic program over weighted tree counts, where a tree
    with internal subtree sizes h_v has weight 1 / prod(h_v); by the
    hook-length formula the tree admits (n-1)! / prod(h_v) increasing
    labellings, so the count is (n-1)! times the total weight.

    Parameters
    ----------
    pi : Permutation
        The permutation to count trees for.

    Returns
    -------
    int
        N_inc(pi); 0 exactly when pi is not separable.
    """
    count = factorial(len(pi) - 1) * _weight_table(pi.entries)
    if count.denominator != 1:
        raise StructuralError(f"Non-integer tree count {count} for {pi}")

    return int(count)


def count_inc_trees_brute(
    pi: Permutation,
    bound: int = _DEFAULT_BRUTE_FORCE_BOUND,
) -> int:
    return sum(perm_of_tree(tree) == pi for tree in enumerate_trees(len(pi), bound))


###############################################################################


class ExactFields:
    pattern = "pattern"
    numerator = "numerator"
    denominator = "denominator"


ALL_EXACT_FIELDS = [
    field_value
    for field_name, field_value in vars(ExactFields).items()
    if not field_name.startswith("_")
]


@dataclass(frozen=True)
class ExactDist:
    """Finitely supported law with exact rational (or polynomial) masses."""

    size: int
    probs: Mapping[Hashable, Probability] = field(default_factory=dict)

    def __getitem__(self, key: Hashable) -> Probability:
        return self.probs.get(key, Fraction(0))

    def __len__(self) -> int:
        return len(self.probs)

    @property
    def symbolic(self) -> bool:
        return any(isinstance(v, sympy.Basic) for v in self.probs.values())

    def total(self) -> Probability:
        if self.symbolic:
            return sympy.expand(sum(self.probs.values(), sympy.Integer(0)))
        return sum(self.probs.values(), Fraction(0))

    def support(self) -> list[Hashable]:
        return sorted(key for key, value in self.probs.items() if value != 0)

    def pushforward(self, func: Callable[[Hashable], Hashable]) -> ExactDist:
        pushed: dict[Hashable, Probability] = {}
        for key, value in self.probs.items():
            image = func(key)
            pushed[image] = pushed.get(image, Fraction(0)) + value

        return ExactDist(self.size, pushed)

    def max_deviation(self, other: ExactDist) -> Probability:
        """Largest absolute difference over the union of both supports."""
        keys = set(self.probs) | set(other.probs)
        deviations = [abs(self[key] - other[key]) for key in keys]
        if self.symbolic or other.symbolic:
            return sympy.Max(*[sympy.expand(d) for d in deviations])
        return max(deviations, default=Fraction(0))

    def to_dataframe(self) -> pd.DataFrame:
        rows = []
        for key in sorted(self.probs):
            value = self.probs[key]
            if isinstance(value, sympy.Basic):
                numerator, denominator = sympy.fraction(sympy.together(value))
            else:
                numerator, denominator = value.numerator, value.denominator
            rows.append(
                {
                    ExactFields.pattern: str(key),
                    ExactFields.numerator: str(numerator),
                    ExactFields.denominator: str(denominator),
                }
            )

        return pd.DataFrame(rows, columns=ALL_EXACT_FIELDS)

    def to_csv(self, path: str | Path) -> None:
        self.to_dataframe().to_csv(path, index=False, lineterminator="\n")


def as_exact(p: float | Fraction | sympy.Expr) -> Fraction | sympy.Expr:
    """Coerce a probability to an exact rational, keeping symbols as they are."""
    if isinstance(p, sympy.Basic):
        return p
    if isinstance(p, float):
        # Decimal text, so 0.3 becomes 3/10 rather than its binary expansion
        exact = Fraction(repr(p))
    else:
        exact = Fraction(p)
    if not 0 < exact < 1:
        raise PreconditionError(f"p must lie in (0, 1), got {p}")

    return exact


def _sign_weight(
    n_inc: int,
    n: int,
    minus_count: int,
    p: Fraction | sympy.Expr,
) -> Probability:
    weight = Fraction(n_inc, factorial(n - 1))
    if isinstance(p, sympy.Basic):
        coefficient = sympy.Rational(weight.numerator, weight.denominator)
        return sympy.expand(
            coefficient * (1 - p) ** minus_count * p ** (n - 1 - minus_count)
        )

    return weight * (1 - p) ** minus_count * p ** (n - 1 - minus_count)


def exact_pattern_prob(
    pi: Permutation,
    p: float | Fraction | sympy.Expr,
) -> Probability:
    """
    Probability that the recursive separable permutation of size |pi| is pi.

    Parameters
    ----------
    pi : Permutation
        The target permutation.
    p : Fraction | sympy.Expr
        Probability of a + inflation. Floats are read as their decimal text;
        a sympy symbol gives a polynomial in p.

    Returns
    -------
    Fraction | sympy.Expr
        N_inc(pi) / (n-1)! * (1-p)^des(pi) * p^(n-1-des(pi)).
    """
    exact = as_exact(p)
    n_inc = count_inc_trees(pi)
    if n_inc == 0:
        return sympy.Integer(0) if isinstance(exact, sympy.Basic) else Fraction(0)

    return _sign_weight(n_inc, len(pi), descents(pi), exact)


def exact_distribution(
    n: int,
    p: float | Fraction | sympy.Expr | None = None,
    bound: int = _DEFAULT_EXACT_BOUND,
) -> ExactDist:
    """
    Exact law of the recursive separable permutation of size n.

    Parameters
    ----------
    n : int
        Permutation size.
    p : Fraction | sympy.Expr, optional
        Probability of a + inflation; None selects the symbolic mode with
        masses given as polynomials in a sympy symbol `p`.
    bound : int, optional
        Largest accepted size, by default 8

    Returns
    -------
    ExactDist
        Masses for every separable permutation of size n.
    """
    if n < 1:
        raise PreconditionError(f"n must be >= 1, got {n}")
    if n > bound:
        raise SizeBoundError(f"Exact distribution is limited to n <= {bound}, got {n}")

    exact = sympy.Symbol("p") if p is None else as_exact(p)
    log.debug(f"Computing exact distribution for n={n}, p={exact}")
    return ExactDist(
        n,
        {pi: exact_pattern_prob(pi, exact) for pi in separable_permutations(n)},
    )


def descent_law(n: int, p: float | Fraction | sympy.Expr) -> ExactDist:
    """Binomial(n-1, 1-p) law of the number of descents."""
    if n < 1:
        raise PreconditionError(f"n must be >= 1, got {n}")

    exact = as_exact(p)
    probs: dict[Hashable, Probability] = {
        d: comb(n - 1, d) * (1 - exact) ** d * exact ** (n - 1 - d) for d in range(n)
    }
    return ExactDist(n, probs)
