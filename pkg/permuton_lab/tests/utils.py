#!/usr/bin/env python

from __future__ import annotations

from fractions import Fraction
from typing import TYPE_CHECKING

import numpy as np

from permuton_lab.perm_core import is_separable
from permuton_lab.samplers.base import ALL_SAMPLE_FIELDS

if TYPE_CHECKING:
    import pandas as pd

    from permuton_lab.permuton_ops import GridMeasure
    from permuton_lab.tree_density import ExactDist

###############################################################################


def assert_exact_dist_basics(dist: ExactDist) -> None:
    # Masses are exact and the law is a probability
    assert all(isinstance(value, Fraction) for value in dist.probs.values())
    assert all(value >= 0 for value in dist.probs.values())
    assert dist.total() == 1

    # All mass sits on separable permutations of the right size
    for pi in dist.support():
        assert len(pi) == dist.size
        assert is_separable(pi)


def assert_permuton_grid(grid: GridMeasure, tol: float = 1e-9) -> None:
    assert grid.mass.shape == (grid.k, grid.k)
    assert np.all(grid.mass >= 0)
    assert abs(grid.mass.sum() - 1) < 1e-9
    assert grid.marginal_error() < tol


def assert_sample_frame_basics(df: pd.DataFrame, count: int, n: int) -> None:
    # Assert that not only are all required fields present,
    # but that no extraneous fields are present as well
    assert set(df.columns) == set(ALL_SAMPLE_FIELDS)

    # One row per path, in path order
    assert len(df) == count
    assert list(df["index"]) == list(range(count))

    # Every permutation has the requested size
    assert all(len(pi) == n for pi in df["permutation"])
