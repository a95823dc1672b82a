#!/usr/bin/env python

import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from permuton_lab.errors import (
    PreconditionError,
    ResolutionMismatchError,
    SizeBoundError,
    StructuralError,
)
from permuton_lab.perm_core import Permutation, Sign, direct_sum, skew_sum
from permuton_lab.permuton_ops import (
    GridMeasure,
    PushforwardPermuton,
    StepFunction,
    compose,
    exact_sample_law,
    f_of_perm,
    grid_of_pushforward,
    kolmogorov_to_uniform,
    l1_cells,
    l1_distance,
    permuton_of_perm,
    phi_p_contraction,
    phi_p_permuton,
    sample_pattern,
    sample_patterns,
    w1_grid,
)
from permuton_lab.samplers.base import frequencies, path_rng, tv_distance

from .utils import assert_permuton_grid

###############################################################################


def test_step_function() -> None:
    # Get data
    f = StepFunction(np.array([0.0, 0.25, 1.0]), np.array([0.75, 0.0]))

    # Run tests
    assert f(0.1) == 0.75
    assert f(0.25) == 0.0
    assert f(1.0) == 0.0
    np.testing.assert_allclose(f(np.array([0.0, 0.5])), [0.75, 0.0])
    np.testing.assert_allclose(f.lengths, [0.25, 0.75])
    with pytest.raises(StructuralError):
        StepFunction(np.array([0.0, 1.0]), np.array([0.1, 0.2]))
    with pytest.raises(StructuralError):
        StepFunction(np.array([0.1, 1.0]), np.array([0.1]))


def test_grid_measure_validation(tmp_path: Path) -> None:
    # Get data
    grid = GridMeasure.uniform(3)
    path = tmp_path / "grid.csv"
    grid.to_csv(path)

    # Run tests
    assert_permuton_grid(grid)
    np.testing.assert_allclose(GridMeasure.read_csv(path).mass, grid.mass)
    assert path.read_text().startswith("# k=3,")
    with pytest.raises(StructuralError):
        GridMeasure(np.full((2, 3), 1 / 6))
    with pytest.raises(StructuralError):
        GridMeasure(np.array([[1.5, 0.0], [0.0, -0.5]]))
    with pytest.raises(StructuralError):
        GridMeasure(np.full((2, 2), 0.5))


@pytest.mark.parametrize("k", [3, 4, 7, 12])
def test_permuton_of_perm(k: int) -> None:
    # Get data
    pi = Permutation.parse("2413")
    grid = permuton_of_perm(pi, k)

    # Run tests
    assert_permuton_grid(grid)


def test_permuton_of_perm_exact_resolution() -> None:
    # Get data
    pi = Permutation.parse("3142")
    grid = permuton_of_perm(pi, 4)

    # Run tests
    expected = np.zeros((4, 4))
    for i, value in enumerate(pi.entries):
        expected[i, value - 1] = 0.25
    np.testing.assert_allclose(grid.mass, expected)
    np.testing.assert_allclose(
        grid_of_pushforward(f_of_perm(pi), 4).mass, expected, atol=1e-15
    )


def test_pushforward_of_perm() -> None:
    # Get data
    pi = Permutation.parse("52413")
    push = PushforwardPermuton(f_of_perm(pi))

    # Run tests
    assert push.measure_preservation_gap() == pytest.approx(1 / 5)
    assert kolmogorov_to_uniform(f_of_perm(Permutation.identity(8))) == (
        pytest.approx(1 / 8)
    )
    assert_permuton_grid(push.to_grid(5), tol=1e-12)


@pytest.mark.parametrize("entries", ["1", "21", "2413", "35142", "425163"])
def test_w1_pushforward_bound(entries: str) -> None:
    # Get data
    pi = Permutation.parse(entries)
    n = len(pi)
    k = 10 * n

    # Run tests
    distance = w1_grid(grid_of_pushforward(f_of_perm(pi), k), permuton_of_perm(pi, k))
    assert distance <= 1 / n + 2 * math.sqrt(2) / k


def test_w1_grid() -> None:
    # Get data
    k = 5
    corner = np.zeros((k, k))
    corner[0, 0] = 1.0
    opposite = np.zeros((k, k))
    opposite[-1, -1] = 1.0

    # Run tests
    assert w1_grid(GridMeasure(corner), GridMeasure(opposite)) == pytest.approx(
        math.sqrt(2) * (1 - 1 / k)
    )
    assert w1_grid(GridMeasure.uniform(k), GridMeasure.uniform(k)) == (
        pytest.approx(0.0, abs=1e-12)
    )
    with pytest.raises(ResolutionMismatchError):
        w1_grid(GridMeasure.uniform(3), GridMeasure.uniform(4))
    with pytest.raises(PreconditionError):
        w1_grid(GridMeasure.uniform(65), GridMeasure.uniform(65))


def test_l1_distances() -> None:
    # Get data
    f = f_of_perm(Permutation.parse("12"))
    g = f_of_perm(Permutation.parse("21"))

    # Run tests
    assert l1_distance(f, g) == pytest.approx(0.5)
    assert l1_distance(f, f) == 0.0
    assert l1_cells(GridMeasure.uniform(2), permuton_of_perm(g, 2)) == (
        pytest.approx(1.0)
    )
    with pytest.raises(ResolutionMismatchError):
        l1_cells(GridMeasure.uniform(2), GridMeasure.uniform(3))


def test_compose_uniform() -> None:
    # Get data
    uniform = GridMeasure.uniform(4)
    plus = compose(uniform, uniform, 0.5, Sign.PLUS)
    minus = compose(uniform, uniform, 0.5, Sign.MINUS)

    # Run tests
    assert_permuton_grid(plus)
    assert_permuton_grid(minus)
    block = np.full((2, 2), 1 / 8)
    zero = np.zeros((2, 2))
    np.testing.assert_allclose(plus.mass, np.block([[block, zero], [zero, block]]))
    np.testing.assert_allclose(minus.mass, np.block([[zero, block], [block, zero]]))
    with pytest.raises(PreconditionError):
        compose(uniform, uniform, 1.0, Sign.PLUS)


@pytest.mark.parametrize("sign", [Sign.PLUS, Sign.MINUS])
def test_compose_matches_sums(sign: Sign) -> None:
    # Get data
    tau = Permutation.parse("21")
    rho = Permutation.parse("132")
    k = 10
    glued = compose(permuton_of_perm(tau, k), permuton_of_perm(rho, k), 0.4, sign)
    target = direct_sum(tau, rho) if sign is Sign.PLUS else skew_sum(tau, rho)

    # Run tests
    np.testing.assert_allclose(glued.mass, permuton_of_perm(target, k).mass, atol=1e-12)


def test_phi_p_permuton() -> None:
    # Get data
    mu = phi_p_permuton(0.3, depth=4, k=12, rng=path_rng(6))

    # Run tests
    assert_permuton_grid(mu)
    np.testing.assert_allclose(
        phi_p_permuton(0.3, depth=0, k=5).mass, GridMeasure.uniform(5).mass
    )


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_phi_p_contraction(seed: int) -> None:
    # Get data
    rng = path_rng(seed)
    mu0, nu0, mu1, nu1 = (phi_p_permuton(0.5, 2, 8, rng) for _ in range(4))

    # Run tests
    glued, bound = phi_p_contraction(mu0, nu0, mu1, nu1, 0.5, Sign.PLUS, k=16)
    assert glued <= bound + 1e-9


def test_sample_patterns_shapes() -> None:
    # Get data
    rng = path_rng(1)

    # Run tests
    for mu in (
        GridMeasure.uniform(4),
        PushforwardPermuton(f_of_perm(Permutation.parse("2413"))),
        Permutation.parse("2413"),
    ):
        patterns = sample_patterns(mu, 4, 100, rng)
        assert patterns.shape == (100, 4)
        assert np.all(np.sort(patterns, axis=1) == np.arange(1, 5))

    assert len(sample_pattern(GridMeasure.uniform(3), 5, rng)) == 5
    with pytest.raises(PreconditionError):
        sample_patterns(GridMeasure.uniform(3), 0, 10)


def test_exact_sample_law() -> None:
    # Get data
    pi = Permutation.parse("21")
    law = exact_sample_law(pi, 2)

    # Run tests
    assert law.total() == 1
    # Two points share a square with probability 1/2 and are then uniform
    assert law[Permutation.parse("21")] == Fraction(3, 4)
    assert law[Permutation.parse("12")] == Fraction(1, 4)
    with pytest.raises(SizeBoundError):
        exact_sample_law(Permutation.identity(5), 2)


def test_sample_patterns_match_exact_law() -> None:
    # Get data
    pi = Permutation.parse("231")
    exact = exact_sample_law(pi, 3)
    rows = sample_patterns(pi, 3, 40_000, path_rng(9))

    # Run tests
    observed = frequencies(Permutation(tuple(row)) for row in rows)
    assert tv_distance(observed, exact.probs) < 0.03
