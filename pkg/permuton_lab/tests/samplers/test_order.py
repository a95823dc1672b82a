#!/usr/bin/env python

import itertools
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from permuton_lab.errors import IncomparableError, PreconditionError, StructuralError
from permuton_lab.perm_core import Permutation, is_separable
from permuton_lab.samplers.base import (
    ChainConfig,
    frequencies,
    path_rng,
    tv_distance,
)
from permuton_lab.samplers.order import (
    OrderStream,
    RankInsertion,
    Relation,
    empirical_prec_mass,
    lambda_of_stream,
    lambda_reference,
    max_gap,
    measure_preservation_gap,
    perm_of_points,
    phi_k,
    precedes,
)
from permuton_lab.tree_density import exact_distribution

from ..utils import assert_sample_frame_basics

###############################################################################


def test_stream_validation() -> None:
    # Run tests
    with pytest.raises(StructuralError):
        OrderStream(np.array([0.0, 0.5]), np.array([1, 1]))
    with pytest.raises(StructuralError):
        OrderStream(np.array([0.5, 0.5]), np.array([1, -1]))
    with pytest.raises(StructuralError):
        OrderStream(np.array([0.2, 0.5]), np.array([1, 0]))
    with pytest.raises(StructuralError):
        OrderStream(np.array([0.2, 0.5]), np.array([1]))


def test_stream_generate_and_csv(tmp_path: Path) -> None:
    # Get data
    stream = OrderStream.generate(200, 0.3, path_rng(4))
    path = tmp_path / "stream.csv"
    stream.to_csv(path)
    loaded = OrderStream.read_csv(path)

    # Run tests
    assert len(stream) == 200
    assert not stream.u.flags.writeable
    np.testing.assert_array_equal(loaded.u, stream.u)
    np.testing.assert_array_equal(loaded.s, stream.s)
    assert stream.value(0) == 0.0
    assert stream.value(-1) == 1.0
    assert len(stream.prefix(10)) == 10


def test_precedes() -> None:
    # Get data
    plus = OrderStream(np.array([0.5]), np.array([1]))
    minus = OrderStream(np.array([0.5]), np.array([-1]))

    # Run tests
    assert precedes(plus, 0.2, 0.7) is Relation.PRECEDES
    assert precedes(plus, 0.7, 0.2) is Relation.FOLLOWS
    assert precedes(minus, 0.2, 0.7) is Relation.FOLLOWS
    assert precedes(plus, 0.1, 0.3) is Relation.INCOMPARABLE
    assert precedes(plus, 0.3, 0.3) is Relation.INCOMPARABLE
    # The interval is closed on the right
    assert precedes(plus, 0.2, 0.5) is Relation.PRECEDES


@pytest.mark.parametrize("seed", [0, 3])
def test_precedes_is_a_strict_total_order(seed: int) -> None:
    # Get data
    stream = OrderStream.generate(2000, 0.4, path_rng(seed))
    # Points 0.04 apart are all separated by 2000 uniforms except with
    # negligible probability
    points = np.linspace(0.02, 0.98, 25)
    relation = {
        (a, b): precedes(stream, points[a], points[b])
        for a, b in itertools.permutations(range(len(points)), 2)
    }

    # Run tests
    for (a, b), rel in relation.items():
        assert rel is not Relation.INCOMPARABLE
        assert (rel is Relation.PRECEDES) == (relation[(b, a)] is Relation.FOLLOWS)
    for a, b, c in itertools.permutations(range(len(points)), 3):
        if (
            relation[(a, b)] is Relation.PRECEDES
            and relation[(b, c)] is Relation.PRECEDES
        ):
            assert relation[(a, c)] is Relation.PRECEDES


def test_lambda_by_hand() -> None:
    # Get data
    stream = OrderStream(np.array([0.5, 0.25]), np.array([1, -1]))

    # Run tests
    assert lambda_of_stream(stream, 1) == Permutation.identity(1)
    assert lambda_of_stream(stream, 2) == Permutation.parse("12")
    assert lambda_of_stream(stream, 3) == Permutation.parse("213")
    assert lambda_reference(stream, 3) == Permutation.parse("213")
    with pytest.raises(PreconditionError):
        lambda_of_stream(stream, 4)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
@pytest.mark.parametrize("p", [0.2, 0.5, 0.9])
def test_lambda_matches_reference(seed: int, p: float) -> None:
    # Get data
    stream = OrderStream.generate(120, p, path_rng(seed))

    # Run tests
    for n in (1, 7, 50, 121):
        fast = lambda_of_stream(stream, n)
        assert fast == lambda_reference(stream, n)
        assert is_separable(fast)


def test_lambda_is_consistent_in_n() -> None:
    # Get data
    stream = OrderStream.generate(60, 0.4, path_rng(8))
    big = lambda_of_stream(stream, 61)

    # Run tests
    # Points are U_0..U_{n-1}, so the first n points of the stream carry
    # the smaller permutation
    points = np.concatenate(([0.0], stream.u))
    order = np.argsort(points)
    for n in (10, 30, 60):
        positions = [i + 1 for i, j in enumerate(order) if j < n]
        values = [big.entries[i - 1] for i in positions]
        ranks = np.argsort(np.argsort(values)) + 1
        assert lambda_of_stream(stream, n) == Permutation(tuple(ranks))


def test_perm_of_points() -> None:
    # Run tests
    assert perm_of_points([3, 1, 2], lambda a, b: a > b) == Permutation.parse("321")
    assert perm_of_points([0.3, 0.1], lambda a, b: a < b) == Permutation.parse("12")
    with pytest.raises(IncomparableError):
        perm_of_points([1, 2], lambda a, b: False)
    with pytest.raises(PreconditionError):
        perm_of_points([], lambda a, b: a < b)


def test_phi_k_by_hand() -> None:
    # Get data
    stream = OrderStream(np.array([0.5]), np.array([-1]))

    # Run tests
    assert phi_k(stream, 0, 0.3) == 0.0
    assert phi_k(stream, 1, 0.2) == 0.5
    assert phi_k(stream, 1, 0.7) == 0.0
    step = phi_k(stream, 1)
    np.testing.assert_allclose(step.breakpoints, [0.0, 0.5, 1.0])


@pytest.mark.parametrize("seed", [1, 6])
def test_phi_k_cells_and_monotonicity(seed: int) -> None:
    # Get data
    stream = OrderStream.generate(400, 0.35, path_rng(seed))
    big = 400
    finest = phi_k(stream, big)
    # Every phi_k is constant on the cells of phi_big, so midpoints suffice
    mids = (finest.breakpoints[:-1] + finest.breakpoints[1:]) / 2
    limit = finest(mids)

    # Run tests
    previous = np.zeros_like(mids)
    for k in (0, 1, 5, 20, 100, 399, 400):
        step = phi_k(stream, k)
        assert len(np.unique(step.values)) == k + 1
        current = step(mids)
        assert np.all(current >= previous - 1e-12)
        assert np.max(np.abs(limit - current)) <= max_gap(stream, k) + 1e-12
        previous = current


@pytest.mark.parametrize("seed", [0, 5])
def test_measure_preservation_gap(seed: int) -> None:
    # Get data
    stream = OrderStream.generate(500, 0.5, path_rng(seed))

    # Run tests
    for k in (0, 10, 100, 500):
        gap = measure_preservation_gap(stream, k)
        assert gap == pytest.approx(max_gap(stream, k), abs=1e-12)
    assert measure_preservation_gap(stream, 500) < 0.05


def test_max_gap() -> None:
    # Get data
    stream = OrderStream(np.array([0.5, 0.8]), np.array([1, 1]))

    # Run tests
    assert max_gap(stream, 0) == 1.0
    assert max_gap(stream, 1) == 0.5
    assert max_gap(stream, 2) == pytest.approx(0.5)
    with pytest.raises(PreconditionError):
        max_gap(stream, 3)


def test_empirical_prec_mass_tracks_phi() -> None:
    # Get data
    stream = OrderStream.generate(4000, 0.6, path_rng(12))

    # Run tests
    for x in (0.13, 0.37, 0.81):
        empirical = empirical_prec_mass(stream, 4001, x)
        assert abs(empirical - phi_k(stream, 4000, x)) < 0.06


def test_rank_insertion_samples() -> None:
    # Get data
    cfg = ChainConfig(p=0.7, seed=2, n_target=15)
    df = RankInsertion.get_samples(cfg, 40, tqdm_kwargs={"disable": True})

    # Run tests
    assert_sample_frame_basics(df, count=40, n=15)
    assert set(df["sampler"]) == {"order"}


def test_rank_insertion_matches_exact_law() -> None:
    # Get data
    cfg = ChainConfig(p=0.6, seed=13, n_target=5)
    df = RankInsertion.get_samples(cfg, 50_000, tqdm_kwargs={"disable": True})
    exact = exact_distribution(5, Fraction(3, 5))

    # Run tests
    assert tv_distance(frequencies(df["permutation"]), exact.probs) < 0.04
