import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jkoflow.errors import DimensionMismatch, EmptyInput, InvalidParameter, NonFiniteCoordinate
from jkoflow.measures import (
    InstanceSeed,
    make_measure,
    measure_from_csv,
    measure_to_csv,
    permute,
    random_measure,
    second_moment,
    translate,
)


def test_make_measure_shapes():
    assert make_measure([0, 1]).points.shape == (2, 1)
    mu = make_measure([(0, 0), (1, 10)])
    assert (mu.n, mu.dim) == (2, 2)
    assert mu.points[1].tolist() == [1.0, 10.0]


@pytest.mark.parametrize(
    "points, err",
    [([], EmptyInput), ([(0,), (math.nan,)], NonFiniteCoordinate), ([(0, 1), (2,)], DimensionMismatch)],
)
def test_make_measure_errors(points, err):
    with pytest.raises(err):
        make_measure(points)


def test_points_are_read_only():
    mu = make_measure([1.0, 2.0])
    with pytest.raises(ValueError):
        mu.points[0, 0] = 5.0


@pytest.mark.parametrize("points, expected", [([0], 0.0), ([1, -2], 2.5), ([(3, 4)], 25.0)])
def test_second_moment(points, expected):
    assert second_moment(make_measure(points)) == expected


def test_random_measure_deterministic():
    a = random_measure(1, 3, 2)
    b = random_measure(InstanceSeed(1), 3, 2)
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, random_measure(2, 3, 2).points)
    assert np.all(np.abs(a.points) <= 1.0)


@pytest.mark.parametrize("args", [(1, 0, 2), (1, 3, 0), (1, 3, 2, -1.0)])
def test_random_measure_rejects_bad_arguments(args):
    with pytest.raises(InvalidParameter):
        random_measure(*args)


def test_seed_range():
    with pytest.raises(InvalidParameter):
        random_measure(-1, 2, 2)


def test_same_as_ignores_order():
    mu = random_measure(5, 6, 3)
    assert mu.same_as(permute(mu, [5, 4, 3, 2, 1, 0]))
    assert not mu.same_as(translate(mu, [1e-6, 0, 0]))


def test_csv_round_trip_is_exact():
    mu = random_measure(7, 5, 3)
    text = measure_to_csv(mu)
    assert text.splitlines()[0] == "3,5"
    assert np.array_equal(measure_from_csv(text).points, mu.points)


def test_csv_header_mismatch():
    with pytest.raises(DimensionMismatch):
        measure_from_csv("1,3\n0\n1\n")


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 2**32),
    v=st.lists(st.floats(-5, 5), min_size=2, max_size=2),
)
def test_second_moment_translation(seed, v):
    mu = random_measure(seed, 4, 2)
    v = np.array(v)
    expected = second_moment(mu) + 2 * float(v @ mu.mean()) + float(v @ v)
    assert abs(second_moment(translate(mu, v)) - expected) <= 1e-12 * (1 + abs(expected))
