import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jkoflow.errors import AlphaOutOfRange, InvalidPlan, NonUniqueOptimum, SizeMismatch
from jkoflow.geometry import (
    BasedPlan,
    based_plan,
    check_hilbertian_identity,
    check_transport_geodesic_identity,
    four_point_glue,
    generalized_geodesic,
    geodesic,
    pseudo_metric,
    pseudo_metric_squared,
    transport_metric,
    transport_metric_squared,
)
from jkoflow.measures import make_measure, random_measure, scale
from jkoflow.transport import is_cyclically_monotone, map_from_assignment, wasserstein_distance, wasserstein_squared

OMEGA = make_measure([(0, 0), (1, 0)])
MU0 = make_measure([(0, 0), (1, 10)])
MU1 = make_measure([(0, 0), (-1, 9)])


def triple(seed, n=5, d=2):
    return tuple(random_measure(seed, n, d, stream=k) for k in range(3))


def test_geodesic_examples():
    assert geodesic(make_measure([0]), make_measure([2]), 0.25).measure.points.tolist() == [[0.5]]
    mid = geodesic(make_measure([0, 1]), make_measure([0.5, 1.5]), 0.5).measure
    assert mid.points.ravel().tolist() == [0.25, 1.25]
    a, b, _ = triple(4)
    assert geodesic(a, b, 0.0).measure.same_as(a)
    assert geodesic(a, b, 1.0).measure.same_as(b)


def test_geodesic_errors():
    with pytest.raises(AlphaOutOfRange):
        geodesic(MU0, MU1, 1.5)
    with pytest.raises(SizeMismatch):
        geodesic(make_measure([0]), make_measure([0, 1]), 0.5)


def test_strict_gap_instance():
    plan = based_plan(OMEGA, MU0, MU1)
    assert plan.sigma0.tolist() == [0, 1] and plan.sigma1.tolist() == [1, 0]
    assert pseudo_metric_squared(plan) == 91.5
    assert wasserstein_squared(MU0, MU1) == 2.5
    assert transport_metric_squared(OMEGA, MU0, MU1) == 91.5
    mid = generalized_geodesic(plan, 0.5).measure
    assert mid.points.tolist() == [[-0.5, 4.5], [0.5, 5.0]]
    assert generalized_geodesic(plan, 1.0).measure.same_as(MU1)
    assert check_hilbertian_identity(plan, 0.5).residual <= 1e-10


def test_strict_gap_by_exhaustion():
    # every pairing of the three two-atom measures
    best = None
    for s0 in ([0, 1], [1, 0]):
        for s1 in ([0, 1], [1, 0]):
            c0 = map_from_assignment(OMEGA, MU0, s0).cost
            c1 = map_from_assignment(OMEGA, MU1, s1).cost
            key = (c0, c1)
            if best is None or key < best[0]:
                best = (key, s0, s1)
    _, s0, s1 = best
    a, b = MU0.points[s0], MU1.points[s1]
    assert float(np.mean(np.sum((a - b) ** 2, axis=1))) == 91.5


def test_invalid_plan():
    with pytest.raises(InvalidPlan):
        BasedPlan(OMEGA, MU0, MU1, np.array([1, 0]), np.array([1, 0]))
    with pytest.raises(InvalidPlan):
        BasedPlan(OMEGA, MU0, MU1, np.array([0, 0]), np.array([1, 0]))


def test_plan_json():
    data = json.loads(based_plan(OMEGA, MU0, MU1).to_json())
    assert data == {"n": 2, "sigma0": [0, 1], "sigma1": [1, 0]}


def test_base_coincidence():
    a, b, _ = triple(9)
    assert pseudo_metric(based_plan(a, a, b)) == pytest.approx(wasserstein_distance(a, b), abs=1e-12)
    assert abs(transport_metric(a, a, b) - wasserstein_distance(a, b)) <= 1e-12
    assert transport_metric(a, b, b) == 0.0


def test_transport_metric_needs_unique_maps():
    omega = make_measure([(0, 0), (1, 1)])
    with pytest.raises(NonUniqueOptimum):
        transport_metric(omega, make_measure([(1, 0), (0, 1)]), omega)


def test_one_dimensional_transport_metric_is_w2():
    for seed in range(30):
        w, a, b = triple(seed, 6, 1)
        assert transport_metric(w, a, b) == pytest.approx(wasserstein_distance(a, b), rel=1e-12)


def test_identity_edge_cases():
    w, a, b = triple(2)
    assert check_hilbertian_identity(based_plan(w, a, b), 0.0).residual <= 1e-12
    assert check_transport_geodesic_identity(w, a, a, b, 1.0) <= 1e-10
    mid = generalized_geodesic(based_plan(w, a, b), 0.3).measure
    assert check_transport_geodesic_identity(w, mid, a, b, 0.3) <= 1e-10
    glue = four_point_glue(w, a, b, w, 0.4)
    assert glue.residual == pytest.approx(check_hilbertian_identity(based_plan(w, a, b), 0.4).residual, abs=1e-10)
    assert four_point_glue(w, a, b, b, 1.0).lhs == pytest.approx(0.0, abs=1e-15)
    assert glue.quadruples.shape == (5, 4, 2)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 8), d=st.integers(1, 3), alpha=st.floats(0, 1))
def test_identities_hold(seed, n, d, alpha):
    w, a, b = triple(seed, n, d)
    nu = random_measure(seed, n, d, stream=3)
    check = check_hilbertian_identity(based_plan(w, a, b), alpha)
    assert check.residual <= 1e-10
    assert check.w2_squared <= check.pairing_cost + 1e-12
    assert check_transport_geodesic_identity(w, nu, a, b, alpha) <= 1e-10
    assert four_point_glue(w, a, b, nu, alpha).residual <= 1e-10


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 8), d=st.integers(1, 3))
def test_sandwich(seed, n, d):
    w, a, b = triple(seed, n, d)
    value = transport_metric(w, a, b)
    assert wasserstein_distance(a, b) <= value + 1e-12
    assert value <= wasserstein_distance(a, w) + wasserstein_distance(w, b) + 1e-9


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), a1=st.floats(0, 1), a2=st.floats(0, 1))
def test_generalized_geodesics_have_constant_speed(seed, a1, a2):
    w, a, b = triple(seed, 5, 2)
    plan = based_plan(w, a, b)
    m1, m2 = generalized_geodesic(plan, a1).measure, generalized_geodesic(plan, a2).measure
    total = transport_metric(w, a, b)
    assert transport_metric(w, m1, m2) == pytest.approx(abs(a2 - a1) * total, rel=1e-10, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), alpha=st.floats(0, 1))
def test_interpolated_map_is_cyclically_monotone(seed, alpha):
    w, a, b = triple(seed, 6, 2)
    mid = generalized_geodesic(based_plan(w, a, b), alpha).measure
    assert is_cyclically_monotone(map_from_assignment(w, mid, np.arange(6)), 6)


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_scale_covariance(c):
    w, a, b = triple(11)
    plan, scaled = based_plan(w, a, b), based_plan(scale(w, c), scale(a, c), scale(b, c))
    assert pseudo_metric_squared(scaled) == pytest.approx(c**2 * pseudo_metric_squared(plan), rel=1e-12)
    h1 = check_hilbertian_identity(plan, 0.3)
    h2 = check_hilbertian_identity(scaled, 0.3)
    assert h2.pairing_cost == pytest.approx(c**2 * h1.pairing_cost, rel=1e-12)
    assert math.isclose(
        four_point_glue(*map(lambda m: scale(m, c), (w, a, b, w)), 0.3).lhs,
        c**2 * four_point_glue(w, a, b, w, 0.3).lhs,
        rel_tol=1e-12,
    )
