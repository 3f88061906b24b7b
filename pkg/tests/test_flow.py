import math

import numpy as np
import pytest

from jkoflow.errors import HypothesisViolated, InvalidParameter
from jkoflow.flow import (
    ReferenceFlow,
    discrete_flow,
    energy_dissipation_check,
    exponential_formula_experiment,
    random_schedule,
    reference_flow,
    semigroup_checks,
    varying_flow,
)
from jkoflow.functionals import COSINE, INTERACTION, QUADRATIC, QUADRATIC_COSINE, energy
from jkoflow.measures import make_measure, random_measure


def test_discrete_flow_examples():
    assert len(discrete_flow(QUADRATIC, 0.25, 0, make_measure([1])).steps) == 1
    trace = discrete_flow(QUADRATIC, 0.25, 4, make_measure([1]))
    assert trace.final.points[0, 0] == pytest.approx(1.25**-4, abs=1e-15)
    two = discrete_flow(INTERACTION, 1.0, 2, make_measure([0, 2])).final
    assert two.points.ravel().tolist() == pytest.approx([0.75, 1.25], abs=1e-14)
    with pytest.raises(InvalidParameter):
        discrete_flow(QUADRATIC, 0.25, -1, make_measure([1]))


def test_varying_flow_examples():
    mu = random_measure(2, 4, 2)
    a = varying_flow(COSINE, [0.3] * 3, mu)
    b = discrete_flow(COSINE, 0.3, 3, mu)
    assert a.to_csv() == b.to_csv()
    trace = varying_flow(QUADRATIC, [0.5, 0.25], make_measure([1]))
    assert trace.final.points[0, 0] == pytest.approx(8 / 15, abs=1e-15)
    assert len(varying_flow(QUADRATIC, [], mu).steps) == 1


def test_trace_bookkeeping():
    trace = varying_flow(COSINE, [0.5, 0.25], random_measure(3, 3, 2))
    assert trace.partial_sums() == [0.0, 0.5, 0.75]
    assert trace.partial_products() == pytest.approx([1.0, 2.0, 2.0 / 0.75])
    times = [s.time for s in trace.steps]
    assert times == sorted(times) and len(set(times)) == len(times)
    header = trace.to_csv().splitlines()[0]
    assert header == "step,time,energy,slope,step_w2"


@pytest.mark.parametrize("spec", [QUADRATIC, QUADRATIC_COSINE, INTERACTION])
def test_energy_decreases_for_nonnegative_lambda(spec):
    trace = discrete_flow(spec, 0.3, 6, random_measure(4, 5, 2))
    e = [s.energy for s in trace.steps]
    assert all(b <= a + 1e-12 for a, b in zip(e, e[1:]))


def test_slope_decay_per_step():
    for spec, lam in ((QUADRATIC, 1.0), (COSINE, -1.0), (INTERACTION, 0.0)):
        tau = 0.4
        trace = discrete_flow(spec, tau, 5, random_measure(6, 4, 2))
        for a, b in zip(trace.steps, trace.steps[1:]):
            assert b.slope <= a.slope / (1 + lam * tau) + 1e-9


def test_random_schedule():
    steps = random_schedule(1.0, 0.1, seed=3)
    assert sum(steps) == pytest.approx(1.0, abs=1e-14)
    assert max(steps) == 0.1 and min(steps) > 0
    assert random_schedule(0.05, 0.1, seed=0) == [0.05]


def test_reference_flow_closed_forms():
    assert reference_flow(QUADRATIC, make_measure([1]), 1.0).points[0, 0] == pytest.approx(math.exp(-1), abs=1e-12)
    mu = random_measure(1, 3, 2)
    assert np.array_equal(reference_flow("zero", mu, 2.0).points, mu.points)
    pair = reference_flow(INTERACTION, make_measure([0, 2]), 1.0).points.ravel()
    assert pair.tolist() == pytest.approx([1 - math.exp(-1), 1 + math.exp(-1)], abs=1e-12)


def test_reference_flow_segments_agree():
    flow = ReferenceFlow(COSINE, random_measure(2, 3, 2))
    a, b = flow.positions([0.5, 1.0])
    whole = flow.positions([1.0])[0]
    assert np.max(np.abs(b - whole)) <= 1e-10
    assert a.shape == b.shape


def test_exponential_formula_quadratic():
    table = exponential_formula_experiment(QUADRATIC, make_measure([1]), 1.0, [4, 10, 1024])
    for row in table.rows:
        exact = abs((1 + 1 / row.n) ** -row.n - math.exp(-1))
        assert row.error == pytest.approx(exact, rel=1e-9)
        assert row.passed
    assert table.rows[1].bound == pytest.approx(math.sqrt(3 / 10))
    assert table.rows[2].error < table.rows[0].error
    zero = exponential_formula_experiment("zero", random_measure(0, 3, 2), 1.0, [4, 8])
    assert all(r.error == 0.0 for r in zero.rows) and math.isnan(zero.slope_fit)


def test_exponential_formula_hypothesis():
    with pytest.raises(HypothesisViolated):
        exponential_formula_experiment(COSINE, make_measure([0.2]), 4.0, [4])


def test_semigroup_quadratic_contraction_is_equality():
    checks = {c.name: c for c in semigroup_checks(QUADRATIC, make_measure([1]), 1.0, 0.25, nu0=make_measure([3]))}
    contraction = checks["contraction"]
    assert contraction.lhs == pytest.approx(2 * math.exp(-1), abs=1e-11)
    assert contraction.rhs == pytest.approx(2 * math.exp(-1), abs=1e-15)
    assert all(c.passed for c in checks.values())


def test_semigroup_at_zero():
    checks = semigroup_checks(COSINE, random_measure(1, 3, 2), 0.0, 0.0)
    assert all(c.passed for c in checks)


def test_energy_dissipation():
    assert energy_dissipation_check("zero", random_measure(0, 2, 2), 1.0).lhs == 0.0
    c = energy_dissipation_check(QUADRATIC, make_measure([1]), 1.0)
    assert c.rhs == pytest.approx((1 - math.exp(-2)) / 2, abs=1e-12)
    assert abs(c.slack) <= 1e-6
    assert abs(energy_dissipation_check(INTERACTION, random_measure(3, 4, 2), 1.0).slack) <= 1e-6
    with pytest.raises(InvalidParameter):
        energy_dissipation_check(QUADRATIC, make_measure([1]), 1.0, n=10)
