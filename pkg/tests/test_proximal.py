import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jkoflow.errors import InvalidParameter, NoConvergence, StepTooLarge
from jkoflow.functionals import COSINE, INTERACTION, QUADRATIC, QUADRATIC_COSINE, SHIPPED, energy, metric_slope
from jkoflow.measures import make_measure, random_measure
from jkoflow.proximal import el_residual, prox_split_check, proximal_step, quadratic_perturbation
from jkoflow.transport import wasserstein_squared


def test_quadratic_perturbation_examples():
    mu = random_measure(1, 3, 2)
    assert quadratic_perturbation(QUADRATIC, 0.3, mu, mu) == energy(QUADRATIC, mu)
    assert quadratic_perturbation("zero", 0.5, make_measure([0]), make_measure([1])) == 1.0
    assert quadratic_perturbation(QUADRATIC, 0.5, make_measure([2]), make_measure([4 / 3])) == pytest.approx(4 / 3)  # 4/9 + 8/9


def test_zero_energy_is_identity():
    mu = random_measure(2, 5, 3)
    res = proximal_step("zero", 0.7, mu)
    assert np.array_equal(res.nu.points, mu.points)
    assert res.el_residual == 0.0


def test_quadratic_closed_form():
    res = proximal_step(QUADRATIC, 0.5, make_measure([2]))
    assert res.nu.points[0, 0] == pytest.approx(4 / 3, abs=1e-15)
    assert res.el_residual <= 1e-12


def test_interaction_closed_form():
    res = proximal_step(INTERACTION, 1.0, make_measure([0, 2]))
    assert res.nu.points.ravel().tolist() == pytest.approx([0.5, 1.5], abs=1e-15)
    assert res.el_residual <= 1e-12


def test_el_residual_detects_non_minimizer():
    mu = make_measure([2])
    assert el_residual(QUADRATIC, 0.5, mu, mu) == 2.0
    assert el_residual("zero", 0.5, mu, mu) == 0.0


def test_step_size_limit():
    with pytest.raises(StepTooLarge):
        proximal_step(COSINE, 1.0, make_measure([0.3]))
    with pytest.raises(InvalidParameter):
        proximal_step(QUADRATIC, 0.0, make_measure([0.3]))
    proximal_step(QUADRATIC, 50.0, make_measure([0.3]))  # lambda >= 0: any tau


def test_impossible_gate_is_reported():
    with pytest.raises(NoConvergence):
        proximal_step(COSINE, 0.5, random_measure(3, 4, 2), el_tol=0.0)


def test_result_serializes():
    d = proximal_step(QUADRATIC, 0.5, make_measure([2])).to_dict()
    assert d["assignment"] == [0] and d["n"] == 1 and d["tau"] == 0.5


def test_prox_split_examples():
    assert prox_split_check(QUADRATIC, 0.5, 0.25, make_measure([2])) <= 1e-14
    assert prox_split_check(COSINE, 0.5, 0.5, random_measure(1, 4, 2)) <= 1e-12
    assert prox_split_check(INTERACTION, 0.8, 0.3, random_measure(2, 6, 2)) <= 1e-8


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), k=st.integers(0, 3), n=st.integers(1, 8), frac=st.floats(0.05, 0.95))
def test_minimizer_certificate(seed, k, n, frac):
    spec = SHIPPED[k]
    tau = frac if spec == COSINE else 2 * frac
    mu = random_measure(seed, n, 2)
    res = proximal_step(spec, tau, mu)
    assert res.el_residual <= 1e-10
    phi = res.phi_value
    rng = np.random.default_rng(seed)
    probes = [res.nu.points + d * rng.standard_normal(res.nu.points.shape) for d in (1e-3, 1e-2, 1e-1)]
    probes += [(1 - a) * res.nu.points + a * mu.points for a in (0.1, 0.5, 1.0)]
    for p in probes:
        assert phi <= quadratic_perturbation(spec, tau, mu, make_measure(p)) + 1e-9


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), k=st.integers(0, 3), frac=st.floats(0.05, 0.95))
def test_slope_chain(seed, k, frac):
    spec = SHIPPED[k]
    tau = frac if spec == COSINE else 2 * frac
    mu = random_measure(seed, 5, 2)
    nu = proximal_step(spec, tau, mu).nu
    lam = -1.0 if spec == COSINE else (1.0 if spec == QUADRATIC else 0.0)
    w2 = wasserstein_squared(mu, nu)
    mid = 2 * tau / (1 + lam * tau) * (energy(spec, mu) - energy(spec, nu) - w2 / (2 * tau))
    assert tau**2 * metric_slope(spec, nu) ** 2 <= w2 + 1e-9
    assert w2 <= mid + 1e-9
    assert mid <= tau**2 / (1 + lam * tau) ** 2 * metric_slope(spec, mu) ** 2 + 1e-9


@pytest.mark.parametrize("spec", [QUADRATIC_COSINE, INTERACTION])
def test_perturbed_output_fails_gate(spec):
    mu = random_measure(5, 4, 2)
    res = proximal_step(spec, 0.5, mu)
    moved = make_measure(res.nu.points + 1e-3 * np.random.default_rng(0).standard_normal(res.nu.points.shape))
    assert el_residual(spec, 0.5, mu, moved) > 1e-10
