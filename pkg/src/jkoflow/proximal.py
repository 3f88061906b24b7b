"""The JKO proximal step, certified by its Euler-Lagrange residual."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, NoConvergence, NonUniqueOptimum, StepTooLarge
from .functionals import Functional, _as_functional, energy
from .measures import ParticleMeasure, make_measure
from .transport import optimal_map, wasserstein_distance, wasserstein_squared

EL_TOL = 1e-10
GRAD_TOL = 1e-12
MAX_ITER = 10_000


@dataclass(frozen=True, eq=False)
class ProxResult:
    mu: ParticleMeasure
    tau: float
    nu: ParticleMeasure
    el_residual: float
    phi_value: float
    inner_iterations: int
    assignment: np.ndarray  # atom i of mu is paired with atom assignment[i] of nu

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "n": self.mu.n,
            "dim": self.mu.dim,
            "el_residual": self.el_residual,
            "phi_value": self.phi_value,
            "inner_iterations": self.inner_iterations,
            "assignment": [int(j) for j in self.assignment],
        }


def check_step(E: Functional, tau: float) -> None:
    if not tau > 0 or not math.isfinite(tau):
        raise InvalidParameter(f"time step must be positive, got {tau}")
    lm = E.lam_minus
    if lm > 0 and tau * lm >= 1.0:
        raise StepTooLarge(f"tau={tau} violates tau < 1/lambda_minus = {1 / lm}")


def quadratic_perturbation(E, tau: float, mu: ParticleMeasure, nu: ParticleMeasure) -> float:
    """``W_2^2(mu, nu) / (2 tau) + E(nu)``."""
    if not tau > 0:
        raise InvalidParameter("tau must be positive")
    return wasserstein_squared(mu, nu) / (2.0 * tau) + energy(E, nu)


def _solve_positions(E: Functional, tau: float, anchors: np.ndarray, y: np.ndarray, grad_tol: float, max_iter: int):
    """Damped Newton for ``min_y (1/(2 tau N)) sum |a_j - y_j|^2 + E(y)``.

    Works with ``g = N * gradient``: ``g_j = (y_j - a_j)/tau + xi_j(y)``.
    Stops at ``max |g| <= grad_tol`` or when rounding stalls progress.
    """
    n, d = anchors.shape
    eye = np.eye(n * d) / tau

    def objective(z):
        return float(np.sum((z - anchors) ** 2)) / (2.0 * tau * n) + E.value(z)

    def gradient(z):
        return (z - anchors) / tau + E.field(z)

    g = gradient(y)
    gnorm = float(np.max(np.abs(g)))
    it = 0
    while gnorm > grad_tol and it < max_iter:
        it += 1
        step = np.linalg.solve(eye + E.field_jacobian(y), g.ravel()).reshape(n, d)
        f0, t = objective(y), 1.0
        while True:
            trial = y - t * step
            g_trial = gradient(trial)
            gn_trial = float(np.max(np.abs(g_trial)))
            if gn_trial < gnorm or objective(trial) < f0:
                break
            t *= 0.5
            if t < 1e-10:  # rounding floor: no representable improvement left
                return y, it
        y, g, gnorm = trial, g_trial, gn_trial
    return y, it


def el_residual_arrays(E: Functional, tau: float, x: np.ndarray, y: np.ndarray, assignment: np.ndarray) -> float:
    anchors = np.empty_like(y)
    anchors[assignment] = x  # anchors[j] = x_{sigma^{-1}(j)}
    r = (anchors - y) / tau - E.field(y)
    return float(np.max(np.linalg.norm(r, axis=1)))


def el_residual(E, tau: float, mu: ParticleMeasure, nu: ParticleMeasure) -> float:
    """Max over atoms of ``|(t_nu^mu - id)/tau - xi(nu)|``."""
    E = _as_functional(E)
    tmap = optimal_map(mu, nu)
    if not tmap.unique:
        raise NonUniqueOptimum(f"assignment between mu and nu tied within {tmap.gap:.3g}")
    return el_residual_arrays(E, tau, mu.points, nu.points, tmap.assignment)


def proximal_step(
    E,
    tau: float,
    mu: ParticleMeasure,
    *,
    el_tol: float = EL_TOL,
    grad_tol: float = GRAD_TOL,
    max_iter: int = MAX_ITER,
) -> ProxResult:
    """``J_tau mu``: minimize ``W_2^2(mu, .)/(2 tau) + E`` over ``N``-atom measures.

    Alternates between a fixed pairing (positions solved by damped Newton)
    and re-solving the optimal pairing, starting from ``nu = mu``.  The
    result is accepted only when the pairing is stable and the
    Euler-Lagrange residual is at most ``el_tol``.
    """
    E = _as_functional(E)
    check_step(E, tau)
    x = np.asarray(mu.points, dtype=np.float64)
    n = x.shape[0]
    assignment = np.arange(n)
    y = x.copy()
    best = None
    total_iter = 0
    seen = set()
    while total_iter < max_iter:
        anchors = np.empty_like(x)
        anchors[assignment] = x
        y, it = _solve_positions(E, tau, anchors, y, grad_tol, max_iter - total_iter)
        total_iter += it
        nu = make_measure(y)
        phi = quadratic_perturbation(E, tau, mu, nu)
        tmap = optimal_map(mu, nu)
        if best is None or phi < best[0]:
            best = (phi, nu, tmap)
        key = tuple(tmap.assignment.tolist())
        if np.array_equal(tmap.assignment, assignment) or key in seen:
            break
        seen.add(tuple(assignment.tolist()))
        assignment = tmap.assignment
    phi, nu, tmap = best
    if not tmap.unique:
        raise NonUniqueOptimum(f"pairing of J_tau mu tied within {tmap.gap:.3g}")
    residual = el_residual_arrays(E, tau, x, nu.points, tmap.assignment)
    if not residual <= el_tol:
        raise NoConvergence(f"Euler-Lagrange residual {residual:.3g} exceeds {el_tol:.3g}")
    return ProxResult(mu, tau, nu, residual, phi, total_iter, tmap.assignment)


def prox_split_check(E, tau: float, h: float, mu: ParticleMeasure) -> float:
    """``W_2`` between ``J_tau mu`` and ``J_h`` of the point at fraction
    ``(tau - h)/tau`` along the geodesic from ``mu`` to ``J_tau mu``."""
    E = _as_functional(E)
    if not 0 < h <= tau:
        raise InvalidParameter(f"need 0 < h <= tau, got h={h}, tau={tau}")
    big = proximal_step(E, tau, mu)
    images = big.nu.points[big.assignment]
    inner = make_measure(((tau - h) / tau) * images + (h / tau) * mu.points)
    small = proximal_step(E, h, inner)
    return wasserstein_distance(big.nu, small.nu)
