"""Geodesics, generalized geodesics and the metrics built on a base measure.

A plan with base ``omega`` is stored as two permutations: base atom ``i``
is coupled to atom ``sigma0[i]`` of ``mu0`` and atom ``sigma1[i]`` of
``mu1``.  Uniform masses make this lossless.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import AlphaOutOfRange, InvalidPlan, SizeMismatch
from .measures import ParticleMeasure, make_measure
from .transport import (
    TIE_TOL,
    _check_pair,
    cost_matrix,
    optimal_map,
    unique_optimal_map,
    wasserstein_squared,
)


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise AlphaOutOfRange(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


def _msq(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared distance between row-aligned point arrays."""
    d = a - b
    return float(np.mean(np.einsum("ij,ij->i", d, d)))


@dataclass(frozen=True, eq=False)
class BasedPlan:
    base: ParticleMeasure
    mu0: ParticleMeasure
    mu1: ParticleMeasure
    sigma0: np.ndarray
    sigma1: np.ndarray

    def __post_init__(self):
        n = self.base.n
        for mu, sigma in ((self.mu0, self.sigma0), (self.mu1, self.sigma1)):
            _check_pair(self.base, mu)
            perm = np.asarray(sigma)
            if perm.shape != (n,) or sorted(perm.tolist()) != list(range(n)):
                raise InvalidPlan("plan legs must be permutations of the atoms")
            c = cost_matrix(self.base.points, mu.points)
            total = float(np.sum(c[np.arange(n), perm]))
            best = wasserstein_squared(self.base, mu) * n
            if total > best + TIE_TOL * (1.0 + best):
                raise InvalidPlan(f"a projection is not optimal ({total:.17g} > {best:.17g})")

    @property
    def n(self) -> int:
        return self.base.n

    def legs(self) -> tuple[np.ndarray, np.ndarray]:
        """``(t_omega^{mu0}(w_i), t_omega^{mu1}(w_i))`` in base order."""
        return self.mu0.points[self.sigma0], self.mu1.points[self.sigma1]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "sigma0": [int(j) for j in self.sigma0],
            "sigma1": [int(j) for j in self.sigma1],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def based_plan(omega: ParticleMeasure, mu0: ParticleMeasure, mu1: ParticleMeasure) -> BasedPlan:
    """Canonical plan: optimal assignments from ``omega`` to each endpoint."""
    return BasedPlan(
        omega, mu0, mu1, optimal_map(omega, mu0).assignment, optimal_map(omega, mu1).assignment
    )


@dataclass(frozen=True, eq=False)
class GeodesicPoint:
    alpha: float
    measure: ParticleMeasure


def geodesic(mu0: ParticleMeasure, mu1: ParticleMeasure, alpha: float) -> GeodesicPoint:
    """Displacement interpolation along the optimal matching, in ``mu0`` order."""
    alpha = _check_alpha(alpha)
    if mu0.n != mu1.n:
        raise SizeMismatch(f"measures have {mu0.n} and {mu1.n} atoms")
    tmap = optimal_map(mu0, mu1)
    pts = (1.0 - alpha) * mu0.points + alpha * tmap.images()
    return GeodesicPoint(alpha, make_measure(pts))


def generalized_geodesic(plan: BasedPlan, alpha: float) -> GeodesicPoint:
    """``((1 - alpha) t0 + alpha t1) # omega``, one atom per base atom."""
    alpha = _check_alpha(alpha)
    a, b = plan.legs()
    return GeodesicPoint(alpha, make_measure((1.0 - alpha) * a + alpha * b))


def pseudo_metric_squared(plan: BasedPlan) -> float:
    a, b = plan.legs()
    return _msq(a, b)


def pseudo_metric(plan: BasedPlan) -> float:
    return math.sqrt(pseudo_metric_squared(plan))


def transport_metric_squared(omega: ParticleMeasure, mu0: ParticleMeasure, mu1: ParticleMeasure) -> float:
    """``||t_omega^{mu0} - t_omega^{mu1}||^2_{L^2(omega)}``; needs unique maps."""
    return _msq(unique_optimal_map(omega, mu0).images(), unique_optimal_map(omega, mu1).images())


def transport_metric(omega: ParticleMeasure, mu0: ParticleMeasure, mu1: ParticleMeasure) -> float:
    return math.sqrt(transport_metric_squared(omega, mu0, mu1))


@dataclass(frozen=True)
class IdentityCheck:
    """Residual of an exact identity plus the pieces it was built from.

    ``pairing_cost`` is the squared distance read off the base-indexed
    coupling; ``w2_squared`` is the true optimal cost of the same pair,
    which can only be smaller.
    """

    residual: float
    pairing_cost: float
    w2_squared: float

    def __float__(self) -> float:
        return self.residual


def check_hilbertian_identity(plan: BasedPlan, alpha: float) -> IdentityCheck:
    alpha = _check_alpha(alpha)
    mid = generalized_geodesic(plan, alpha).measure
    w = plan.base.points
    pairing = _msq(w, mid.points)
    rhs = (
        (1.0 - alpha) * wasserstein_squared(plan.base, plan.mu0)
        + alpha * wasserstein_squared(plan.base, plan.mu1)
        - alpha * (1.0 - alpha) * pseudo_metric_squared(plan)
    )
    return IdentityCheck(abs(pairing - rhs), pairing, wasserstein_squared(plan.base, mid))


def check_transport_geodesic_identity(
    omega: ParticleMeasure,
    nu: ParticleMeasure,
    mu0: ParticleMeasure,
    mu1: ParticleMeasure,
    alpha: float,
) -> float:
    """Residual of the parallelogram law for ``W_{2,omega}^2(nu, .)`` along
    the generalized geodesic with base ``omega``.

    The map from ``omega`` to the interpolant is re-solved from scratch
    rather than assumed to be the convex combination of the legs.
    """
    alpha = _check_alpha(alpha)
    plan = BasedPlan(
        omega,
        mu0,
        mu1,
        unique_optimal_map(omega, mu0).assignment,
        unique_optimal_map(omega, mu1).assignment,
    )
    mid = generalized_geodesic(plan, alpha).measure
    lhs = transport_metric_squared(omega, nu, mid)
    rhs = (
        (1.0 - alpha) * transport_metric_squared(omega, nu, mu0)
        + alpha * transport_metric_squared(omega, nu, mu1)
        - alpha * (1.0 - alpha) * transport_metric_squared(omega, mu0, mu1)
    )
    return abs(lhs - rhs)


@dataclass(frozen=True, eq=False)
class GlueResult:
    """Four points per base atom: ``(w_i, x_{sigma0(i)}, y_{sigma1(i)}, z_{sigma_nu(i)})``."""

    quadruples: np.ndarray  # (N, 4, d)
    alpha: float
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def four_point_glue(
    omega: ParticleMeasure,
    mu0: ParticleMeasure,
    mu1: ParticleMeasure,
    nu: ParticleMeasure,
    alpha: float,
) -> GlueResult:
    """Glue the optimal couplings from ``omega`` to ``mu0``, ``mu1`` and ``nu``
    along the base, then compare the plan distance from ``nu`` to the
    interpolant with its convex-combination expansion."""
    alpha = _check_alpha(alpha)
    quads = np.stack(
        [
            omega.points,
            unique_optimal_map(omega, mu0).images(),
            unique_optimal_map(omega, mu1).images(),
            unique_optimal_map(omega, nu).images(),
        ],
        axis=1,
    )
    _, x, y, z = (quads[:, k, :] for k in range(4))
    mid = (1.0 - alpha) * x + alpha * y
    lhs = _msq(z, mid)
    rhs = (1.0 - alpha) * _msq(z, x) + alpha * _msq(z, y) - alpha * (1.0 - alpha) * _msq(x, y)
    return GlueResult(quads, alpha, lhs, rhs)
