"""Exact quadratic-cost optimal transport between equal-count particle measures.

The primal assignment comes from :func:`scipy.optimize.linear_sum_assignment`.
On top of it this module adds what the rest of the package relies on:

* the gap to the second-best permutation, so ties can be detected and
  reported instead of silently resolved;
* a deterministic tie-break (lexicographically smallest permutation among
  those within ``TIE_TOL`` of the optimum);
* an exhaustive oracle and a cyclical-monotonicity certificate.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import (
    DimensionMismatch,
    InvalidParameter,
    NonUniqueOptimum,
    SizeMismatch,
    TooLarge,
)
from .measures import ParticleMeasure

TIE_TOL = 1e-12
MONOTONE_TOL = 1e-10
BRUTE_FORCE_MAX = 9


def _check_pair(mu: ParticleMeasure, nu: ParticleMeasure) -> None:
    if mu.n != nu.n:
        raise SizeMismatch(f"measures have {mu.n} and {nu.n} atoms")
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"measures live in R^{mu.dim} and R^{nu.dim}")


def cost_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, computed from differences (never negative)."""
    diff = x[:, None, :] - y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _total(c: np.ndarray, perm: np.ndarray) -> float:
    return float(np.sum(c[np.arange(c.shape[0]), perm]))


def _second_best_gap(c: np.ndarray, perm: np.ndarray) -> float:
    """Cost increase of the cheapest permutation other than ``perm``.

    Any other permutation differs from ``perm`` by disjoint cycles in which
    row ``i`` takes the column of row ``k``; the increase is the sum of
    ``c[i, perm[k]] - c[i, perm[i]]`` along the cycles.  The minimum over
    simple cycles is found with Floyd-Warshall (no negative cycles when
    ``perm`` is optimal).
    """
    n = c.shape[0]
    if n < 2:
        return math.inf
    own = c[np.arange(n), perm]
    dist = c[:, perm] - own[:, None]
    np.fill_diagonal(dist, np.inf)
    for k in range(n):
        np.minimum(dist, dist[:, k : k + 1] + dist[k : k + 1, :], out=dist)
    return float(np.min(np.diagonal(dist)))


def _lex_smallest(c: np.ndarray, best: float, tol: float) -> np.ndarray:
    """Lexicographically smallest permutation with total cost ``<= best + tol``."""
    n = c.shape[0]
    perm = np.empty(n, dtype=np.int64)
    free = list(range(n))
    fixed = 0.0
    for i in range(n):
        rest = np.arange(i + 1, n)
        for j in free:
            cols = [k for k in free if k != j]
            if rest.size:
                sub = c[np.ix_(rest, cols)]
                r, s = linear_sum_assignment(sub)
                tail = float(sub[r, s].sum())
            else:
                tail = 0.0
            if fixed + c[i, j] + tail <= best + tol:
                perm[i] = j
                fixed += c[i, j]
                free.remove(j)
                break
        else:  # pragma: no cover - best came from a feasible permutation
            raise RuntimeError("tie-break search lost the optimum")
    return perm


@dataclass(frozen=True, eq=False)
class TransportMap:
    """Atom ``i`` of ``source`` is sent to atom ``assignment[i]`` of ``target``.

    ``cost`` is the mean squared displacement (``W_2^2`` when optimal);
    ``gap`` is the total-cost margin to the next best permutation, or
    ``nan`` when it was not computed.
    """

    source: ParticleMeasure
    target: ParticleMeasure
    assignment: np.ndarray
    cost: float
    gap: float = math.nan

    @property
    def n(self) -> int:
        return self.source.n

    @property
    def total_cost(self) -> float:
        return self.cost * self.n

    @property
    def unique(self) -> bool:
        return bool(self.gap > TIE_TOL)

    def images(self) -> np.ndarray:
        """``t(x_i)`` for every source atom, in source order."""
        return self.target.points[self.assignment]

    def displacement(self) -> np.ndarray:
        return self.images() - self.source.points

    def to_dict(self) -> dict:
        return {"n": self.n, "assignment": [int(j) for j in self.assignment], "cost": self.cost}

    def as_plan(self) -> "TransportPlan":
        m = 1.0 / self.n
        return TransportPlan(
            self.source, self.target, [(i, int(j), m) for i, j in enumerate(self.assignment)]
        )


@dataclass(frozen=True, eq=False)
class TransportPlan:
    source: ParticleMeasure
    target: ParticleMeasure
    pairs: list

    def marginals(self) -> tuple[np.ndarray, np.ndarray]:
        rows = np.zeros(self.source.n)
        cols = np.zeros(self.target.n)
        for i, j, m in self.pairs:
            rows[i] += m
            cols[j] += m
        return rows, cols

    def is_feasible(self, atol: float = 1e-12) -> bool:
        if any(m <= 0 for _, _, m in self.pairs):
            return False
        rows, cols = self.marginals()
        target = 1.0 / self.source.n
        return bool(np.allclose(rows, target, atol=atol) and np.allclose(cols, target, atol=atol))

    def cost(self) -> float:
        x, y = self.source.points, self.target.points
        return float(sum(m * np.sum((x[i] - y[j]) ** 2) for i, j, m in self.pairs))


def map_from_assignment(mu: ParticleMeasure, nu: ParticleMeasure, assignment) -> TransportMap:
    """Wrap an arbitrary bijection (not necessarily optimal)."""
    _check_pair(mu, nu)
    perm = np.asarray(assignment, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(mu.n)):
        raise InvalidParameter("assignment is not a permutation")
    c = cost_matrix(mu.points, nu.points)
    return TransportMap(mu, nu, perm, _total(c, perm) / mu.n)


def optimal_map(mu: ParticleMeasure, nu: ParticleMeasure, tie_tol: float = TIE_TOL) -> TransportMap:
    """Cost-minimizing assignment, lexicographically smallest among ties."""
    _check_pair(mu, nu)
    c = cost_matrix(mu.points, nu.points)
    _, perm = linear_sum_assignment(c)
    perm = perm.astype(np.int64)
    best = _total(c, perm)
    gap = _second_best_gap(c, perm)
    if gap <= tie_tol:
        perm = _lex_smallest(c, best, tie_tol)
        best = _total(c, perm)
    return TransportMap(mu, nu, perm, best / mu.n, gap)


def wasserstein_squared(mu: ParticleMeasure, nu: ParticleMeasure) -> float:
    """``W_2^2``; skips tie detection since ties do not change the value."""
    _check_pair(mu, nu)
    c = cost_matrix(mu.points, nu.points)
    r, s = linear_sum_assignment(c)
    return float(np.sum(c[r, s])) / mu.n


def wasserstein_distance(mu: ParticleMeasure, nu: ParticleMeasure) -> float:
    return math.sqrt(wasserstein_squared(mu, nu))


def brute_force_map(mu: ParticleMeasure, nu: ParticleMeasure, tie_tol: float = TIE_TOL) -> TransportMap:
    """Exhaustive search over all ``N!`` permutations (``N <= 9``)."""
    _check_pair(mu, nu)
    n = mu.n
    if n > BRUTE_FORCE_MAX:
        raise TooLarge(f"brute force limited to N <= {BRUTE_FORCE_MAX}, got {n}")
    c = cost_matrix(mu.points, nu.points)
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    totals = c[np.arange(n), perms].sum(axis=1)
    low = totals.min()
    pick = int(np.flatnonzero(totals <= low + tie_tol)[0])  # permutations come in lex order
    perm = perms[pick]
    gap = float(np.partition(totals, 1)[1] - low) if n > 1 else math.inf
    return TransportMap(mu, nu, perm, _total(c, perm) / n, gap)


def _min_plus(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.full_like(a, np.inf)
    for k in range(a.shape[1]):
        np.minimum(out, a[:, k : k + 1] + b[k : k + 1, :], out=out)
    return out


def cycle_defect(tmap: TransportMap, cycle_length_max: int) -> float:
    """Most negative ``sum <x_{i_k} - x_{i_{k+1}}, t(x_{i_k})>`` over cycles of bounded length.

    Closed walks are used in place of simple cycles; a negative walk always
    contains a negative simple cycle of no greater length.
    """
    if cycle_length_max < 2:
        raise InvalidParameter("cycle_length_max must be at least 2")
    x, y = tmap.source.points, tmap.images()
    n = x.shape[0]
    if n < 2:
        return 0.0
    inner = np.einsum("ik,ik->i", x, y)
    w = inner[:, None] - y @ x.T  # w[i, j] = <x_i - x_j, y_i>
    np.fill_diagonal(w, 0.0)  # zero self-loops: walks of length <= k
    walks = w
    for _ in range(min(cycle_length_max, n) - 1):
        walks = _min_plus(walks, w)
    return float(min(0.0, np.min(np.diagonal(walks))))


def is_cyclically_monotone(tmap: TransportMap, cycle_length_max: int) -> bool:
    return cycle_defect(tmap, cycle_length_max) >= -MONOTONE_TOL


def compose_inverse(tmap: TransportMap) -> TransportMap:
    """The inverse assignment ``t_nu^mu``; only defined for a unique optimum."""
    if math.isnan(tmap.gap):
        raise NonUniqueOptimum("uniqueness of the assignment was not established")
    if not tmap.unique:
        raise NonUniqueOptimum(f"optimal assignment tied within {tmap.gap:.3g}")
    inv = np.argsort(tmap.assignment)
    return TransportMap(tmap.target, tmap.source, inv, tmap.cost, tmap.gap)


def compose(first: TransportMap, second: TransportMap) -> TransportMap:
    """``second o first``: source of ``first`` to target of ``second``."""
    if first.target is not second.source and not first.target.same_as(second.source, atol=0.0):
        raise InvalidParameter("maps are not composable")
    return map_from_assignment(first.source, second.target, second.assignment[first.assignment])


def unique_optimal_map(mu: ParticleMeasure, nu: ParticleMeasure) -> TransportMap:
    tmap = optimal_map(mu, nu)
    if not tmap.unique:
        raise NonUniqueOptimum(f"optimal assignment tied within {tmap.gap:.3g}")
    return tmap
