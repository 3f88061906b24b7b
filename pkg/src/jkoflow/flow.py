"""Discrete gradient flows and the reference continuous flow.

The continuous flow of a particle energy is the ODE ``x_i' = -xi_i(x)``,
integrated with classical RK4 and accepted only when halving the step
changes no coordinate by more than ``CERT_TOL``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .errors import HypothesisViolated, IntegratorNotConverged, InvalidParameter
from .functionals import Functional, _as_functional, energy, metric_slope
from .measures import ParticleMeasure, make_measure
from .proximal import proximal_step
from .transport import wasserstein_distance

CERT_TOL = 1e-10
DEFAULT_DT = 1.0 / 256
MIN_DT = 2.0**-20
SIMPSON_MIN = 64


# -- discrete flows --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FlowStep:
    time: float
    measure: ParticleMeasure
    energy: float
    slope: float
    step_w2: float  # W_2 from the previous measure; 0 at the start
    el_residual: float = 0.0


@dataclass(eq=False)
class FlowTrace:
    functional: str
    schedule: list  # step sizes h_1..h_m
    lam_minus: float
    steps: list = field(default_factory=list)
    seed: int | None = None

    @property
    def final(self) -> ParticleMeasure:
        return self.steps[-1].measure

    @property
    def measures(self) -> list:
        return [s.measure for s in self.steps]

    def partial_sums(self) -> list:
        """``S_m = h_1 + ... + h_m`` for ``m = 0..len(schedule)``."""
        return [0.0] + list(np.cumsum(self.schedule, dtype=float))

    def partial_products(self) -> list:
        """``P_m = prod_k (1 - lam_minus h_k)^{-1}``."""
        out, p = [1.0], 1.0
        for h in self.schedule:
            p /= 1.0 - self.lam_minus * h
            out.append(p)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "time", "energy", "slope", "step_w2"])
        for k, s in enumerate(self.steps):
            w.writerow([k, _g(s.time), _g(s.energy), _g(s.slope), _g(s.step_w2)])
        return buf.getvalue()


def _g(v: float) -> str:
    return format(float(v), ".17g")


def varying_flow(E, steps, mu0: ParticleMeasure, seed: int | None = None) -> FlowTrace:
    """Apply certified proximal steps ``J_{h_1}, J_{h_2}, ...`` in order."""
    E = _as_functional(E)
    schedule = [float(h) for h in steps]
    trace = FlowTrace(E.spec, schedule, E.lam_minus, seed=seed)
    mu, t = mu0, 0.0
    trace.steps.append(FlowStep(0.0, mu, energy(E, mu), metric_slope(E, mu), 0.0))
    for h in schedule:
        res = proximal_step(E, h, mu)
        t += h
        nxt = res.nu
        trace.steps.append(
            FlowStep(t, nxt, energy(E, nxt), metric_slope(E, nxt), wasserstein_distance(mu, nxt), res.el_residual)
        )
        mu = nxt
    return trace


def discrete_flow(E, tau: float, n: int, mu0: ParticleMeasure, seed: int | None = None) -> FlowTrace:
    """``J_tau^k mu0`` for ``k = 0..n``."""
    if n < 0:
        raise InvalidParameter(f"number of steps must be nonnegative, got {n}")
    return varying_flow(E, [tau] * n, mu0, seed=seed)


def random_schedule(t: float, hmax: float, seed: int) -> list:
    """Steps in ``(0, hmax]`` summing to ``t``, with at least one equal to ``hmax``.

    Interior steps are uniform on ``[hmax/2, hmax]``; the last one absorbs
    the remainder.
    """
    if not (t > 0 and hmax > 0):
        raise InvalidParameter("need t > 0 and hmax > 0")
    if hmax >= t:
        return [float(t)]
    rng = np.random.default_rng(seed)
    steps, total = [hmax], hmax
    while t - total > hmax:
        h = float(rng.uniform(hmax / 2, hmax))
        steps.append(h)
        total += h
    steps.append(t - total)
    order = rng.permutation(len(steps))
    return [steps[i] for i in order]


# -- reference flow ----------------------------------------------------------


def _rk4(E: Functional, x: np.ndarray, t: float, k: int) -> np.ndarray:
    h = t / k
    for _ in range(k):
        a = -E.field(x)
        b = -E.field(x + 0.5 * h * a)
        c = -E.field(x + 0.5 * h * b)
        d = -E.field(x + h * c)
        x = x + (h / 6.0) * (a + 2 * b + 2 * c + d)
    return x


def _advance(E: Functional, x: np.ndarray, t: float, dt: float):
    """Integrate over ``[0, t]``; returns ``(positions, certified dt)``."""
    if t == 0:
        return x.copy(), dt
    while dt >= MIN_DT:
        k = max(1, math.ceil(t / dt - 1e-12))
        coarse = _rk4(E, x, t, k)
        fine = _rk4(E, x, t, 2 * k)
        if np.max(np.abs(fine - coarse)) <= CERT_TOL:
            return fine, dt
        dt /= 2
    raise IntegratorNotConverged(f"step doubling not certified down to dt={MIN_DT:g}")


class ReferenceFlow:
    """``S(t) mu0`` by certified RK4; positions stay indexed like ``mu0``."""

    def __init__(self, E, mu0: ParticleMeasure, dt: float = DEFAULT_DT):
        if not dt > 0:
            raise InvalidParameter("dt must be positive")
        self.E = _as_functional(E)
        self.mu0 = mu0
        self.dt = dt

    def positions(self, times) -> list:
        """Positions at each time; each segment is certified on its own."""
        ts = [float(t) for t in times]
        if any(t < 0 for t in ts):
            raise InvalidParameter("times must be nonnegative")
        order = np.argsort(ts, kind="stable")
        out = [None] * len(ts)
        x, now = np.array(self.mu0.points), 0.0
        for i in order:
            x, _ = _advance(self.E, x, ts[i] - now, self.dt)
            now = ts[i]
            out[i] = x
        return out

    def at(self, t: float) -> ParticleMeasure:
        return make_measure(self.positions([t])[0])

    def trajectory(self, times) -> list:
        return [make_measure(x) for x in self.positions(times)]


def reference_flow(E, mu0: ParticleMeasure, t: float, dt: float = DEFAULT_DT) -> ParticleMeasure:
    if t < 0:
        raise InvalidParameter("t must be nonnegative")
    return ReferenceFlow(E, mu0, dt).at(t)


# -- experiments ---------------------------------------------------------------


@dataclass(frozen=True)
class ExpFormulaRow:
    n: int
    t: float
    error: float
    bound: float
    passed: bool


@dataclass(eq=False)
class ExpFormulaTable:
    rows: list
    slope_fit: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "t", "error", "bound", "pass", "slope_fit"])
        for r in self.rows:
            w.writerow([r.n, _g(r.t), _g(r.error), _g(r.bound), int(r.passed), _g(self.slope_fit)])
        return buf.getvalue()

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.rows)


def exp_formula_bound(lam_minus: float, slope: float, t: float, n: int) -> float:
    return math.sqrt(3.0) * t / math.sqrt(n) * math.exp(3.0 * lam_minus * t) * slope


def loglog_slope(ns, errors) -> float:
    """Least-squares slope of ``log error`` against ``log n`` (zeros dropped)."""
    pts = [(math.log(n), math.log(e)) for n, e in zip(ns, errors) if e > 0]
    if len(pts) < 2:
        return math.nan
    xs, ys = np.array(pts).T
    return float(np.polyfit(xs, ys, 1)[0])


def exponential_formula_experiment(E, mu0: ParticleMeasure, t: float, n_list, dt: float = DEFAULT_DT) -> ExpFormulaTable:
    """``W_2(J_{t/n}^n mu0, S(t) mu0)`` against its a priori bound for each ``n``."""
    E = _as_functional(E)
    lm = E.lam_minus
    ns = [int(n) for n in n_list]
    for n in ns:
        if n < 1 or not n > 2 * lm * t:
            raise HypothesisViolated(f"need n > 2 lambda_minus t, got n={n}, t={t}")
    target = reference_flow(E, mu0, t, dt)
    slope = metric_slope(E, mu0)
    rows = []
    for n in ns:
        final = discrete_flow(E, t / n, n, mu0).final
        err = wasserstein_distance(final, target)
        bound = exp_formula_bound(lm, slope, t, n)
        rows.append(ExpFormulaRow(n, t, err, bound, err <= bound + 1e-9))
    return ExpFormulaTable(rows, loglog_slope(ns, [r.error for r in rows]))


def varying_exp_formula_bound(lam_minus: float, slope: float, t: float, hmax: float) -> float:
    return 2.0 * math.sqrt(hmax**2 + 3.0 * hmax * t) * math.exp(4.0 * lam_minus * t) * slope


@dataclass(frozen=True)
class Check:
    """One inequality ``lhs <= rhs`` evaluated with an absolute tolerance."""

    name: str
    lhs: float
    rhs: float
    tol: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.slack >= -self.tol


def semigroup_checks(
    E,
    mu0: ParticleMeasure,
    t: float,
    s: float,
    nu0: ParticleMeasure | None = None,
    seed: int = 0,
    tol: float = 1e-9,
) -> list:
    """Continuity at zero, the semigroup law, ``lambda``-contraction and the
    time-Lipschitz bound, all on the reference flow.

    ``nu0`` defaults to a seeded perturbation of ``mu0``.
    """
    E = _as_functional(E)
    lm, lam = E.lam_minus, E.lam
    if nu0 is None:
        rng = np.random.default_rng(seed)
        nu0 = make_measure(mu0.points + 0.5 * rng.standard_normal(mu0.points.shape))
    slope = metric_slope(E, mu0)
    flow = ReferenceFlow(E, mu0)
    checks = []

    # continuity at zero: distances on a shrinking grid against the Lipschitz envelope
    for eps in (2.0**-4, 2.0**-8, 2.0**-12):
        d = wasserstein_distance(flow.at(eps), mu0)
        checks.append(Check(f"continuity(eps={eps:g})", d, eps * math.exp(lm * eps) * slope, tol))

    st, ss, sts = flow.trajectory([t, s, t + s])
    composed = ReferenceFlow(E, ss).at(t)
    checks.append(Check("semigroup", wasserstein_distance(sts, composed), 0.0, tol))

    other = reference_flow(E, nu0, t)
    checks.append(
        Check("contraction", wasserstein_distance(st, other), math.exp(-lam * t) * wasserstein_distance(mu0, nu0), tol)
    )
    checks.append(
        Check("lipschitz", wasserstein_distance(st, ss), abs(t - s) * math.exp(lm * t) * math.exp(lm * s) * slope, tol)
    )
    return checks


def energy_dissipation_check(E, mu0: ParticleMeasure, t: float, n: int = 128) -> Check:
    """``int_0^t |dE|^2(mu(s)) ds <= E(mu0) - E(mu(t))`` with composite Simpson."""
    if not t > 0:
        raise InvalidParameter("t must be positive")
    if n < SIMPSON_MIN or n % 2:
        raise InvalidParameter(f"Simpson needs an even n >= {SIMPSON_MIN}")
    E = _as_functional(E)
    grid = np.linspace(0.0, t, n + 1)
    path = ReferenceFlow(E, mu0).trajectory(grid)
    sq = np.array([metric_slope(E, m) ** 2 for m in path])
    integral = float(simpson(sq, x=grid))
    drop = energy(E, path[0]) - energy(E, path[-1])
    return Check("energy_dissipation", integral, drop, 1e-6)

