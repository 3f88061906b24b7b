"""Inequality harness: each kind evaluates one inequality on one instance.

Both sides are rebuilt from primitives (proximal steps, optimal maps,
energies, slopes) inside the checker, so a bug in :mod:`jkoflow.flow`
cannot cancel against the same bug here.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .errors import HypothesisViolated, InvalidParameter, JKOError
from .flow import ReferenceFlow, random_schedule
from .functionals import (
    COSINE,
    INTERACTION,
    QUADRATIC,
    QUADRATIC_COSINE,
    QUADRATIC_INTERACTION,
    _as_functional,
    energy,
    infimum,
    metric_slope,
)
from .geometry import based_plan, generalized_geodesic, pseudo_metric_squared
from .measures import InstanceSeed, ParticleMeasure, make_measure, random_measure
from .proximal import proximal_step
from .transport import optimal_map, unique_optimal_map, wasserstein_distance, wasserstein_squared

REL_TOL = 1e-8
FLOW_TOL = 1e-6

KINDS = (
    "slope_chain",
    "discrete_evi",
    "transport_evi",
    "contraction_pos",
    "contraction_neg",
    "iterated_contraction",
    "asymmetric_recursive",
    "linear_growth",
    "rasmussen_bound",
    "gen_geo_convexity",
    "varying_recursive",
    "varying_linear_growth",
    "varying_rasmussen",
    "varying_exp_formula",
    "exp_formula",
    "evi_along_flow",
)
#: recorded as data only; never counted as a failure
INFORMATIONAL = ("exact_contraction",)
ALL_KINDS = KINDS + INFORMATIONAL

FUNCTIONALS = (QUADRATIC, COSINE, QUADRATIC_COSINE, INTERACTION, QUADRATIC_INTERACTION)
_POSITIVE = (QUADRATIC, QUADRATIC_INTERACTION)
_NONPOSITIVE = ("zero", COSINE, QUADRATIC_COSINE, INTERACTION)


@dataclass(frozen=True, eq=False)
class Instance:
    """Everything a checker may need; unused fields are ignored."""

    functional: str = "zero"
    mu: ParticleMeasure | None = None
    nu: ParticleMeasure | None = None
    omega: ParticleMeasure | None = None
    tau: float = 0.5
    h: float = 0.25
    n: int = 1
    m: int = 1
    t: float = 1.0
    alpha: float = 0.5
    steps: tuple = ()
    seed: int = 0

    def params(self, kind: str) -> dict:
        keys = _PARAM_KEYS.get(kind, ())
        return {k: (list(getattr(self, k)) if k == "steps" else getattr(self, k)) for k in keys}


_PARAM_KEYS = {
    "slope_chain": ("tau",),
    "discrete_evi": ("tau",),
    "transport_evi": ("tau",),
    "contraction_pos": ("tau",),
    "contraction_neg": ("tau",),
    "exact_contraction": ("tau",),
    "iterated_contraction": ("tau", "n"),
    "asymmetric_recursive": ("tau", "h", "n", "m"),
    "linear_growth": ("tau", "n"),
    "rasmussen_bound": ("tau", "h", "n", "m"),
    "gen_geo_convexity": ("alpha",),
    "varying_recursive": ("tau", "n", "steps"),
    "varying_linear_growth": ("steps",),
    "varying_rasmussen": ("tau", "n", "steps"),
    "varying_exp_formula": ("t", "steps"),
    "exp_formula": ("t", "n"),
    "evi_along_flow": ("t",),
}


@dataclass(frozen=True, eq=False)
class InequalityReport:
    kind: str
    seed: int
    functional: str
    n_atoms: int
    dim: int
    params: dict
    lhs: float
    rhs: float
    tolerance: float
    details: dict = field(default_factory=dict)
    ok: bool = True  # side conditions attached by the checker

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.ok and self.slack >= -self.tolerance

    def row(self) -> list:
        return [
            self.kind,
            self.seed,
            self.functional,
            self.n_atoms,
            self.dim,
            json.dumps(self.params, sort_keys=True),
            _g(self.lhs),
            _g(self.rhs),
            _g(self.slack),
            int(self.passed),
        ]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "functional": self.functional,
            "n_atoms": self.n_atoms,
            "dim": self.dim,
            "params": self.params,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "details": self.details,
        }


def _g(v) -> str:
    return format(float(v), ".17g")


def rel_tol(lhs: float, rhs: float) -> float:
    return REL_TOL * (1.0 + abs(lhs) + abs(rhs))


class _Ctx:
    """Per-check state: the energy and the largest EL residual seen."""

    def __init__(self, inst: Instance):
        self.inst = inst
        self.E = _as_functional(inst.functional)
        self.lam = self.E.lam
        self.lm = self.E.lam_minus
        self.max_el = 0.0

    def J(self, tau: float, mu: ParticleMeasure) -> ParticleMeasure:
        res = proximal_step(self.E, tau, mu)
        self.max_el = max(self.max_el, res.el_residual)
        return res.nu

    def orbit(self, steps, mu: ParticleMeasure) -> list:
        out = [mu]
        for h in steps:
            out.append(self.J(h, out[-1]))
        return out

    def require(self, cond: bool, why: str) -> None:
        if not cond:
            raise HypothesisViolated(why)

    def step_ok(self, tau: float) -> bool:
        return tau > 0 and self.lm * tau < 1.0

    def energy(self, mu):
        return energy(self.E, mu)

    def slope(self, mu):
        return metric_slope(self.E, mu)


def _report(kind, ctx: _Ctx, lhs, rhs, tol=None, details=None, ok=True) -> InequalityReport:
    inst = ctx.inst
    lhs, rhs = float(lhs), float(rhs)
    d = dict(details or {})
    d["max_el_residual"] = ctx.max_el
    return InequalityReport(
        kind,
        inst.seed,
        ctx.E.spec,
        inst.mu.n,
        inst.mu.dim,
        inst.params(kind),
        lhs,
        rhs,
        rel_tol(lhs, rhs) if tol is None else tol,
        d,
        ok,
    )


# -- checkers ------------------------------------------------------------------


def _slope_chain(ctx: _Ctx):
    tau, mu = ctx.inst.tau, ctx.inst.mu
    ctx.require(ctx.step_ok(tau), "need 0 < tau < 1/lambda_minus")
    nu = ctx.J(tau, mu)
    w2 = wasserstein_squared(mu, nu)
    gap = ctx.energy(mu) - ctx.energy(nu) - w2 / (2 * tau)
    c = 1.0 + ctx.lam * tau
    links = [
        (tau**2 * ctx.slope(nu) ** 2, w2),
        (w2, 2 * tau / c * gap),
        (2 * tau / c * gap, tau**2 / c**2 * ctx.slope(mu) ** 2),
    ]
    worst = min(range(3), key=lambda k: (links[k][1] - links[k][0]) / (1 + abs(links[k][0]) + abs(links[k][1])))
    lhs, rhs = links[worst]
    return lhs, rhs, {"links": [[a, b] for a, b in links], "worst_link": worst}


def _evi_sides(ctx: _Ctx, w2_after: float, mu, nu, J, tau):
    lhs = (w2_after - wasserstein_squared(mu, nu)) / (2 * tau) + 0.5 * ctx.lam * w2_after
    rhs = ctx.energy(nu) - ctx.energy(J) - wasserstein_squared(mu, J) / (2 * tau)
    return lhs, rhs


def _discrete_evi(ctx: _Ctx):
    i = ctx.inst
    ctx.require(ctx.step_ok(i.tau), "need 0 < tau < 1/lambda_minus")
    J = ctx.J(i.tau, i.mu)
    lhs, rhs = _evi_sides(ctx, wasserstein_squared(J, i.nu), i.mu, i.nu, J, i.tau)
    return lhs, rhs, {}


def _transport_evi(ctx: _Ctx):
    """The ``W_{2,mu}`` form; also checks it is at least as strong as the plain one."""
    i = ctx.inst
    ctx.require(ctx.step_ok(i.tau), "need 0 < tau < 1/lambda_minus")
    J = ctx.J(i.tau, i.mu)
    a = unique_optimal_map(i.mu, J).images()
    b = unique_optimal_map(i.mu, i.nu).images()
    w2mu = float(np.mean(np.sum((a - b) ** 2, axis=1)))
    lhs, rhs = _evi_sides(ctx, w2mu, i.mu, i.nu, J, i.tau)
    plain_lhs, plain_rhs = _evi_sides(ctx, wasserstein_squared(J, i.nu), i.mu, i.nu, J, i.tau)
    plain_slack = plain_rhs - plain_lhs
    ordered = (rhs - lhs) <= plain_slack + rel_tol(lhs, rhs)
    return lhs, rhs, {"discrete_evi_slack": plain_slack, "ordered": ordered}, ordered


def _contraction(ctx: _Ctx, positive: bool):
    i = ctx.inst
    if positive:
        ctx.require(ctx.lam > 0, "branch needs lambda > 0")
    else:
        ctx.require(ctx.lam <= 0, "branch needs lambda <= 0")
    ctx.require(ctx.step_ok(i.tau), "need 0 < tau < 1/lambda_minus")
    Jm, Jn = ctx.J(i.tau, i.mu), ctx.J(i.tau, i.nu)
    lhs = (1 + ctx.lam * i.tau) ** 2 * wasserstein_squared(Jm, Jn)
    rhs = wasserstein_squared(i.mu, i.nu) + i.tau**2 * ctx.slope(i.mu) ** 2
    details = {}
    if positive:
        inf_e = infimum(ctx.E, i.mu.n, i.mu.dim)
        rhs += 2 * ctx.lam * i.tau**2 * (ctx.energy(i.nu) - inf_e)
        details["inf_energy"] = inf_e
    return lhs, rhs, details


def _exact_contraction(ctx: _Ctx):
    i = ctx.inst
    ctx.require(ctx.step_ok(i.tau), "need 0 < tau < 1/lambda_minus")
    return wasserstein_distance(ctx.J(i.tau, i.mu), ctx.J(i.tau, i.nu)), wasserstein_distance(i.mu, i.nu), {}


def _iterated_contraction(ctx: _Ctx):
    i = ctx.inst
    ctx.require(ctx.step_ok(i.tau) and i.n >= 0, "need 0 < tau < 1/lambda_minus and n >= 0")
    a = ctx.orbit([i.tau] * i.n, i.mu)[-1]
    b = ctx.orbit([i.tau] * i.n, i.nu)[-1]
    lhs = wasserstein_squared(a, b)
    c = (1 + ctx.lam * i.tau) ** (-2 * i.n)
    sl2 = ctx.slope(i.mu) ** 2
    if ctx.lam > 0:
        inf_e = infimum(ctx.E, i.mu.n, i.mu.dim)
        rhs = c * wasserstein_squared(i.mu, i.nu) + i.n * i.tau**2 * (sl2 + 2 * ctx.lam * (ctx.energy(i.nu) - inf_e))
    else:
        rhs = c * wasserstein_squared(i.mu, i.nu) + i.n * i.tau**2 * c * sl2
    return lhs, rhs, {"branch": "positive" if ctx.lam > 0 else "nonpositive"}


def _two_step_hyp(ctx: _Ctx, tau, hs):
    ok = ctx.step_ok(tau) and all(0 < h <= tau for h in hs)
    ctx.require(ok, "need 0 < h <= tau < 1/lambda_minus")


def _asymmetric_recursive(ctx: _Ctx):
    i = ctx.inst
    _two_step_hyp(ctx, i.tau, [i.h])
    ctx.require(i.n >= 1 and i.m >= 1, "need n, m >= 1")
    big = ctx.orbit([i.tau] * i.n, i.mu)
    small = ctx.orbit([i.h] * i.m, i.mu)
    lm, h, tau = ctx.lm, i.h, i.tau
    lhs = (1 - lm * h) ** 2 * wasserstein_squared(big[-1], small[-1])
    rhs = (
        h / tau / (1 - lm * tau) * wasserstein_squared(big[-2], small[-2])
        + (tau - h) / tau * wasserstein_squared(small[-2], big[-1])
        + 2 * h**2 * (1 - lm * h) ** (-2 * i.m) * ctx.slope(i.mu) ** 2
    )
    return lhs, rhs, {}


def _linear_growth(ctx: _Ctx):
    i = ctx.inst
    ctx.require(ctx.step_ok(i.tau) and i.n >= 0, "need 0 < tau < 1/lambda_minus")
    end = ctx.orbit([i.tau] * i.n, i.mu)[-1]
    lhs = wasserstein_distance(end, i.mu)
    rhs = i.n * i.tau / (1 - i.tau * ctx.lm) ** i.n * ctx.slope(i.mu)
    return lhs, rhs, {}


def _rasmussen(ctx: _Ctx):
    i = ctx.inst
    _two_step_hyp(ctx, i.tau, [i.h])
    ctx.require(i.n >= 0 and i.m >= 0, "need n, m >= 0")
    a = ctx.orbit([i.tau] * i.n, i.mu)[-1]
    b = ctx.orbit([i.h] * i.m, i.mu)[-1]
    lm, tau, h, n, m = ctx.lm, i.tau, i.h, i.n, i.m
    lhs = wasserstein_squared(a, b)
    rhs = (
        ((n * tau - m * h) ** 2 + tau * h * m + 2 * tau**2 * n)
        * (1 - lm * tau) ** (-2 * n)
        * (1 - lm * h) ** (-2 * m)
        * ctx.slope(i.mu) ** 2
    )
    return lhs, rhs, {}


def _gen_geo_convexity(ctx: _Ctx):
    i = ctx.inst
    plan = based_plan(i.omega, i.mu, i.nu)
    mid = generalized_geodesic(plan, i.alpha).measure
    a = i.alpha
    lhs = ctx.energy(mid)
    rhs = (1 - a) * ctx.energy(i.mu) + a * ctx.energy(i.nu) - a * (1 - a) * 0.5 * ctx.lam * pseudo_metric_squared(plan)
    return lhs, rhs, {}


def _prefix(ctx: _Ctx, steps):
    S = float(sum(steps))
    P = float(np.prod([1.0 / (1.0 - ctx.lm * h) for h in steps])) if steps else 1.0
    return S, P


def _varying_recursive(ctx: _Ctx):
    i = ctx.inst
    steps = list(i.steps)
    _two_step_hyp(ctx, i.tau, steps)
    ctx.require(i.n >= 1 and len(steps) >= 1, "need n, m >= 1")
    big = ctx.orbit([i.tau] * i.n, i.mu)
    small = ctx.orbit(steps, i.mu)
    lm, tau, hm = ctx.lm, i.tau, steps[-1]
    _, P = _prefix(ctx, steps)
    lhs = (1 - lm * hm) ** 2 * wasserstein_squared(big[-1], small[-1])
    rhs = (
        hm / tau / (1 - lm * tau) * wasserstein_squared(big[-2], small[-2])
        + (tau - hm) / tau * wasserstein_squared(small[-2], big[-1])
        + 2 * hm**2 * P**2 * ctx.slope(i.mu) ** 2
    )
    return lhs, rhs, {}


def _varying_linear_growth(ctx: _Ctx):
    i = ctx.inst
    steps = list(i.steps)
    ctx.require(all(ctx.step_ok(h) for h in steps), "need 0 < h_k < 1/lambda_minus")
    end = ctx.orbit(steps, i.mu)[-1]
    S, P = _prefix(ctx, steps)
    return wasserstein_distance(end, i.mu), ctx.slope(i.mu) * S * P, {"S_m": S, "P_m": P}


def _varying_rasmussen(ctx: _Ctx):
    i = ctx.inst
    steps = list(i.steps)
    _two_step_hyp(ctx, i.tau, steps)
    a = ctx.orbit([i.tau] * i.n, i.mu)[-1]
    b = ctx.orbit(steps, i.mu)[-1]
    S, P = _prefix(ctx, steps)
    tau, n = i.tau, i.n
    lhs = wasserstein_squared(a, b)
    rhs = ((n * tau - S) ** 2 + tau * S + 2 * tau**2 * n) * (1 - ctx.lm * tau) ** (-2 * n) * P**2 * ctx.slope(i.mu) ** 2
    return lhs, rhs, {"S_m": S, "P_m": P}


def _varying_exp_formula(ctx: _Ctx):
    i = ctx.inst
    steps = list(i.steps)
    ctx.require(len(steps) > 0 and all(h > 0 for h in steps), "need a nonempty schedule")
    hmax = max(steps)
    ctx.require(2 * ctx.lm * hmax <= 1.0, "need |h| <= 1/(2 lambda_minus)")
    t = float(sum(steps))
    end = ctx.orbit(steps, i.mu)[-1]
    ref = ReferenceFlow(ctx.E, i.mu).at(t)
    lhs = wasserstein_distance(end, ref)
    rhs = 2 * math.sqrt(hmax**2 + 3 * hmax * t) * math.exp(4 * ctx.lm * t) * ctx.slope(i.mu)
    return lhs, rhs, {"hmax": hmax, "t": t}


def _exp_formula(ctx: _Ctx):
    i = ctx.inst
    ctx.require(i.n >= 1 and i.n > 2 * ctx.lm * i.t, "need n > 2 lambda_minus t")
    end = ctx.orbit([i.t / i.n] * i.n, i.mu)[-1]
    ref = ReferenceFlow(ctx.E, i.mu).at(i.t)
    lhs = wasserstein_distance(end, ref)
    rhs = math.sqrt(3) * i.t / math.sqrt(i.n) * math.exp(3 * ctx.lm * i.t) * ctx.slope(i.mu)
    return lhs, rhs, {}


EVI_STENCIL = 1e-2


def _evi_along_flow(ctx: _Ctx):
    """EVI at probe time ``t`` against ``omega = nu``.

    The time derivative comes from a five-point stencil applied to the
    squared matching cost with the matching frozen at ``t``: that function
    equals ``W_2^2`` at ``t``, is smooth, and its derivative is the one-sided
    derivative of ``W_2^2`` along the active matching.
    """
    i = ctx.inst
    h = EVI_STENCIL
    ctx.require(i.t >= 2 * h, f"probe time must be >= {2 * h}")
    xs = ReferenceFlow(ctx.E, i.mu).positions([i.t + k * h for k in (-2, -1, 0, 1, 2)])
    now = make_measure(xs[2])
    targets = optimal_map(now, i.nu).images()
    f = [float(np.mean(np.sum((x - targets) ** 2, axis=1))) for x in xs]
    deriv = (f[0] - 8 * f[1] + 8 * f[3] - f[4]) / (12 * h)
    lhs = 0.5 * deriv + 0.5 * ctx.lam * f[2]
    rhs = ctx.energy(i.nu) - ctx.energy(now)
    return lhs, rhs, {"w2_squared": f[2]}, True, FLOW_TOL


_CHECKERS = {
    "slope_chain": _slope_chain,
    "discrete_evi": _discrete_evi,
    "transport_evi": _transport_evi,
    "contraction_pos": lambda c: _contraction(c, True),
    "contraction_neg": lambda c: _contraction(c, False),
    "exact_contraction": _exact_contraction,
    "iterated_contraction": _iterated_contraction,
    "asymmetric_recursive": _asymmetric_recursive,
    "linear_growth": _linear_growth,
    "rasmussen_bound": _rasmussen,
    "gen_geo_convexity": _gen_geo_convexity,
    "varying_recursive": _varying_recursive,
    "varying_linear_growth": _varying_linear_growth,
    "varying_rasmussen": _varying_rasmussen,
    "varying_exp_formula": _varying_exp_formula,
    "exp_formula": _exp_formula,
    "evi_along_flow": _evi_along_flow,
}


def check(kind: str, instance: Instance) -> InequalityReport:
    """Evaluate one inequality.

    Raises
    ------
    HypothesisViolated
        If the instance parameters fall outside the inequality's hypotheses.
    """
    if kind not in _CHECKERS:
        raise InvalidParameter(f"unknown kind {kind!r}")
    if instance.mu is None:
        raise InvalidParameter("instance needs at least mu")
    ctx = _Ctx(instance)
    out = _CHECKERS[kind](ctx)
    lhs, rhs, details = out[:3]
    ok = out[3] if len(out) > 3 else True
    tol = out[4] if len(out) > 4 else None
    return _report(kind, ctx, lhs, rhs, tol, details, ok)


# -- instance generation and sweeps --------------------------------------------


def default_size(seed: int) -> tuple[int, int]:
    return 1 + seed % 8, 1 + (seed // 8) % 3


def _functional_for(kind: str, seed: int) -> str:
    if kind == "contraction_pos":
        pool = _POSITIVE
    elif kind == "contraction_neg":
        pool = _NONPOSITIVE
    else:
        pool = FUNCTIONALS
    return pool[(seed // 24) % len(pool)]  # sizes cycle every 24 seeds


def make_instance(kind: str, seed: int, n_atoms: int | None = None, dim: int | None = None, functional: str | None = None) -> Instance:
    """Seeded instance satisfying the hypotheses of ``kind``."""
    if kind not in _CHECKERS:
        raise InvalidParameter(f"unknown kind {kind!r}")
    N, d = default_size(seed)
    N, d = n_atoms or N, dim or d
    spec = functional or _functional_for(kind, seed)
    lm = _as_functional(spec).lam_minus
    rng = InstanceSeed(seed).rng(ALL_KINDS.index(kind) + 1)
    mu = random_measure(seed, N, d, stream=0)
    nu = random_measure(seed, N, d, stream=1)
    omega = random_measure(seed, N, d, stream=2)
    cap = 0.95 / lm if lm > 0 else 2.0
    tau = float(rng.uniform(0.05, cap))
    h = tau * float(rng.uniform(0.05, 1.0))
    n = int(rng.integers(1, 5))
    m = int(rng.integers(1, 9))
    steps = tuple(float(x) for x in tau * rng.uniform(0.05, 1.0, size=int(rng.integers(1, 7))))
    alpha = float(rng.uniform(0.0, 1.0))
    t = float(rng.uniform(2 * EVI_STENCIL, 1.0))
    if kind == "exp_formula":
        t = float(rng.choice([0.25, 1.0]))
        n = int(rng.choice([4, 8, 16, 32]))
    elif kind == "varying_exp_formula":
        t = float(rng.choice([0.25, 1.0]))
        hmax = float(rng.choice([0.1, 0.05, 0.025]))
        steps = tuple(random_schedule(t, hmax, seed))
    elif kind == "rasmussen_bound":
        n, m = int(rng.integers(0, 5)), int(rng.integers(0, 9))
    return Instance(spec, mu, nu, omega, tau, h, n, m, t, alpha, steps, seed)


@dataclass(eq=False)
class SweepSummary:
    reports: list
    counts: dict
    worst_slack: dict
    worst_relative: dict
    max_el_residual: float
    grid: dict
    elapsed: float = 0.0
    errors: list = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(c["failed"] for k, c in self.counts.items() if k not in INFORMATIONAL)

    @property
    def ok(self) -> bool:
        return self.failures == 0 and not any(c["errors"] for c in self.counts.values())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "seed", "functional", "n_atoms", "dim", "params", "lhs", "rhs", "slack", "pass"])
        for r in self.reports:
            w.writerow(r.row())
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "tool_version": __version__,
            "grid": self.grid,
            "counts": self.counts,
            "worst_slack": self.worst_slack,
            "worst_relative_slack": self.worst_relative,
            "max_el_residual": self.max_el_residual,
            "failures": self.failures,
            "errors": self.errors,
        }


def parse_kinds(kinds) -> list:
    if isinstance(kinds, str):
        kinds = [k.strip() for k in kinds.split(",") if k.strip()]
    out = []
    for k in kinds:
        if k == "all":
            out.extend(KINDS)
        elif k in _CHECKERS:
            out.append(k)
        else:
            raise InvalidParameter(f"unknown kind {k!r}")
    if not out:
        raise InvalidParameter("no kinds given")
    return list(dict.fromkeys(out))


def sweep(kinds, seeds, sizes=None, functionals=None) -> SweepSummary:
    """Run every kind over ``seeds`` (times ``sizes`` times ``functionals``).

    Without ``sizes`` each seed picks its own ``(N, d)``; without
    ``functionals`` each seed picks an energy from a fixed cycle.
    Hypothesis violations and solver errors are tallied, never raised.
    """
    kinds = parse_kinds(kinds)
    seeds = [int(s) for s in seeds]
    start = time.perf_counter()
    reports, errors = [], []
    counts = {k: {"total": 0, "passed": 0, "failed": 0, "hypothesis_violated": 0, "errors": 0} for k in kinds}
    worst, worst_rel = {}, {}
    max_el = 0.0
    size_grid = list(sizes) if sizes else [None]
    func_grid = list(functionals) if functionals else [None]
    for kind in kinds:
        c = counts[kind]
        for seed in seeds:
            for size in size_grid:
                for spec in func_grid:
                    c["total"] += 1
                    N, d = size if size else (None, None)
                    try:
                        inst = make_instance(kind, seed, N, d, spec)
                        rep = check(kind, inst)
                    except HypothesisViolated:
                        c["hypothesis_violated"] += 1
                        continue
                    except JKOError as exc:
                        c["errors"] += 1
                        errors.append({"kind": kind, "seed": seed, "error": f"{type(exc).__name__}: {exc}"})
                        continue
                    reports.append(rep)
                    c["passed" if rep.passed else "failed"] += 1
                    max_el = max(max_el, rep.details.get("max_el_residual", 0.0))
                    rel = rep.slack / (1 + abs(rep.lhs) + abs(rep.rhs))
                    if kind not in worst or rep.slack < worst[kind]:
                        worst[kind] = rep.slack
                    if kind not in worst_rel or rel < worst_rel[kind]:
                        worst_rel[kind] = rel
    grid = {
        "kinds": kinds,
        "seeds": [min(seeds), max(seeds), len(seeds)] if seeds else [],
        "sizes": [list(s) for s in sizes] if sizes else "per-seed",
        "functionals": list(functionals) if functionals else "per-seed cycle",
    }
    return SweepSummary(reports, counts, worst, worst_rel, max_el, grid, time.perf_counter() - start, errors)


def with_params(instance: Instance, **changes) -> Instance:
    return replace(instance, **changes)
