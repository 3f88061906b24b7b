"""Particle energies: values, gradient fields, slopes and subdifferential checks.

Every energy here is a smooth function of the atom positions that treats
all atoms alike.  Its strong subdifferential is the ``L^2(mu)`` gradient,
i.e. ``N`` times the Euclidean gradient with respect to each atom.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import EvaluationError, InvalidParameter, NoConvergence, SizeMismatch
from .measures import ParticleMeasure, make_measure
from .transport import TransportMap, unique_optimal_map

SUBDIFF_TOL = 1e-9


# -- kernels ---------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticKernel:
    """``k |x|^2 / 2``."""

    strength: float = 1.0
    tag = "quadratic"

    @property
    def hessian_bound(self) -> float:
        return self.strength

    def value(self, x: np.ndarray) -> np.ndarray:
        return 0.5 * self.strength * np.sum(x * x, axis=-1)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.strength * x

    def hess(self, x: np.ndarray) -> np.ndarray:
        d = x.shape[-1]
        return np.broadcast_to(self.strength * np.eye(d), x.shape[:-1] + (d, d))

    def params(self) -> dict:
        return {"strength": self.strength}


@dataclass(frozen=True)
class CosineKernel:
    """``a cos(x_1)``; its Hessian is bounded below by ``-|a|``."""

    amplitude: float = 1.0
    tag = "cosine"

    @property
    def hessian_bound(self) -> float:
        return -abs(self.amplitude)

    def value(self, x: np.ndarray) -> np.ndarray:
        return self.amplitude * np.cos(x[..., 0])

    def grad(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros_like(x)
        g[..., 0] = -self.amplitude * np.sin(x[..., 0])
        return g

    def hess(self, x: np.ndarray) -> np.ndarray:
        d = x.shape[-1]
        h = np.zeros(x.shape[:-1] + (d, d))
        h[..., 0, 0] = -self.amplitude * np.cos(x[..., 0])
        return h

    def params(self) -> dict:
        return {"amplitude": self.amplitude}


KERNELS = {"quadratic": (QuadraticKernel, "strength"), "cosine": (CosineKernel, "amplitude")}


# -- functionals -------------------------------------------------------------


class Functional:
    """Base class. Subclasses provide ``lam`` and the evaluation hooks on
    raw ``(N, d)`` arrays; the module-level functions wrap measures."""

    lam: float = 0.0

    @property
    def lam_minus(self) -> float:
        return max(0.0, -self.lam)

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def field(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def field_jacobian(self, x: np.ndarray) -> np.ndarray:
        """``d xi_i / d x_j`` as an ``(N d, N d)`` matrix."""
        raise NotImplementedError

    @property
    def spec(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.spec

    def __add__(self, other: "Functional") -> "Sum":
        left = self.terms if isinstance(self, Sum) else (self,)
        right = other.terms if isinstance(other, Sum) else (other,)
        return Sum(left + right)


@dataclass(frozen=True)
class Zero(Functional):
    lam: float = field(default=0.0, init=False)

    def value(self, x):
        return 0.0

    def field(self, x):
        return np.zeros_like(x)

    def field_jacobian(self, x):
        return np.zeros((x.size, x.size))

    @property
    def spec(self):
        return "zero"


def _param_suffix(kernel, default) -> str:
    (name, val), = kernel.params().items()
    return "" if val == default else f"({name}={val!r})"


@dataclass(frozen=True)
class Potential(Functional):
    """``(1/N) sum_i V(x_i)``."""

    kernel: QuadraticKernel | CosineKernel

    @property
    def lam(self) -> float:
        return self.kernel.hessian_bound

    def value(self, x):
        return float(np.mean(self.kernel.value(x)))

    def field(self, x):
        return self.kernel.grad(x)

    def field_jacobian(self, x):
        n, d = x.shape
        jac = np.zeros((n, d, n, d))
        h = self.kernel.hess(x)
        for i in range(n):
            jac[i, :, i, :] = h[i]
        return jac.reshape(n * d, n * d)

    @property
    def spec(self):
        return f"potential:{self.kernel.tag}{_param_suffix(self.kernel, 1.0)}"


@dataclass(frozen=True)
class Interaction(Functional):
    """``(1/(2N^2)) sum_{i,j} W(x_i - x_j)`` for an even kernel ``W``.

    Translation invariance caps the convexity modulus at zero.
    """

    kernel: QuadraticKernel | CosineKernel

    @property
    def lam(self) -> float:
        return min(0.0, self.kernel.hessian_bound)

    def value(self, x):
        z = x[:, None, :] - x[None, :, :]
        return float(np.sum(self.kernel.value(z))) / (2.0 * x.shape[0] ** 2)

    def field(self, x):
        z = x[:, None, :] - x[None, :, :]
        return self.kernel.grad(z).mean(axis=1)

    def field_jacobian(self, x):
        n, d = x.shape
        z = x[:, None, :] - x[None, :, :]
        h = self.kernel.hess(z) / n  # h[i, j] = W''(x_i - x_j) / N
        jac = -np.transpose(h, (0, 2, 1, 3)).copy()  # (i, a, j, b)
        for i in range(n):
            jac[i, :, i, :] += h[i].sum(axis=0)
        return jac.reshape(n * d, n * d)

    @property
    def spec(self):
        return f"interaction:{self.kernel.tag}{_param_suffix(self.kernel, 1.0)}"


@dataclass(frozen=True)
class Sum(Functional):
    terms: tuple

    @property
    def lam(self) -> float:
        return float(sum(t.lam for t in self.terms))

    def value(self, x):
        return float(sum(t.value(x) for t in self.terms))

    def field(self, x):
        out = np.zeros_like(x)
        for t in self.terms:
            out += t.field(x)
        return out

    def field_jacobian(self, x):
        out = np.zeros((x.size, x.size))
        for t in self.terms:
            out += t.field_jacobian(x)
        return out

    @property
    def spec(self):
        return "sum:[" + ",".join(t.spec for t in self.terms) + "]"


# -- config parsing ----------------------------------------------------------

_ATOM = re.compile(r"^(potential|interaction):(\w+)(?:\((.*)\))?$")


def _split_top(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "[(":
            depth += 1
        elif ch in "])":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts if p.strip()]


def parse_functional(text: str) -> Functional:
    """Parse a functional spec string.

    Grammar::

        zero
        potential:quadratic | potential:cosine        [ "(" name=value ")" ]
        interaction:quadratic | interaction:cosine    [ "(" name=value ")" ]
        sum:[<spec>, <spec>, ...]

    Parameters are ``strength`` for quadratic and ``amplitude`` for cosine
    kernels, e.g. ``potential:quadratic(strength=2)``.
    """
    s = text.strip().replace(" ", "")
    if s == "zero":
        return Zero()
    if s.startswith("sum:[") and s.endswith("]"):
        terms = tuple(parse_functional(p) for p in _split_top(s[5:-1]))
        if not terms:
            raise InvalidParameter("sum needs at least one term")
        return Sum(terms)
    m = _ATOM.match(s)
    if not m:
        raise InvalidParameter(f"cannot parse functional {text!r}")
    kind, tag, args = m.groups()
    if tag not in KERNELS:
        raise InvalidParameter(f"unknown kernel {tag!r}")
    cls, pname = KERNELS[tag]
    kwargs = {}
    if args:
        for item in args.split(","):
            key, _, val = item.partition("=")
            if key != pname:
                raise InvalidParameter(f"kernel {tag!r} takes only {pname!r}")
            kwargs[key] = float(val)
    kernel = cls(**kwargs)
    if kind == "interaction" and tag == "quadratic" and kernel.strength < 0:
        raise InvalidParameter("interaction strength must be nonnegative")
    return Potential(kernel) if kind == "potential" else Interaction(kernel)


QUADRATIC = "potential:quadratic"
COSINE = "potential:cosine"
QUADRATIC_COSINE = "sum:[potential:quadratic,potential:cosine]"
INTERACTION = "interaction:quadratic"
QUADRATIC_INTERACTION = "sum:[potential:quadratic,interaction:quadratic]"

#: the four energies the library ships (lambda = 1, -1, 0, 0)
SHIPPED = (QUADRATIC, COSINE, QUADRATIC_COSINE, INTERACTION)


# -- operations on measures ------------------------------------------------


@dataclass(frozen=True, eq=False)
class SubdifferentialField:
    """One vector per atom of ``base``: an element of ``L^2(base)``."""

    base: ParticleMeasure
    vectors: np.ndarray

    def norm(self) -> float:
        return math.sqrt(float(np.mean(np.sum(self.vectors**2, axis=1))))


def _as_functional(E) -> Functional:
    return parse_functional(E) if isinstance(E, str) else E


def _checked(values, what: str):
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise EvaluationError(f"{what} is not finite")
    return values


def energy(E, mu: ParticleMeasure) -> float:
    return _checked(_as_functional(E).value(mu.points), "energy")


def strong_subdifferential(E, mu: ParticleMeasure) -> SubdifferentialField:
    xi = _checked(_as_functional(E).field(mu.points), "gradient field")
    return SubdifferentialField(mu, np.asarray(xi, dtype=np.float64))


def metric_slope(E, mu: ParticleMeasure) -> float:
    return strong_subdifferential(E, mu).norm()


def l2_inner(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean(np.sum(a * b, axis=1)))


def check_subdifferential(
    E,
    mu: ParticleMeasure,
    xi: SubdifferentialField,
    probes,
    base: ParticleMeasure | None = None,
) -> float:
    """Worst slack of the subdifferential inequality over ``probes``.

    Without ``base`` the pairing is ``<xi, t_mu^nu - id>_{L^2(mu)}`` with
    ``(lam/2) W_2^2(mu, nu)``.  With ``base = omega`` the field must live on
    ``omega`` and the pairing is ``<xi, t_omega^nu - t_omega^mu>_{L^2(omega)}``
    with ``(lam/2) W_{2,omega}^2(mu, nu)``.
    """
    E = _as_functional(E)
    e_mu = energy(E, mu)
    worst = math.inf
    if base is not None:
        if xi.base.n != base.n:
            raise SizeMismatch("field must be indexed by the base measure")
        t_mu = unique_optimal_map(base, mu).images()
    for nu in probes:
        if base is None:
            t = unique_optimal_map(mu, nu)
            disp = t.displacement()
            sq = t.cost
        else:
            disp = unique_optimal_map(base, nu).images() - t_mu
            sq = float(np.mean(np.sum(disp**2, axis=1)))
        slack = energy(E, nu) - e_mu - l2_inner(xi.vectors, disp) - 0.5 * E.lam * sq
        worst = min(worst, slack)
    return worst


def check_W2_squared_subdifferential(omega: ParticleMeasure, mu: ParticleMeasure, probes) -> float:
    """Worst slack of ``2 (t_omega^mu - id)`` as a ``W_{2,omega}`` subgradient of
    ``W_2^2(omega, .)`` with modulus 2.  The inequality is an identity, so the
    result should vanish up to rounding."""
    t_mu = unique_optimal_map(omega, mu)
    xi = 2.0 * (t_mu.images() - omega.points)
    worst = 0.0
    for nu in probes:
        t_nu = unique_optimal_map(omega, nu)
        step = t_nu.images() - t_mu.images()
        slack = t_nu.cost - t_mu.cost - l2_inner(xi, step) - float(np.mean(np.sum(step**2, axis=1)))
        if abs(slack) > abs(worst):
            worst = slack
    return worst


def compose_to_base(xi: SubdifferentialField, omega: ParticleMeasure) -> SubdifferentialField:
    """``xi o t_omega^mu``: the field re-indexed by base atoms."""
    tmap: TransportMap = unique_optimal_map(omega, xi.base)
    return SubdifferentialField(omega, xi.vectors[tmap.assignment])


def infimum(E, n: int, d: int, tol: float = 1e-12, max_iter: int = 200) -> float:
    """``inf E`` over ``n``-atom measures in ``R^d``.

    Closed form for the quadratic potential (and zero); otherwise damped
    Newton on the particle energy started at the origin, certified by
    ``max_i |xi_i| <= tol``.  Only meaningful for ``lam > 0``, where the
    energy is strongly convex in the positions.
    """
    E = _as_functional(E)
    if isinstance(E, Zero):
        return 0.0
    if isinstance(E, Potential) and isinstance(E.kernel, QuadraticKernel) and E.kernel.strength > 0:
        return 0.0
    if E.lam <= 0:
        raise InvalidParameter("infimum is only computed for strongly convex energies")
    x = np.zeros((n, d))
    for _ in range(max_iter):
        g = E.field(x)
        if np.max(np.abs(g)) <= tol:
            return E.value(x)
        step = np.linalg.solve(E.field_jacobian(x), g.ravel()).reshape(n, d)
        t, f0 = 1.0, E.value(x)
        while E.value(x - t * step) > f0 and t > 1e-8:
            t *= 0.5
        x = x - t * step
    raise NoConvergence("infimum: Newton iteration did not certify a minimizer")


def hessian_spot_check(E, mu: ParticleMeasure, directions=8, seed: int = 0, eps: float = 1e-4) -> float:
    """Smallest finite-difference curvature ``N <v, D^2 E v>/|v|^2`` minus ``lam``.

    Negative values beyond finite-difference noise indicate a wrong
    declared modulus.
    """
    E = _as_functional(E)
    rng = np.random.default_rng(seed)
    x = mu.points
    worst = math.inf
    for _ in range(directions):
        v = rng.standard_normal(x.shape)
        v /= math.sqrt(np.mean(np.sum(v * v, axis=1)))
        second = (E.value(x + eps * v) - 2 * E.value(x) + E.value(x - eps * v)) / eps**2
        worst = min(worst, second - E.lam)
    return worst


def perturbed(mu: ParticleMeasure, delta: float, seed: int = 0) -> ParticleMeasure:
    rng = np.random.default_rng(seed)
    return make_measure(mu.points + delta * rng.standard_normal(mu.points.shape))
