"""Equal-mass particle measures and seeded instance generation."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import (
    DimensionMismatch,
    EmptyInput,
    InvalidParameter,
    NonFiniteCoordinate,
)

GENERATOR_ID = "numpy-pcg64-v1"


@dataclass(frozen=True, eq=False)
class ParticleMeasure:
    """``N`` atoms of mass ``1/N`` in ``R^d``.

    ``points`` is an ``(N, d)`` float64 array, stored read-only.
    Atom order is kept but carries no meaning; use :meth:`same_as` for
    equality as measures.
    """

    points: np.ndarray

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"ParticleMeasure(n={self.n}, dim={self.dim})"

    def mean(self) -> np.ndarray:
        return self.points.mean(axis=0)

    def same_as(self, other: "ParticleMeasure", atol: float = 1e-9) -> bool:
        """Multiset equality of atoms up to ``atol`` per coordinate."""
        if self.n != other.n or self.dim != other.dim:
            return False
        diff = np.abs(self.points[:, None, :] - other.points[None, :, :]).max(axis=2)
        rows, cols = linear_sum_assignment(diff)
        return bool(diff[rows, cols].max() <= atol)


def make_measure(points) -> ParticleMeasure:
    """Build a measure from a sequence of ``d``-vectors.

    A flat sequence of scalars is read as atoms on the real line.
    """
    if isinstance(points, ParticleMeasure):
        return points
    try:
        arr = np.array(points, dtype=np.float64)
    except ValueError as exc:  # ragged input
        raise DimensionMismatch("atoms must all have the same dimension") from exc
    if arr.size == 0:
        raise EmptyInput("a measure needs at least one atom")
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] == 0:
        raise DimensionMismatch(f"expected an (N, d) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteCoordinate("coordinates must be finite")
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return ParticleMeasure(arr)


def second_moment(mu: ParticleMeasure) -> float:
    return float(np.mean(np.sum(mu.points**2, axis=1)))


def translate(mu: ParticleMeasure, v) -> ParticleMeasure:
    return make_measure(mu.points + np.asarray(v, dtype=np.float64))


def scale(mu: ParticleMeasure, c: float) -> ParticleMeasure:
    return make_measure(mu.points * c)


def permute(mu: ParticleMeasure, order) -> ParticleMeasure:
    return make_measure(mu.points[np.asarray(order)])


@dataclass(frozen=True)
class InstanceSeed:
    seed: int
    generator: str = GENERATOR_ID

    def rng(self, *stream: int) -> np.random.Generator:
        """Independent stream for ``(seed, *stream)``."""
        if self.generator != GENERATOR_ID:
            raise InvalidParameter(f"unknown generator {self.generator!r}")
        if self.seed < 0 or self.seed >= 2**64:
            raise InvalidParameter("seed must be an unsigned 64-bit integer")
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, *stream])))


def random_measure(seed, n: int, d: int, box: float = 1.0, stream: int = 0) -> ParticleMeasure:
    """``n`` points uniform in ``[-box, box]^d`` drawn from a seeded stream."""
    if not isinstance(seed, InstanceSeed):
        seed = InstanceSeed(int(seed))
    if n < 1 or d < 1 or not box > 0:
        raise InvalidParameter(f"need n >= 1, d >= 1, box > 0 (got {n}, {d}, {box})")
    rng = seed.rng(stream)
    return make_measure(rng.uniform(-box, box, size=(n, d)))


def measure_to_csv(mu: ParticleMeasure) -> str:
    """Serialize as ``dim,n`` followed by one row of coordinates per atom."""
    lines = [f"{mu.dim},{mu.n}"]
    lines.extend(",".join(format(v, ".17g") for v in row) for row in mu.points)
    return "\n".join(lines) + "\n"


def measure_from_csv(text: str) -> ParticleMeasure:
    rows = [ln.strip() for ln in io.StringIO(text) if ln.strip()]
    if not rows:
        raise EmptyInput("empty measure file")
    try:
        dim, n = (int(v) for v in rows[0].split(","))
    except ValueError as exc:
        raise InvalidParameter(f"bad header {rows[0]!r}; expected 'dim,n'") from exc
    body = [[float(v) for v in r.split(",")] for r in rows[1:]]
    if len(body) != n:
        raise DimensionMismatch(f"header announces {n} atoms, found {len(body)}")
    if any(len(r) != dim for r in body):
        raise DimensionMismatch(f"every atom must have {dim} coordinates")
    return make_measure(body)


def save_measure(mu: ParticleMeasure, path) -> None:
    Path(path).write_text(measure_to_csv(mu))


def load_measure(path) -> ParticleMeasure:
    return measure_from_csv(Path(path).read_text())
