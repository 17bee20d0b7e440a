"""Signature (n,1) Hermitian form on C^{n+1} and the ball chart.

Vectors ("lifts") are complex arrays whose last axis has length n+1.
Index 0 is the negative direction:

    <x, y> = -x_0 conj(y_0) + sum_k x_k conj(y_k)

All functions broadcast over leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

NULL_TOL = 1e-9
BOUNDARY_TOL = 1e-9


class BudgetExhausted(ValueError):
    """A computation needs more elements, samples or word length than allowed."""


class GeometryError(ValueError):
    """Raised when an input lies outside the domain of an operation."""


class PointClass(str, Enum):
    NEGATIVE = "negative"
    NULL = "null"
    POSITIVE = "positive"


@dataclass(frozen=True)
class FormSpace:
    """C^{n+1} with the form diag(-1, 1, ..., 1)."""

    n: int

    def __post_init__(self):
        if int(self.n) < 1:
            raise GeometryError(f"complex dimension must be >= 1, got {self.n}")

    @property
    def dim(self) -> int:
        return self.n + 1

    @cached_property
    def J(self) -> np.ndarray:
        return form_matrix(self.n)


def form_matrix(n: int) -> np.ndarray:
    d = np.ones(n + 1)
    d[0] = -1.0
    return np.diag(d).astype(complex)


def form_inner(x, y) -> complex | np.ndarray:
    """Hermitian form, linear in ``x`` and conjugate-linear in ``y``."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if x.shape[-1] != y.shape[-1]:
        raise GeometryError(f"dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}")
    prod = x * np.conj(y)
    return prod[..., 1:].sum(axis=-1) - prod[..., 0]


def q(x) -> float | np.ndarray:
    """The quadratic form <x, x> (real)."""
    x = np.asarray(x, dtype=complex)
    a = np.abs(x) ** 2
    return a[..., 1:].sum(axis=-1) - a[..., 0]


def normalize_lift(x) -> np.ndarray:
    """Canonical representative of [x].

    Unit Euclidean norm, and the first coordinate of largest modulus is
    made real positive.  Coordinates within a relative 1e-12 of the
    maximum modulus count as tied, so the rule is stable under rounding.
    """
    x = np.asarray(x, dtype=complex)
    nrm = np.linalg.norm(x)
    if not np.isfinite(nrm) or nrm == 0.0:
        raise GeometryError("lift is numerically zero")
    x = x / nrm
    mod = np.abs(x)
    k = int(np.argmax(mod >= mod.max() * (1 - 1e-12)))
    return x * (np.conj(x[k]) / mod[k])


def classify_lift(x, tol: float = NULL_TOL) -> PointClass:
    x = np.asarray(x, dtype=complex)
    nrm = np.linalg.norm(x)
    if not np.isfinite(nrm) or nrm == 0.0:
        raise GeometryError("lift is numerically zero")
    val = q(x / nrm)
    if abs(val) < tol:
        return PointClass.NULL
    return PointClass.NEGATIVE if val < 0 else PointClass.POSITIVE


@dataclass(frozen=True, eq=False)
class ProjectivePoint:
    """A point [x] of P^n, stored through its canonical lift."""

    lift: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "lift", normalize_lift(self.lift))
        self.lift.setflags(write=False)

    @property
    def n(self) -> int:
        return self.lift.shape[-1] - 1

    @property
    def kind(self) -> PointClass:
        return classify_lift(self.lift)

    def __eq__(self, other):
        if not isinstance(other, ProjectivePoint):
            return NotImplemented
        if other.lift.shape != self.lift.shape:
            return False
        # unit lifts are proportional iff |<x, y>_euclid| = 1
        return bool(abs(abs(np.vdot(other.lift, self.lift)) - 1.0) < 1e-12)

    __hash__ = None

    def __repr__(self):
        return f"ProjectivePoint({np.array2string(self.lift, precision=6)}, {self.kind.value})"


def classify_point(p: ProjectivePoint | np.ndarray) -> PointClass:
    lift = p.lift if isinstance(p, ProjectivePoint) else p
    return classify_lift(lift)


@dataclass(frozen=True, eq=False)
class BallPoint:
    """Point of the open unit ball in C^n (chart z_0 = 1)."""

    z: np.ndarray

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=complex))
        if z.ndim != 1:
            raise GeometryError("BallPoint takes a single complex vector")
        if not np.vdot(z, z).real < 1.0:
            raise GeometryError(f"point not inside the ball: |z| = {np.linalg.norm(z)}")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def lift(self) -> np.ndarray:
        return np.concatenate([[1.0 + 0j], self.z])

    def __repr__(self):
        return f"BallPoint({np.array2string(self.z, precision=6)})"


@dataclass(frozen=True, eq=False)
class BoundaryPoint:
    """Point of the sphere S^{2n-1} = boundary of the ball."""

    xi: np.ndarray

    def __post_init__(self):
        xi = np.atleast_1d(np.asarray(self.xi, dtype=complex))
        if xi.ndim != 1:
            raise GeometryError("BoundaryPoint takes a single complex vector")
        r = np.linalg.norm(xi)
        if abs(r - 1.0) > BOUNDARY_TOL:
            raise GeometryError(f"point not on the unit sphere: |xi| = {r}")
        xi = xi / r
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)

    @property
    def n(self) -> int:
        return self.xi.shape[0]

    @property
    def lift(self) -> np.ndarray:
        return np.concatenate([[1.0 + 0j], self.xi])

    def __repr__(self):
        return f"BoundaryPoint({np.array2string(self.xi, precision=6)})"


def project_to_chart(p: ProjectivePoint | np.ndarray) -> BallPoint | BoundaryPoint:
    lift = p.lift if isinstance(p, ProjectivePoint) else np.asarray(p, dtype=complex)
    kind = classify_lift(lift)
    if kind is PointClass.POSITIVE:
        raise GeometryError("positive point has no image in the closed ball")
    z = lift[1:] / lift[0]
    if kind is PointClass.NULL:
        return BoundaryPoint(z / np.linalg.norm(z))
    return BallPoint(z)


def coords(x) -> np.ndarray:
    """Chart coordinates of a BallPoint/BoundaryPoint or an array of them."""
    if isinstance(x, BallPoint):
        return x.z
    if isinstance(x, BoundaryPoint):
        return x.xi
    return np.asarray(x, dtype=complex)


def chart_lift(z) -> np.ndarray:
    """Lift (1, z) for chart coordinates, broadcasting over leading axes."""
    z = np.asarray(z, dtype=complex)
    one = np.ones(z.shape[:-1] + (1,), dtype=complex)
    return np.concatenate([one, z], axis=-1)


def hyperboloid_lift(w) -> np.ndarray:
    """Lift (sqrt(1+|w|^2), w) with q = -1 exactly; w ranges over all of C^n."""
    w = np.asarray(w, dtype=complex)
    x0 = np.sqrt(1.0 + np.sum(np.abs(w) ** 2, axis=-1, keepdims=True))
    return np.concatenate([x0.astype(complex), w], axis=-1)


def to_chart(lift) -> np.ndarray:
    lift = np.asarray(lift, dtype=complex)
    return lift[..., 1:] / lift[..., :1]
