"""Metric geometry of complex hyperbolic space in the ball model.

Distances are in the normalization where complex geodesics have
curvature -4 and totally real planes curvature -1, so that
d(0, z) = arctanh|z|.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from math import factorial

import numpy as np
from scipy.optimize import minimize_scalar

from .form import (
    BallPoint,
    BoundaryPoint,
    GeometryError,
    ProjectivePoint,
    chart_lift,
    coords,
    form_inner,
    q,
    to_chart,
)

DELTA0 = float(np.arccosh(np.sqrt(2.0)))

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def _norm2(z):
    return np.sum(np.abs(z) ** 2, axis=-1)


def _hdot(z, w):
    """Euclidean Hermitian product sum z_k conj(w_k)."""
    return np.sum(z * np.conj(w), axis=-1)


def _chart_sinh2(z, w):
    """sinh^2 d(z, w) for chart points, accurate for nearby points.

    Uses |1 - z.w|^2 - (1-|z|^2)(1-|w|^2) = |z-w|^2 - |z ^ w|^2 and
    expresses z ^ w through z ^ (w - z) to avoid cancellation.
    """
    delta = w - z
    diff = _norm2(delta)
    if z.shape[-1] > 1:
        outer = z[..., :, None] * delta[..., None, :]
        wedge = 0.5 * np.sum(np.abs(outer - np.swapaxes(outer, -1, -2)) ** 2, axis=(-1, -2))
    else:
        wedge = 0.0
    num = np.maximum(diff - wedge, 0.0)
    den = (1.0 - _norm2(z)) * (1.0 - _norm2(w))
    return num / den


def distance(x, y) -> float | np.ndarray:
    """Complex hyperbolic distance between points of the open ball.

    Accepts BallPoints or arrays of chart coordinates (broadcasting over
    leading axes).
    """
    z = coords(x)
    w = coords(y)
    z, w = np.broadcast_arrays(z, w)
    if np.any(_norm2(z) >= 1.0) or np.any(_norm2(w) >= 1.0):
        raise GeometryError("distance needs points strictly inside the ball")
    d = np.arcsinh(np.sqrt(_chart_sinh2(z, w)))
    return d if d.ndim else float(d)


def cosh2_lifts(x, y, qx=None, qy=None):
    """cosh^2 of the distance between negative lifts.

    This is |<x,y>|^2 / (q(x) q(y)); the product of the forms rather than
    the literal <x,y><x,y> is what makes cosh^2 d(0, z) = 1/(1-|z|^2).
    Pass ``qx``/``qy`` when the values are known exactly (e.g. -1 for
    hyperboloid lifts), which avoids cancellation far from the origin.
    """
    qx = q(x) if qx is None else qx
    qy = q(y) if qy is None else qy
    return np.abs(form_inner(x, y)) ** 2 / (qx * qy)


def distance_lifts(x, y, qx=None, qy=None):
    """Distance between points given by negative lifts."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    c2 = np.asarray(cosh2_lifts(x, y, qx, qy), dtype=float)
    far = np.arccosh(np.sqrt(np.maximum(c2, 1.0)))
    near_mask = c2 < 4.0
    if np.any(near_mask):
        with np.errstate(all="ignore"):
            z, w = np.broadcast_arrays(to_chart(x), to_chart(y))
            near = np.arcsinh(np.sqrt(_chart_sinh2(z, w)))
        far = np.where(near_mask & np.isfinite(near), near, far)
    return far if far.ndim else float(far)


def metric_inner(z, u, v) -> complex:
    """Hermitian metric h_z(u, v) for tangent vectors u, v at chart point z (broadcasts)."""
    z = coords(z)
    if np.any(_norm2(z) >= 1.0):
        raise GeometryError("metric is defined only inside the ball")
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    s = 1.0 - _norm2(z)
    val = (s * _hdot(u, v) + _hdot(u, z) * _hdot(z, v)) / s**2
    return complex(val) if np.ndim(val) == 0 else val


def kahler_potential(z) -> float:
    z = coords(z)
    val = np.log(1.0 - _norm2(z))
    return float(val) if np.ndim(val) == 0 else val


def bergman_kernel(z, w) -> complex:
    """n!/(2 pi^n) (1 - z.conj(w))^{-n-1}."""
    z = coords(z)
    w = coords(w)
    n = z.shape[-1]
    val = factorial(n) / (2.0 * np.pi**n) * (1.0 - _hdot(z, w)) ** (-n - 1)
    return complex(val) if np.ndim(val) == 0 else val


def _unit_direction(z, w):
    """Unit tangent direction at 0 of the geodesic from 0 through T_z^{-1} w."""
    from .isometry import transvection

    T = transvection(z)
    Tinv = _finv(T)
    wl = Tinv @ chart_lift(w)
    u = wl[1:] / wl[0]
    nu = np.linalg.norm(u)
    if nu == 0.0:
        raise GeometryError("geodesic endpoints coincide")
    return T, u / nu


def _finv(M):
    """Inverse of a matrix preserving the form: J M^H J."""
    s = np.ones(M.shape[-1])
    s[0] = -1.0
    return (s[:, None] * np.conj(np.swapaxes(M, -1, -2))) * s[None, :]


def geodesic_point(x, y, t):
    """Point at signed distance ``t`` from ``x`` toward ``y`` (vectorized in t)."""
    z = coords(x)
    w = coords(y)
    T, u = _unit_direction(z, w)
    t = np.asarray(t, dtype=float)
    lifts = np.concatenate(
        [np.cosh(t)[..., None].astype(complex), np.sinh(t)[..., None] * u], axis=-1
    )
    pts = to_chart(lifts @ T.T)
    if pts.ndim == 1:
        return BallPoint(pts)
    return pts


def geodesic_lifts(x, y, t):
    """Lifts with q = -1 of points on the geodesic through x and y."""
    z = coords(x)
    w = coords(y)
    T, u = _unit_direction(z, w)
    t = np.asarray(t, dtype=float)
    lifts = np.concatenate(
        [np.cosh(t)[..., None].astype(complex), np.sinh(t)[..., None] * u], axis=-1
    )
    return lifts @ T.T


def ray_lifts(origin, xi, t):
    """Lifts (q = -1) of the unit speed ray from ``origin`` toward boundary point ``xi``."""
    from .isometry import transvection

    o = coords(origin)
    T = transvection(o)
    xl = _finv(T) @ chart_lift(coords(xi))
    u = xl[1:] / xl[0]
    u = u / np.linalg.norm(u)
    t = np.asarray(t, dtype=float)
    lifts = np.concatenate(
        [np.cosh(t)[..., None].astype(complex), np.sinh(t)[..., None] * u], axis=-1
    )
    return lifts @ T.T


class Geodesic:
    """Bi-infinite unit speed geodesic between distinct boundary points.

    ``origin`` selects the time-zero point; by default the point of the
    geodesic closest to the center of the ball.
    """

    def __init__(self, xi, eta, origin: BallPoint | None = None):
        self.xi = xi if isinstance(xi, BoundaryPoint) else BoundaryPoint(xi)
        self.eta = eta if isinstance(eta, BoundaryPoint) else BoundaryPoint(eta)
        X = self.xi.lift
        Y = self.eta.lift
        c = form_inner(X, Y)
        if abs(c) < 1e-14:
            raise GeometryError("geodesic endpoints must be distinct")
        # scale so that <X', Y'> = -1/2; then e^t X' + e^-t Y' has q = -1
        a = 1.0 / np.sqrt(2.0 * abs(c))
        b = -1.0 / (2.0 * a * np.conj(c))
        self._X = a * X
        self._Y = b * Y
        if origin is None:
            res = minimize_scalar(lambda s: abs(self._raw(s)[0]) ** 2, bracket=(-1.0, 1.0))
            self._t0 = float(res.x)
        else:
            o = origin.lift
            # cosh d(o, p(s)) is minimized (= 1) at the origin
            res = minimize_scalar(
                lambda s: abs(form_inner(self._raw(s), o)) ** 2 / -q(o), bracket=(-1.0, 1.0)
            )
            self._t0 = float(res.x)
            if distance_lifts(self._raw(self._t0), o, qx=-1.0) > 1e-6:
                raise GeometryError("origin does not lie on the geodesic")

    def _raw(self, s):
        s = np.asarray(s, dtype=float)
        return np.exp(s)[..., None] * self._X + np.exp(-s)[..., None] * self._Y

    def lift(self, t):
        """Lift with q = -1 of the point at time t (t -> +inf tends to xi)."""
        return self._raw(np.asarray(t, dtype=float) + self._t0)

    def point(self, t):
        pts = to_chart(self.lift(t))
        return BallPoint(pts) if pts.ndim == 1 else pts


@dataclass(frozen=True)
class BusemannSpec:
    base: BoundaryPoint
    origin: BallPoint

    @classmethod
    def at(cls, xi, origin=None):
        xi = xi if isinstance(xi, BoundaryPoint) else BoundaryPoint(xi)
        if origin is None:
            origin = BallPoint(np.zeros(xi.n, dtype=complex))
        elif not isinstance(origin, BallPoint):
            origin = BallPoint(origin)
        return cls(xi, origin)


def _as_spec(spec):
    if not isinstance(spec, BusemannSpec):
        raise TypeError("expected a BusemannSpec")
    if abs(np.linalg.norm(spec.base.xi) - 1.0) > 1e-9:
        raise GeometryError("Busemann base point must be null")
    return spec


def busemann(spec: BusemannSpec, x):
    """Busemann function of the ray from spec.origin toward spec.base.

    Closed form
        b(x) = 1/2 log( |<x,xi>|^2 (-q(o)) / ((-q(x)) |<o,xi>|^2) ),
    checked against the limit d(x, r(t)) - t in the test suite.
    """
    spec = _as_spec(spec)
    z = coords(x)
    if np.any(_norm2(z) >= 1.0):
        raise GeometryError("busemann needs points inside the ball")
    xi = spec.base.lift
    o = spec.origin.lift
    val = 0.5 * np.log(
        np.abs(form_inner(chart_lift(z), xi)) ** 2
        * (-q(o))
        / ((1.0 - _norm2(z)) * np.abs(form_inner(o, xi)) ** 2)
    )
    return float(val) if np.ndim(val) == 0 else val


def busemann_lifts(spec: BusemannSpec, X, qX=-1.0):
    """Busemann function evaluated on negative lifts with known q."""
    spec = _as_spec(spec)
    xi = spec.base.lift
    o = spec.origin.lift
    return 0.5 * np.log(
        np.abs(form_inner(X, xi)) ** 2 * (-q(o)) / ((-qX) * np.abs(form_inner(o, xi)) ** 2)
    )


def busemann_limit(spec: BusemannSpec, x, t: float = 20.0):
    """Truncated defining limit d(x, r(t)) - d(o, r(t)) along the ray o -> xi."""
    spec = _as_spec(spec)
    r = ray_lifts(spec.origin, spec.base, t)
    z = coords(x)
    d = distance_lifts(chart_lift(z), r, qy=-1.0)
    return d - t


@dataclass(frozen=True)
class Hyperplane:
    """Projective hyperplane {[x] : <x, w> = 0} with polar [w]."""

    polar: ProjectivePoint

    def residual(self, x) -> float | np.ndarray:
        """Scale-free |<x, w>| for unit lifts x."""
        x = np.asarray(x.lift if hasattr(x, "lift") else x, dtype=complex)
        x = x / np.linalg.norm(x, axis=-1, keepdims=True)
        return np.abs(form_inner(x, self.polar.lift))

    def contains(self, x, tol: float = 1e-9):
        return self.residual(x) < tol

    def affine_equation(self):
        """(c, c0) such that the chart locus is sum_k c_k z_k = c0."""
        w = self.polar.lift
        return np.conj(w[1:]), np.conj(w[0])


def support_hyperplane(xi) -> Hyperplane:
    """Complex support hyperplane at a boundary point: polar is xi's own null lift."""
    if not isinstance(xi, BoundaryPoint):
        xi = np.asarray(xi, dtype=complex)
        if abs(np.linalg.norm(xi) - 1.0) > 1e-9:
            raise GeometryError("support hyperplane needs a point of the unit sphere")
        xi = BoundaryPoint(xi)
    return Hyperplane(ProjectivePoint(xi.lift))


class Gauge(str, Enum):
    CHORDAL = "chordal"
    KORANYI = "koranyi"


def boundary_gauge(xi, eta, kind: str | Gauge = Gauge.KORANYI):
    """Distance-like gauge on S^{2n-1}.

    ``koranyi`` is |1 - xi.conj(eta)|^{1/2}, bi-Lipschitz to the Carnot
    metric; ``chordal`` is the Euclidean distance.
    """
    a = coords(xi)
    b = coords(eta)
    kind = Gauge(kind)
    if kind is Gauge.CHORDAL:
        val = np.sqrt(_norm2(a - b))
    else:
        val = np.sqrt(np.abs(1.0 - _hdot(a, b)))
    return float(val) if np.ndim(val) == 0 else val


class EmbeddingKind(str, Enum):
    REAL_PLANE = "real-plane"
    COMPLEX_LINE = "complex-line"
    COMPLEX_SUBSPACE = "complex-k-subspace"


@dataclass(frozen=True)
class TotallyGeodesicEmbedding:
    """Isometric embedding of a model space onto a totally geodesic slice.

    real-plane: Klein disk (real 2-vectors, curvature -1) -> real points (x1, x2, 0, ...).
    complex-line: unit disk with metric |dz|^2/(1-|z|^2)^2 -> (z, 0, ...).
    complex-k-subspace: B^k -> (z_1..z_k, 0, ...).
    """

    kind: EmbeddingKind
    n: int
    k: int

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u)
        if self.kind is EmbeddingKind.REAL_PLANE:
            u = np.asarray(u, dtype=float)
            if u.shape[-1] != 2:
                raise GeometryError("real-plane model points are real 2-vectors")
        elif self.kind is EmbeddingKind.COMPLEX_LINE:
            u = np.asarray(u, dtype=complex)[..., None] if u.shape == () or u.shape[-1] != 1 else u
        if u.shape[-1] != self.k:
            raise GeometryError(f"model dimension is {self.k}")
        out = np.zeros(u.shape[:-1] + (self.n,), dtype=complex)
        out[..., : self.k] = u
        return out

    def model_distance(self, a, b):
        """Intrinsic distance in the model space."""
        if self.kind is EmbeddingKind.REAL_PLANE:
            a = np.asarray(a, dtype=float)
            b = np.asarray(b, dtype=float)
            c = (1 - np.sum(a * b, -1)) / np.sqrt((1 - np.sum(a * a, -1)) * (1 - np.sum(b * b, -1)))
            return np.arccosh(np.maximum(c, 1.0))
        if self.kind is EmbeddingKind.COMPLEX_LINE:
            a = np.asarray(a, dtype=complex)
            b = np.asarray(b, dtype=complex)
            return np.arctanh(np.abs((a - b) / (1 - a * np.conj(b))))
        return distance(a, b)


def embed_totally_geodesic(kind, n: int, k: int | None = None) -> TotallyGeodesicEmbedding:
    kind = EmbeddingKind(kind)
    if kind is EmbeddingKind.REAL_PLANE:
        k = 2
    elif kind is EmbeddingKind.COMPLEX_LINE:
        k = 1
    elif k is None or k < 1:
        raise GeometryError("complex-k-subspace needs k >= 1")
    if k > n:
        raise GeometryError(f"cannot embed a {k}-dimensional model into B^{n}")
    return TotallyGeodesicEmbedding(kind, n, k)


def golden_min(f, lo, hi, iters: int = 60):
    """Vectorized golden-section minimization of unimodal f on [lo, hi].

    ``f`` maps an array of parameters (one per problem) to values.
    Returns (argmin, min).
    """
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = f(c)
    fd = f(d)
    for _ in range(iters):
        left = fc < fd
        # keep [a, d] when f(c) < f(d), else [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new = np.where(left, b - _INVPHI * (b - a), a + _INVPHI * (b - a))
        fn = f(new)
        c, d, fc, fd = (
            np.where(left, new, d),
            np.where(left, c, new),
            np.where(left, fn, fd),
            np.where(left, fc, fn),
        )
    pick = fc < fd
    return np.where(pick, c, d), np.where(pick, fc, fd)


def distance_to_curve(points, curve, lo, hi, coarse: int = 33, iters: int = 50):
    """min over s in [lo, hi] of d(points, curve(s)).

    ``points`` are q = -1 lifts of shape (P, n+1); ``curve`` maps an array
    of parameters (shape (P,) or (P, m)) to q = -1 lifts.  Assumes the
    distance is unimodal in s (true for geodesics: CAT(-1) convexity);
    a coarse grid brackets the minimum before golden-section refinement.
    """
    P = points.shape[0]
    grid = np.linspace(lo, hi, coarse)
    vals = distance_lifts(points[:, None, :], curve(np.broadcast_to(grid, (P, coarse))), -1.0, -1.0)
    k = np.argmin(vals, axis=1)
    step = (hi - lo) / (coarse - 1)
    left = np.maximum(grid[k] - step, lo)
    right = np.minimum(grid[k] + step, hi)

    def f(s):
        return distance_lifts(points, curve(s), -1.0, -1.0)

    _, best = golden_min(f, left, right, iters)
    return np.minimum(best, vals.min(axis=1))


def slimness(x, y, z, samples: int = 1000) -> float:
    """Sampled slimness of the geodesic triangle xyz.

    Each edge is sampled at ``samples`` points; for each sample the
    distance to the union of the other two edges is minimized by coarse
    sampling plus golden-section search.  Returns the largest such distance.
    """
    verts = [coords(x), coords(y), coords(z)]
    edges = []
    for i in range(3):
        a, b = verts[i], verts[(i + 1) % 3]
        length = distance(a, b)
        if length < 1e-14:
            edges.append(None)
            continue
        T, u = _unit_direction(a, b)
        edges.append((T, u, length))

    def edge_lifts(e, s):
        T, u, _ = e
        s = np.asarray(s, dtype=float)
        lf = np.concatenate([np.cosh(s)[..., None].astype(complex), np.sinh(s)[..., None] * u], -1)
        return lf @ T.T

    worst = 0.0
    for i, e in enumerate(edges):
        if e is None:
            continue
        pts = edge_lifts(e, np.linspace(0.0, e[2], samples))
        best = np.full(samples, np.inf)
        for j, other in enumerate(edges):
            if j == i:
                continue
            if other is None:
                v = verts[j]
                dj = distance_lifts(pts, chart_lift(v), -1.0)
            else:
                dj = distance_to_curve(pts, lambda s, o=other: edge_lifts(o, s), 0.0, other[2])
            best = np.minimum(best, dj)
        worst = max(worst, float(best.max()))
    return worst
