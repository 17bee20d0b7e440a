"""Elements of U(n,1) acting on the ball: construction, action, classification."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache

import numpy as np
from scipy.optimize import minimize

from .form import (
    BallPoint,
    BoundaryPoint,
    GeometryError,
    ProjectivePoint,
    chart_lift,
    coords,
    form_inner,
    form_matrix,
    q,
    to_chart,
)
from .geometry import distance_lifts

UNITARY_TOL = 1e-9
MODULUS_TOL = 1e-8


def finv(M: np.ndarray) -> np.ndarray:
    """Inverse of a form-preserving matrix, J M^H J (exact up to rounding)."""
    s = np.ones(M.shape[-1])
    s[0] = -1.0
    return (s[:, None] * np.conj(np.swapaxes(M, -1, -2))) * s[None, :]


def unitarity_residual(M) -> float:
    M = np.asarray(M, dtype=complex)
    J = form_matrix(M.shape[0] - 1)
    return float(np.max(np.abs(M.conj().T @ J @ M - J)))


def is_q_unitary(M, tol: float = UNITARY_TOL) -> tuple[bool, float]:
    """Whether M^H J M = J to within ``tol`` (max-entry norm); also returns the residual."""
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 2:
        raise GeometryError(f"expected a square matrix of size n+1 >= 2, got {M.shape}")
    r = unitarity_residual(M)
    return r < tol, r


def normalize_det(M: np.ndarray) -> np.ndarray:
    """Rescale so that |det M| = 1 (leaves exact unimodular matrices untouched)."""
    det = abs(np.linalg.det(M))
    if det == 0.0 or not np.isfinite(det):
        raise GeometryError("singular matrix")
    if abs(det - 1.0) < 1e-14:
        return M
    return M / det ** (1.0 / M.shape[0])


def projective_identity_residual(M) -> float:
    """min over |lam| = 1 of ||M - lam I||_F for M scaled to |det| = 1."""
    M = normalize_det(np.asarray(M, dtype=complex))
    tr = np.trace(M)
    lam = tr / abs(tr) if abs(tr) > 0 else 1.0
    return float(np.linalg.norm(M - lam * np.eye(M.shape[0])))


def projective_distance(A, B) -> float:
    """Phase-minimized ||A - lam B||_F of |det|-normalized matrices."""
    A = normalize_det(np.asarray(A, dtype=complex))
    B = normalize_det(np.asarray(B, dtype=complex))
    ip = np.vdot(B, A)
    lam = ip / abs(ip) if abs(ip) > 0 else 1.0
    return float(np.linalg.norm(A - lam * B))


class Isometry:
    """A holomorphic isometry of the ball, represented by a matrix in U(n,1).

    The matrix is rescaled to |det| = 1.  With ``check=True`` the form
    must be preserved to a relative tolerance: absolute residuals of
    long products grow like ||M||^2 times machine precision.
    """

    __slots__ = ("matrix", "__dict__")

    def __init__(self, matrix, check: bool = True, tol: float = UNITARY_TOL):
        M = np.array(matrix, dtype=complex)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 2:
            raise GeometryError(f"expected a square matrix of size n+1 >= 2, got {M.shape}")
        M = normalize_det(M)
        if check:
            r = unitarity_residual(M)
            scale = max(1.0, np.linalg.norm(M, 2) ** 2)
            if r > tol * scale:
                raise GeometryError(f"matrix does not preserve the form (residual {r:.3g})")
        M.setflags(write=False)
        self.matrix = M

    @property
    def n(self) -> int:
        return self.matrix.shape[0] - 1

    @classmethod
    def identity(cls, n: int) -> "Isometry":
        return cls(np.eye(n + 1), check=False)

    @cached_property
    def inverse(self) -> "Isometry":
        return Isometry(finv(self.matrix), check=False)

    def __matmul__(self, other: "Isometry") -> "Isometry":
        return Isometry(self.matrix @ other.matrix, check=False)

    def __pow__(self, k: int) -> "Isometry":
        k = int(k)
        if k < 0:
            return self.inverse ** (-k)
        return Isometry(np.linalg.matrix_power(self.matrix, k), check=False)

    def __call__(self, p):
        return apply(self, p)

    def projective_equal(self, other: "Isometry", tol: float = 1e-9) -> bool:
        return projective_distance(self.matrix, other.matrix) < tol

    @cached_property
    def classification(self) -> "ClassificationResult":
        return classify(self)

    def __repr__(self):
        return f"Isometry(n={self.n}, norm={np.linalg.norm(self.matrix, 2):.4g})"


def _as_matrix(g) -> np.ndarray:
    return g.matrix if isinstance(g, Isometry) else np.asarray(g, dtype=complex)


def apply(g, p):
    """Action of g on projective, ball, or boundary points (or raw chart arrays)."""
    M = _as_matrix(g)
    if isinstance(p, ProjectivePoint):
        return ProjectivePoint(M @ p.lift)
    if isinstance(p, BallPoint):
        return BallPoint(to_chart(M @ p.lift))
    if isinstance(p, BoundaryPoint):
        z = to_chart(M @ p.lift)
        return BoundaryPoint(z / np.linalg.norm(z))
    z = np.asarray(p, dtype=complex)
    return to_chart(chart_lift(z) @ M.T)


# ---------------------------------------------------------------- constructors


def boost(s: float, n: int = 1, axis: int = 1) -> Isometry:
    """Translation by ``s`` along the geodesic through 0 in direction e_axis."""
    if not 1 <= axis <= n:
        raise GeometryError("axis must be one of 1..n")
    M = np.eye(n + 1, dtype=complex)
    c, sh = np.cosh(s), np.sinh(s)
    M[0, 0] = M[axis, axis] = c
    M[0, axis] = M[axis, 0] = sh
    return Isometry(M, check=False)


def transvection(a) -> np.ndarray:
    """Hermitian matrix in U(n,1) translating 0 to chart point ``a`` along a geodesic."""
    a = np.asarray(coords(a), dtype=complex)
    n = a.shape[0]
    r2 = float(np.vdot(a, a).real)
    if r2 >= 1.0:
        raise GeometryError("transvection target must lie inside the ball")
    g = 1.0 / np.sqrt(1.0 - r2)
    M = np.eye(n + 1, dtype=complex)
    M[0, 0] = g
    M[0, 1:] = g * np.conj(a)
    M[1:, 0] = g * a
    if r2 > 0:
        M[1:, 1:] += (g - 1.0) * np.outer(a, np.conj(a)) / r2
    return M


def unitary(U) -> Isometry:
    """Element of the stabilizer U(n) of the origin."""
    U = np.asarray(U, dtype=complex)
    if not np.allclose(U.conj().T @ U, np.eye(U.shape[0]), atol=1e-10):
        raise GeometryError("block is not unitary")
    M = np.eye(U.shape[0] + 1, dtype=complex)
    M[1:, 1:] = U
    return Isometry(M, check=False)


def complex_reflection(polar, order: int) -> Isometry:
    """Complex reflection fixing the hyperplane polar to a positive vector.

    M = I + (e^{2 pi i/order} - 1) w <., w> / <w, w>.
    """
    w = polar.lift if isinstance(polar, ProjectivePoint) else np.asarray(polar, dtype=complex)
    w = w / np.linalg.norm(w)
    qw = q(w)
    if not qw > 1e-12:
        raise GeometryError("complex reflection needs a positive polar vector")
    if int(order) < 2:
        raise GeometryError("order must be >= 2")
    zeta = np.exp(2j * np.pi / int(order))
    J = form_matrix(w.shape[0] - 1)
    M = np.eye(w.shape[0], dtype=complex) + (zeta - 1.0) * np.outer(w, np.conj(w) @ J) / qw
    return Isometry(M, check=False)


class SubgroupKind(str, Enum):
    SU11 = "su11-complex-line"
    SO21 = "so21-real-plane"
    HEISENBERG = "heisenberg-parabolic"


def heisenberg_change_of_basis(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Null basis (f_0, e_1, .., e_{n-1}, f_n) of C^{n+1} and its inverse.

    f_0 = e_0 + e_n and f_n = (e_n - e_0)/2 are null with <f_0, f_n> = 1,
    so the form reads [[0,0,1],[0,I,0],[1,0,0]] in this basis.  All
    entries are dyadic, so integer Heisenberg elements stay exact.
    """
    C = np.eye(n + 1, dtype=complex)
    C[:, 0] = 0
    C[:, n] = 0
    C[0, 0] = C[n, 0] = 1.0
    C[0, n], C[n, n] = -0.5, 0.5
    Cinv = np.eye(n + 1, dtype=complex)
    Cinv[0, 0] = Cinv[0, n] = 0.5
    Cinv[n, 0], Cinv[n, n] = -1.0, 1.0
    return C, Cinv


def heisenberg_null_matrix(zeta, v: float) -> np.ndarray:
    """Unipotent [[1, -zeta^H, (-|zeta|^2 + i v)/2], [0, I, zeta], [0, 0, 1]]."""
    zeta = np.atleast_1d(np.asarray(zeta, dtype=complex))
    m = zeta.shape[0]
    T = np.eye(m + 2, dtype=complex)
    T[0, 1 : m + 1] = -np.conj(zeta)
    T[0, m + 1] = (-np.vdot(zeta, zeta).real + 1j * v) / 2.0
    T[1 : m + 1, m + 1] = zeta
    return T


def heisenberg_element(a, b, c) -> Isometry:
    """Image of the real Heisenberg matrix [[1, a, c], [0, I, b], [0, 0, 1]].

    (a, b, c) -> T(a + i b, 2 a.b - 4c) is a homomorphism for the law
    (a,b,c)(a',b',c') = (a+a', b+b', c+c'+a.b'), conjugated to the
    diagonal form basis.  The image fixes the boundary point e_n.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise GeometryError("Heisenberg a and b must have equal length")
    T = heisenberg_null_matrix(a + 1j * b, 2.0 * float(a @ b) - 4.0 * float(c))
    C, Cinv = heisenberg_change_of_basis(a.shape[0] + 1)
    return Isometry(C @ T @ Cinv, check=False)


def embed_subgroup(kind, element, n: int | None = None) -> Isometry:
    """Embed an element of U(1,1), O(2,1) or the Heisenberg group into U(n,1)."""
    kind = SubgroupKind(kind)
    if kind is SubgroupKind.HEISENBERG:
        a, b, c = element
        g = heisenberg_element(a, b, c)
        if n is not None and n != g.n:
            raise GeometryError(f"Heisenberg triple of this size embeds in U({g.n},1)")
        return g
    A = np.asarray(element)
    k = 2 if kind is SubgroupKind.SU11 else 3
    if A.shape != (k, k):
        raise GeometryError(f"expected a {k}x{k} matrix")
    if kind is SubgroupKind.SO21 and np.max(np.abs(np.imag(A))) > 1e-12:
        raise GeometryError("O(2,1) element must be real")
    A = normalize_det(A.astype(complex))
    if unitarity_residual(A) > 1e-9 * max(1.0, np.linalg.norm(A, 2) ** 2):
        raise GeometryError("element does not preserve the source form")
    n = k - 1 if n is None else n
    if n < k - 1:
        raise GeometryError(f"target dimension must be >= {k - 1}")
    M = np.eye(n + 1, dtype=complex)
    M[:k, :k] = A
    return Isometry(M, check=False)


# ---------------------------------------------------------------- classification


class IsometryType(str, Enum):
    ELLIPTIC = "elliptic"
    PARABOLIC = "parabolic"
    HYPERBOLIC = "hyperbolic"


@dataclass(frozen=True)
class ClassificationResult:
    label: IsometryType
    fixed_point: ProjectivePoint | None = None
    attracting: BoundaryPoint | None = None
    repelling: BoundaryPoint | None = None
    translation_length: float = 0.0
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def boundary_fixed_points(self) -> tuple:
        if self.label is IsometryType.HYPERBOLIC:
            return (self.attracting, self.repelling)
        if self.label is IsometryType.PARABOLIC:
            return (self.attracting,)
        return ()


def _to_sphere(v) -> BoundaryPoint:
    z = v[1:] / v[0]
    return BoundaryPoint(z / np.linalg.norm(z))


def _clusters(lam, tol):
    order = np.argsort(np.angle(lam))
    groups: list[list[int]] = []
    for i in order:
        for g in groups:
            if any(abs(lam[i] - lam[j]) < tol * max(1.0, abs(lam[j])) for j in g):
                g.append(int(i))
                break
        else:
            groups.append([int(i)])
    return groups


def classify(g) -> ClassificationResult:
    """Elliptic / parabolic / hyperbolic from the eigenstructure.

    An eigenvalue of modulus > 1 + 1e-8 with a null, isolated eigenvector
    paired with a distinct null repelling eigenvector means hyperbolic;
    the translation length is the displacement at the axis point
    v+ + v- (normalized <v+, v-> = -1).  Otherwise an eigenspace
    containing a negative vector means elliptic, else parabolic.
    Eigenvalues are clustered with a tolerance that covers the splitting
    of Jordan blocks by rounding.
    """
    g = g if isinstance(g, Isometry) else Isometry(g)
    M = g.matrix
    N = M.shape[0]
    J = form_matrix(N - 1)
    lam, V = np.linalg.eig(M)
    norm = np.linalg.norm(M, 2)
    ctol = max(1e-4, 10.0 * (np.finfo(float).eps * norm**2) ** (1.0 / 3.0))
    groups = _clusters(lam, ctol)
    mods = np.abs(lam)
    diag = {"eigenvalues": lam, "cluster_tol": ctol}

    imax, imin = int(np.argmax(mods)), int(np.argmin(mods))
    isolated = all(
        abs(lam[imax] - lam[j]) >= ctol * abs(lam[imax]) for j in range(N) if j != imax
    )
    if np.log(mods[imax]) > MODULUS_TOL and isolated:
        vp = V[:, imax] / np.linalg.norm(V[:, imax])
        vm = V[:, imin] / np.linalg.norm(V[:, imin])
        c = form_inner(vp, vm)
        null_ok = abs(q(vp)) < 1e-6 and abs(q(vm)) < 1e-6
        if null_ok and abs(c) > 1e-6:
            vm = vm * (-1.0 / np.conj(c))
            p = vp + vm
            ell = float(distance_lifts(p, M @ p, -2.0, -2.0))
            diag["null_residual"] = max(abs(q(vp)), abs(q(vm)))
            return ClassificationResult(
                IsometryType.HYPERBOLIC,
                fixed_point=ProjectivePoint(p),
                attracting=_to_sphere(vp),
                repelling=_to_sphere(vm),
                translation_length=ell,
                diagnostics=diag,
            )

    best_null = None
    for grp in groups:
        mu = np.mean(lam[grp])
        _, s, Vh = np.linalg.svd(M - mu * np.eye(N))
        k = max(1, int(np.sum(s < 1e-7 * norm)))
        E = Vh[-k:].conj().T
        G = E.conj().T @ J @ E
        w, U = np.linalg.eigh((G + G.conj().T) / 2)
        if w[0] < -1e-7:
            fp = E @ U[:, 0]
            diag["fixed_residual"] = float(np.linalg.norm(M @ fp - mu * fp))
            return ClassificationResult(
                IsometryType.ELLIPTIC, fixed_point=ProjectivePoint(fp), diagnostics=diag
            )
        j = int(np.argmin(np.abs(w)))
        if best_null is None or abs(w[j]) < best_null[0]:
            best_null = (abs(w[j]), E @ U[:, j])
    v = best_null[1]
    diag["null_residual"] = best_null[0]
    return ClassificationResult(
        IsometryType.PARABOLIC,
        fixed_point=ProjectivePoint(v),
        attracting=_to_sphere(v),
        diagnostics=diag,
    )


@dataclass(frozen=True)
class DisplacementResult:
    value: float
    point: np.ndarray  # q = -1 lift of the best point found
    depth: float  # distance of that point from the origin
    attained: bool
    converged: bool


def _polar_lift(v):
    n = v.shape[0] // 2
    w = v[:n] + 1j * v[n:]
    r = float(np.sqrt(v @ v))
    x = np.empty(n + 1, dtype=complex)
    x[0] = np.cosh(r)
    x[1:] = w * (np.sinh(r) / r) if r > 1e-300 else 0.0
    return x, r


def displacement_inf(
    g,
    starts: int = 3,
    maxiter: int = 600,
    seed: int = 0,
    regs: tuple[float, float] = (1e-2, 1e-4),
    drift: float = 1.0,
) -> DisplacementResult:
    """Numerical infimum of z -> d(z, g z) by multi-start Nelder-Mead.

    Points are parametrized by polar coordinates at the origin, so the
    search can walk toward the boundary at unit speed.  A small penalty
    reg * d(0, z) selects the minimizer closest to the origin.  The
    search runs for two penalty weights: if the minimum is attained the
    selected point does not move, while for an unattained infimum the
    optimum drifts toward the boundary by about log(reg1/reg2).  The
    infimum counts as attained when the drift stays below ``drift``.
    """
    M = _as_matrix(g)
    n = M.shape[0] - 1
    if projective_identity_residual(M) < 1e-12:
        x0 = np.zeros(n + 1, dtype=complex)
        x0[0] = 1
        return DisplacementResult(0.0, x0, 0.0, True, True)

    sign = np.ones(n + 1)
    sign[0] = -1.0

    def disp(v):
        # for q = -1 lifts, sinh^2 d(x, y) = q(y - x) + |<x, y - x>|^2
        x, _ = _polar_lift(v)
        dx = M @ x - x
        a = np.abs(dx) ** 2
        s2 = a @ sign + abs(np.vdot(sign * dx, x)) ** 2
        return float(np.arcsinh(np.sqrt(max(s2, 0.0))))

    def run(v0, reg, restart=True):
        def obj(v):
            return disp(v) + reg * np.linalg.norm(v)

        opts = {"xatol": 1e-8, "fatol": 1e-11, "maxiter": maxiter, "adaptive": True}
        res = minimize(obj, v0, method="Nelder-Mead", options=opts)
        if not restart:
            return res
        # one restart from the best point guards against simplex collapse
        res2 = minimize(obj, res.x, method="Nelder-Mead", options=opts)
        return res2 if res2.fun <= res.fun else res

    rng = np.random.default_rng(seed)
    inits = [np.zeros(2 * n)] + [rng.normal(scale=1.5, size=2 * n) for _ in range(starts - 1)]
    best = None
    for v0 in inits:
        res = run(v0, regs[0], restart=False)
        if best is None or res.fun < best.fun:
            best = res
    best = run(best.x, regs[0])
    depth_a = float(np.linalg.norm(best.x))
    fine = run(best.x, regs[1])
    x, depth = _polar_lift(fine.x)
    attained = abs(depth - depth_a) < drift
    return DisplacementResult(disp(fine.x), x, depth, bool(attained),
                              bool(best.success and fine.success))


# ---------------------------------------------------------------- centralizers


@lru_cache(maxsize=None)
def su21_basis() -> np.ndarray:
    """Real basis (8, 3, 3) of su(2,1) = {X : X^H J + J X = 0, tr X = 0}.

    Built as J times anti-Hermitian matrices, then restricted to the
    trace-free subspace and orthonormalized in the real Frobenius product.
    """
    J = form_matrix(2)
    anti = []
    for k in range(3):
        E = np.zeros((3, 3), dtype=complex)
        E[k, k] = 1j
        anti.append(E)
    for j in range(3):
        for k in range(j + 1, 3):
            E = np.zeros((3, 3), dtype=complex)
            E[j, k], E[k, j] = 1.0, -1.0
            anti.append(E)
            E = np.zeros((3, 3), dtype=complex)
            E[j, k] = E[k, j] = 1j
            anti.append(E)
    X = np.array([J @ A for A in anti])  # u(2,1), dim 9
    tr = np.imag(np.trace(X, axis1=1, axis2=2))
    _, _, Vt = np.linalg.svd(tr[None, :])
    coeffs = Vt[1:]  # null space of the trace functional, 8 vectors
    B = np.tensordot(coeffs, X, axes=1)
    flat = np.concatenate([B.real.reshape(8, -1), B.imag.reshape(8, -1)], axis=1)
    Q, _ = np.linalg.qr(flat.T)
    flat = Q.T
    return flat[:, :9].reshape(8, 3, 3) + 1j * flat[:, 9:].reshape(8, 3, 3)


def su_normalize(M) -> np.ndarray:
    """Divide by the principal cube root of det so that det = 1."""
    M = np.asarray(M, dtype=complex)
    d = np.linalg.det(M)
    return M / d ** (1.0 / M.shape[0])


def adjoint_matrix(g) -> np.ndarray:
    """Ad(g) on su(2,1) in the orthonormal basis ``su21_basis``."""
    M = su_normalize(_as_matrix(g))
    if M.shape != (3, 3):
        raise GeometryError("adjoint action is implemented for PU(2,1) only")
    B = su21_basis()
    Minv = np.linalg.inv(M)
    flat_basis = np.concatenate([B.real.reshape(8, -1), B.imag.reshape(8, -1)], axis=1)
    Y = np.einsum("ij,bjk,kl->bil", M, B, Minv)
    flat_Y = np.concatenate([Y.real.reshape(8, -1), Y.imag.reshape(8, -1)], axis=1)
    coef, *_ = np.linalg.lstsq(flat_basis.T, flat_Y.T, rcond=None)
    return coef


def zeta(g, tol: float = 1e-7) -> int:
    """Codimension in PU(2,1) of the centralizer of g: 8 - dim ker(Ad g - I)."""
    M = _as_matrix(g)
    if M.shape != (3, 3):
        raise GeometryError("zeta is defined here for PU(2,1) (n = 2)")
    A = adjoint_matrix(M)
    s = np.linalg.svd(A - np.eye(8), compute_uv=False)
    kernel = int(np.sum(s < tol * max(1.0, np.linalg.norm(A, 2))))
    return 8 - kernel


def weil_dimension(a, b, c, tol: float = 1e-8) -> int:
    """zeta(a) + zeta(b) + zeta(c) - 16 for a triple with abc = 1 in PU(2,1)."""
    A, B, C = (_as_matrix(x) for x in (a, b, c))
    if A.shape != (3, 3):
        raise GeometryError("Weil's count is implemented for PU(2,1)")
    r = projective_identity_residual(A @ B @ C)
    if r > tol:
        raise GeometryError(f"relation abc = 1 violated (residual {r:.3g})")
    return zeta(A) + zeta(B) + zeta(C) - 16


@dataclass(frozen=True)
class QuasiconstantLimit:
    attracting: BoundaryPoint
    repelling: BoundaryPoint
    null_residual: float


def quasiconstant_limit(g, threshold: float = 10.0) -> QuasiconstantLimit:
    """Attracting/repelling points of a large element from images of the origin.

    The image g(0) lies near the point to which g collapses everything
    away from the repelling point, and likewise for g^{-1}.
    """
    M = normalize_det(_as_matrix(g))
    nrm = np.linalg.norm(M, 2)
    if nrm <= threshold:
        raise GeometryError(f"norm {nrm:.3g} below threshold {threshold}: no concentration")
    e0 = np.zeros(M.shape[0], dtype=complex)
    e0[0] = 1.0
    out = []
    resid = 0.0
    for A in (M, finv(M)):
        v = A @ e0
        v = v / np.linalg.norm(v)
        resid = max(resid, abs(q(v)))
        out.append(_to_sphere(v))
    return QuasiconstantLimit(out[0], out[1], resid)
