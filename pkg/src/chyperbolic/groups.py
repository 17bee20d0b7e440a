"""Generator systems for discrete groups, relator checks and Schottky ping-pong."""

from __future__ import annotations

import re
from fractions import Fraction
from dataclasses import dataclass, field

import numpy as np

from .form import BoundaryPoint, GeometryError
from .geometry import boundary_gauge
from .isometry import (
    Isometry,
    IsometryType,
    classify,
    complex_reflection,
    embed_subgroup,
    finv,
    heisenberg_element,
    projective_identity_residual,
    transvection,
)

_TOKEN = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)(?:\^(-?\d+))?$")


@dataclass(frozen=True)
class Word:
    """Word in the generators: signed 1-based generator indices, freely reduced."""

    letters: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "letters", free_reduce(self.letters))

    def __len__(self):
        return len(self.letters)

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def inverse(self) -> "Word":
        return Word(tuple(-x for x in reversed(self.letters)))

    def format(self, labels) -> str:
        if not self.letters:
            return "1"
        return " ".join(labels[abs(x) - 1] + ("^-1" if x < 0 else "") for x in self.letters)


def free_reduce(letters) -> tuple[int, ...]:
    out: list[int] = []
    for x in letters:
        x = int(x)
        if x == 0:
            raise GeometryError("generator indices are 1-based")
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


@dataclass(frozen=True)
class GeneratorSystem:
    """Labeled generators of a subgroup of PU(n,1), with an optional presentation."""

    labels: tuple[str, ...]
    generators: tuple[Isometry, ...]
    relators: tuple[Word, ...] | None = None
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.labels) != len(self.generators) or not self.labels:
            raise GeometryError("need one label per generator and at least one generator")
        if len(set(self.labels)) != len(self.labels):
            raise GeometryError("generator labels must be unique")
        for lab in self.labels:
            if not _TOKEN.match(lab) or "^" in lab:
                raise GeometryError(f"bad generator label {lab!r}")
        dims = {g.n for g in self.generators}
        if len(dims) != 1:
            raise GeometryError("generators act on balls of different dimensions")

    @property
    def n(self) -> int:
        return self.generators[0].n

    @property
    def rank(self) -> int:
        return len(self.generators)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label) + 1
        except ValueError:
            raise GeometryError(f"unknown generator label {label!r}") from None

    def parse_word(self, text: str) -> Word:
        """Parse 'x1 y1 x1^-1 t^3' into a Word."""
        letters: list[int] = []
        for tok in text.replace("*", " ").split():
            if tok == "1":
                continue
            m = _TOKEN.match(tok)
            if not m:
                raise GeometryError(f"cannot parse word token {tok!r}")
            k = self.index(m.group(1))
            e = int(m.group(2) or 1)
            letters.extend([k if e > 0 else -k] * abs(e))
        return Word(tuple(letters))

    def matrix_of(self, letter: int) -> np.ndarray:
        g = self.generators[abs(letter) - 1]
        return g.matrix if letter > 0 else g.inverse.matrix

    def evaluate(self, word: Word | str) -> np.ndarray:
        if isinstance(word, str):
            word = self.parse_word(word)
        M = np.eye(self.n + 1, dtype=complex)
        for x in word.letters:
            M = M @ self.matrix_of(x)
        return M

    def with_relators(self, texts) -> "GeneratorSystem":
        words = tuple(self.parse_word(t) for t in texts)
        return GeneratorSystem(self.labels, self.generators, words, self.name, dict(self.meta))


@dataclass(frozen=True)
class RelatorReport:
    entries: tuple[tuple[str, float, bool], ...]
    tol: float

    @property
    def passed(self) -> bool:
        return all(ok for _, _, ok in self.entries)

    @property
    def max_residual(self) -> float:
        return max((r for _, r, _ in self.entries), default=0.0)


def relator_check(sys: GeneratorSystem, tol: float = 1e-9) -> RelatorReport:
    """Phase-minimized distance from the identity of every relator's image."""
    if sys.relators is None:
        raise GeometryError("system has no presentation")
    entries = []
    for w in sys.relators:
        r = projective_identity_residual(sys.evaluate(w))
        entries.append((w.format(sys.labels), r, r < tol))
    return RelatorReport(tuple(entries), tol)


# ---------------------------------------------------------------- Heisenberg lattice


def heisenberg_lattice(n: int = 1) -> GeneratorSystem:
    """Integer Heisenberg group H_{2n+1}(Z) acting on B^{n+1} by unipotent parabolics.

    Relators: [x_i, y_i] = t, and t central ([x_i, t] = [y_i, t] = 1),
    with [a, b] = a b a^-1 b^-1.  All matrices have dyadic entries, so
    the relators hold exactly in floating point.
    """
    if n < 1:
        raise GeometryError("Heisenberg lattice needs n >= 1")
    labels, gens = [], []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        labels.append(f"x{i + 1}")
        gens.append(heisenberg_element(e, np.zeros(n), 0.0))
        labels.append(f"y{i + 1}")
        gens.append(heisenberg_element(np.zeros(n), e, 0.0))
    labels.append("t")
    gens.append(heisenberg_element(np.zeros(n), np.zeros(n), 1.0))
    sys = GeneratorSystem(tuple(labels), tuple(gens), name=f"heisenberg({n})")
    rels = []
    for i in range(1, n + 1):
        rels.append(f"x{i} y{i} x{i}^-1 y{i}^-1 t^-1")
        rels.append(f"x{i} t x{i}^-1 t^-1")
        rels.append(f"y{i} t y{i}^-1 t^-1")
    return sys.with_relators(rels)


# ---------------------------------------------------------------- triangle groups


def _check_hyperbolic_triple(p, q, r):
    if min(p, q, r) < 2:
        raise GeometryError("triangle orders must be >= 2")
    if 1.0 / p + 1.0 / q + 1.0 / r >= 1.0 - 1e-15:
        raise GeometryError(f"({p},{q},{r}) is spherical or Euclidean, not hyperbolic")


def triangle_sides(p: int, q: int, r: int) -> tuple[float, float, float]:
    """Curvature -1 side lengths opposite the angles pi/p, pi/q, pi/r."""
    _check_hyperbolic_triple(p, q, r)
    a, b, c = np.pi / p, np.pi / q, np.pi / r

    def side(x, y, z):  # side opposite angle z
        return float(np.arccosh((np.cos(x) * np.cos(y) + np.cos(z)) / (np.sin(x) * np.sin(y))))

    return side(b, c, a), side(a, c, b), side(a, b, c)


def triangle_vertices_disk(p: int, q: int, r: int) -> tuple[complex, complex, complex]:
    """Vertices A, B, C in the unit disk (curvature -4 normalization, d(0,z) = arctanh|z|).

    A = 0 with angle pi/p, B on the positive real axis with angle pi/q,
    C in the upper half disk with angle pi/r.  A curvature -1 length L
    becomes L/2 here, so |B| = tanh(AB/2).
    """
    la, lb, lc = triangle_sides(p, q, r)
    B = np.tanh(lc / 2.0)
    C = np.tanh(lb / 2.0) * np.exp(1j * np.pi / p)
    return 0j, complex(B), complex(C)


def dyck_rep(p: int, q: int, r: int, n: int = 1, lift: str = "exact") -> GeneratorSystem:
    """Rotations a, b, c of orders p, q, r about the vertices of a (pi/p, pi/q, pi/r) triangle.

    Built from the three side reflections (anti-holomorphic, x -> S conj(x)):
    a = s_CA s_AB, b = s_AB s_BC, c = s_BC s_CA, so abc = 1 by construction.
    The disk is the complex line z_2 = .. = z_n = 0.

    For n >= 2 the rotations must be lifted to the stabilizer of that
    line.  ``lift="exact"`` keeps the von Dyck relators and fails when no
    such lift exists (e.g. (2,3,7)); ``lift="block"`` embeds A -> A + 1,
    which generates a finite central extension: abc becomes a complex
    reflection in the line of some order m and the relator is (abc)^m.
    """
    if lift not in ("exact", "block"):
        raise GeometryError("lift must be 'exact' or 'block'")
    _, B, C = triangle_vertices_disk(p, q, r)
    S_AB = np.eye(2, dtype=complex)
    S_CA = np.diag([1.0, np.exp(2j * np.pi / p)])
    TB = transvection(np.array([B]))
    TBi = finv(TB)
    c_rel = TBi @ np.array([1.0, C])
    phi = np.angle(c_rel[1] / c_rel[0])
    S_BC = TB @ np.diag([1.0, np.exp(2j * phi)]) @ np.conj(TBi)
    a = S_CA @ np.conj(S_AB)
    b = S_AB @ np.conj(S_BC)
    c = S_BC @ np.conj(S_CA)
    # scale each rotation to eigenvalue 1 on its fixed point, so a^p = I exactly
    mats = []
    for m, v in ((a, np.array([1.0, 0.0])), (b, np.array([1.0, B])), (c, np.array([1.0, C]))):
        mats.append(m / (m @ v)[0])
    m_abc = 1
    if n > 1 and lift == "exact":
        mats = _lift_to_line_stabilizer(mats, (p, q, r))
    elif n > 1:
        kappa = (mats[0] @ mats[1] @ mats[2])[0, 0]
        frac = Fraction(float(np.angle(kappa) / (2 * np.pi)) % 1.0)
        m_abc = frac.limit_denominator(10_000).denominator
        mats = [np.pad(m_, ((0, 1), (0, 1))) + np.diag([0, 0, 1.0]) for m_ in mats]
    if n == 1:
        gens = tuple(embed_subgroup("su11-complex-line", m, 1) for m in mats)
    else:
        gens = []
        for m in mats:
            big = np.eye(n + 1, dtype=complex)
            big[:3, :3] = m
            gens.append(Isometry(big))
        gens = tuple(gens)
    sys = GeneratorSystem(("a", "b", "c"), gens, name=f"dyck({p},{q},{r})",
                          meta={"vertices": (0j, B, C)})
    rels = [f"a^{p}", f"b^{q}", f"c^{r}", " ".join(["a b c"] * m_abc)]
    return sys.with_relators(rels)


def _lift_to_line_stabilizer(mats, orders):
    """Choose normal rotations diag(A, zeta) so that the relators survive in U(1,1) x U(1).

    With a^p = b^q = c^r = I, abc is a scalar kappa; the embedding
    A -> A + (root of unity) is a homomorphism iff kappa is a product
    zeta_p^i zeta_q^j zeta_r^k.  Returns 3x3 blocks or raises.
    """
    kappa = (mats[0] @ mats[1] @ mats[2])[0, 0]
    p, q, r = orders
    for i in range(p):
        for j in range(q):
            for k in range(r):
                mu = np.exp(2j * np.pi * np.array([i / p, j / q, k / r]))
                if abs(np.prod(mu) - kappa) < 1e-9:
                    out = []
                    for m, u in zip(mats, mu):
                        big = np.zeros((3, 3), dtype=complex)
                        big[:2, :2] = m
                        big[2, 2] = u
                        out.append(big)
                    return out
    raise GeometryError(
        f"the ({p},{q},{r}) rotations do not lift to the stabilizer of a complex line "
        "in PU(n,1) for n >= 2; use n = 1"
    )


def _real_reflection(w) -> np.ndarray:
    """Reflection x -> x - 2 <x,w>/<w,w> w in O(2,1), w a real positive vector."""
    J = np.diag([-1.0, 1.0, 1.0])
    return np.eye(3) - 2.0 * np.outer(w, J @ w) / (w @ J @ w)


def real_triangle_rep(p: int, q: int, r: int, n: int = 2) -> GeneratorSystem:
    """The (p,q,r) rotation group acting on the totally real plane (real Fuchsian).

    The real plane {z real} of the ball is the Klein model of curvature -1,
    so a curvature -1 length L sits at Klein radius tanh(L).  Side lines
    are chords; their polars are J (P x Q) for vertex lifts P, Q.
    """
    if n < 2:
        raise GeometryError("a real plane needs n >= 2")
    la, lb, lc = triangle_sides(p, q, r)
    J = np.diag([-1.0, 1.0, 1.0])
    A = np.array([1.0, 0.0, 0.0])
    B = np.array([1.0, np.tanh(lc), 0.0])
    C = np.array([1.0, np.tanh(lb) * np.cos(np.pi / p), np.tanh(lb) * np.sin(np.pi / p)])
    s_ab, s_bc, s_ca = (_real_reflection(J @ np.cross(P, Q)) for P, Q in ((A, B), (B, C), (C, A)))
    mats = (s_ca @ s_ab, s_ab @ s_bc, s_bc @ s_ca)
    gens = tuple(embed_subgroup("so21-real-plane", m, n) for m in mats)
    sys = GeneratorSystem(("a", "b", "c"), gens, name=f"real-triangle({p},{q},{r})")
    return sys.with_relators([f"a^{p}", f"b^{q}", f"c^{r}", "a b c"])


# ---------------------------------------------------------------- polygon groups


def right_angled_polygon(p: int, tol: float = 1e-12) -> tuple[float, np.ndarray, np.ndarray]:
    """Regular right-angled p-gon in the real plane (Klein model).

    Returns (R, vertices, polars): vertex k is R e^{2 pi i k/p} as a real
    point of the ball, and polars[k] is the real polar vector of the
    complex line through vertices k and k+1.  R solves <w_k, w_{k+1}> = 0
    by bisection.
    """
    if p < 5:
        raise GeometryError("no regular right-angled p-gon for p < 5")
    J = np.diag([-1.0, 1.0, 1.0])
    ang = 2 * np.pi * np.arange(p) / p

    def polars(R):
        V = np.stack([np.ones(p), R * np.cos(ang), R * np.sin(ang)], axis=1)
        W = np.array([J @ np.cross(V[k], V[(k + 1) % p]) for k in range(p)])
        return V, W

    def cos_angle(R):
        _, W = polars(R)
        w0, w1 = W[0], W[1]
        return (w0 @ J @ w1) / np.sqrt((w0 @ J @ w0) * (w1 @ J @ w1))

    lo, hi = 1e-6, 1.0 - 1e-12
    f_lo = cos_angle(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if np.sign(cos_angle(mid)) == np.sign(f_lo):
            lo = mid
        else:
            hi = mid
    R = 0.5 * (lo + hi)
    V, W = polars(R)
    W = W / np.linalg.norm(W, axis=1, keepdims=True)
    return R, V, W


def polygon_rep(p: int, q: int, n: int = 2) -> GeneratorSystem:
    """Complex reflections of order q in the complex lines through the edges of a
    regular right-angled p-gon; adjacent generators commute."""
    if q < 2:
        raise GeometryError("reflection order must be >= 2")
    _, _, W = right_angled_polygon(p)
    pad = np.zeros((p, n + 1))
    pad[:, :3] = W
    gens = tuple(complex_reflection(w.astype(complex), q) for w in pad)
    labels = tuple(f"a{i + 1}" for i in range(p))
    sys = GeneratorSystem(labels, gens, name=f"polygon({p},{q})", meta={"polars": pad})
    rels = [f"a{i + 1}^{q}" for i in range(p)]
    rels += [f"a{i + 1} a{(i + 1) % p + 1} a{i + 1}^-1 a{(i + 1) % p + 1}^-1" for i in range(p)]
    return sys.with_relators(rels)


def cyclic_system(g: Isometry, label: str = "g") -> GeneratorSystem:
    return GeneratorSystem((label,), (g,), name="cyclic")


# ---------------------------------------------------------------- Schottky systems


def _fixed_pairs(hyperbolics):
    pairs = []
    for g in hyperbolics:
        c = classify(g)
        if c.label is not IsometryType.HYPERBOLIC:
            raise GeometryError(f"Schottky input must be hyperbolic, got {c.label.value}")
        pairs.append((c.attracting, c.repelling, c.translation_length))
    return pairs


def fixed_point_gap(pairs) -> float:
    pts = [p for pair in pairs for p in pair[:2]]
    gap = np.inf
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            gap = min(gap, boundary_gauge(pts[i], pts[j]))
    return float(gap)


def schottky_from_powers(hyperbolics, t: int, labels=None) -> GeneratorSystem:
    """Generators gamma_i^t for hyperbolic gamma_i with pairwise disjoint fixed points."""
    t = int(t)
    if t < 1:
        raise GeometryError("power must be positive")
    hyperbolics = [g if isinstance(g, Isometry) else Isometry(g) for g in hyperbolics]
    pairs = _fixed_pairs(hyperbolics)
    gap = fixed_point_gap(pairs)
    if gap < 1e-6:
        raise GeometryError(f"generators share fixed points (Koranyi gap {gap:.3g})")
    labels = tuple(labels or (f"s{i + 1}" for i in range(len(hyperbolics))))
    gens = tuple(g**t for g in hyperbolics)
    return GeneratorSystem(labels, gens, name=f"schottky(t={t})",
                           meta={"fixed_point_gap": gap, "power": t,
                                 "translation_lengths": [t * p[2] for p in pairs]})


@dataclass(frozen=True)
class PingPongCertificate:
    """Sampled ping-pong evidence; heuristic, not an interval-arithmetic proof."""

    power: int
    attracting: tuple[BoundaryPoint, ...]
    repelling: tuple[BoundaryPoint, ...]
    radius: float  # common Koranyi radius of all 2k balls
    margins: tuple[float, ...]  # per generator: min over s and s^-1 of radius - image spread
    net_size: int
    heuristic: bool = True
    note: str = "sampled-net check, not a proof of discreteness"

    @property
    def margin(self) -> float:
        return min(self.margins)


class PingPongFailure(GeometryError):
    def __init__(self, message, best_margins):
        super().__init__(message)
        self.best_margins = best_margins


def _sphere_sample(rng, n, size):
    z = rng.normal(size=(size, n)) + 1j * rng.normal(size=(size, n))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _koranyi_sphere_sample(rng, center, radius, size):
    """Points xi of S^{2n-1} with |1 - xi.conj(center)| = radius^2."""
    n = center.shape[0]
    phi = rng.uniform(-1.0, 1.0, size) * np.arccos(min(1.0, radius**2 / 2.0))
    c = 1.0 - radius**2 * np.exp(1j * phi)
    perp = _sphere_sample(rng, n, size)
    perp = perp - np.outer(perp @ np.conj(center), center)
    nrm = np.linalg.norm(perp, axis=1, keepdims=True)
    perp = perp / np.where(nrm > 0, nrm, 1.0)
    s = np.sqrt(np.maximum(1.0 - np.abs(c) ** 2, 0.0))
    return c[:, None] * center[None, :] + s[:, None] * perp


def _image_on_sphere(M, xi):
    y = np.concatenate([np.ones((xi.shape[0], 1)), xi], axis=1) @ M.T
    z = y[:, 1:] / y[:, :1]
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def _ping_pong_margins(gens, attracting, repelling, radius, net_size, rng):
    n = attracting[0].shape[0]
    margins = []
    for g, xa, xr in zip(gens, attracting, repelling):
        worst = np.inf
        for M, into, away in ((g.matrix, xa, xr), (g.inverse.matrix, xr, xa)):
            pts = _sphere_sample(rng, n, net_size)
            pts = pts[boundary_gauge(pts, away) >= radius]
            edge = _koranyi_sphere_sample(rng, away, radius, max(net_size // 4, 16))
            imgs = _image_on_sphere(M, np.concatenate([pts, edge]))
            worst = min(worst, radius - float(np.max(boundary_gauge(imgs, into))))
        margins.append(worst)
    return tuple(margins)


def ping_pong_search(
    hyperbolics,
    t_max: int = 50,
    net_size: int = 2000,
    margin_floor: float = 0.0,
    ball_fraction: float = 0.45,
    seed: int = 0,
) -> tuple[int, PingPongCertificate]:
    """Smallest power t <= t_max whose sampled ping-pong certificate validates.

    Balls of Koranyi radius ball_fraction * (minimal gap between fixed
    points) are centered at all attracting and repelling points; since the
    gauge is a metric on the sphere they are disjoint for fractions < 1/2.
    For each generator s the net on the sphere minus the repelling ball
    (plus the ball's boundary) must land inside the attracting ball, and
    likewise for s^-1.  The result is a sampled heuristic.
    """
    hyperbolics = [g if isinstance(g, Isometry) else Isometry(g) for g in hyperbolics]
    pairs = _fixed_pairs(hyperbolics)
    gap = fixed_point_gap(pairs)
    if gap < 1e-6:
        raise GeometryError("generators share fixed points")
    if not 0 < ball_fraction < 0.5:
        raise GeometryError("ball_fraction must lie in (0, 1/2)")
    radius = ball_fraction * gap
    att = [p[0].xi for p in pairs]
    rep = [p[1].xi for p in pairs]
    best = None
    for t in range(1, int(t_max) + 1):
        rng = np.random.default_rng(seed)
        gens = [g**t for g in hyperbolics]
        margins = _ping_pong_margins(gens, att, rep, radius, net_size, rng)
        if best is None or min(margins) > min(best):
            best = margins
        if min(margins) > margin_floor:
            cert = PingPongCertificate(
                t, tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), radius, margins, net_size
            )
            return t, cert
    raise PingPongFailure(f"no power up to {t_max} passed (best margin {min(best):.3g})", best)
