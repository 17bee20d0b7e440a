"""Critical exponents, box-counting dimension and reference fractals."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .dynamics import OrbitCounts, OrbitIndex, PointCloud, enumerate_ball, orbit_counts
from .form import BudgetExhausted, GeometryError
from .groups import GeneratorSystem


@dataclass(frozen=True)
class ExponentEstimate:
    value: float
    method: str
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DimensionEstimate:
    value: float
    gauge: str
    scales: np.ndarray
    counts: np.ndarray
    residual: float


def poincare_partial(index: OrbitIndex, s: float) -> float:
    """Truncated Poincare series sum over the index of exp(-s d(o, g o))."""
    if s < 0:
        raise GeometryError("exponent s must be >= 0")
    return float(np.sum(np.exp(-s * index.displacement)))


def _linfit(x, y):
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    fit = A @ coef
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - fit) ** 2)) / ss if ss > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


def _clamp(value, n, diag):
    hi = 2.0 * n
    if not 0.0 <= value <= hi:
        warnings.warn(f"exponent estimate {value:.4g} clamped to [0, {hi}]", stacklevel=3)
        diag["unclamped"] = value
        value = min(max(value, 0.0), hi)
    return value


def entropy_estimate(counts: OrbitCounts, window=None, n: int | None = None) -> ExponentEstimate:
    """Least-squares slope of log N(r) against r over a radius window.

    The default window is the top 40% of the grid, where small-radius
    transients have died down.
    """
    r = np.asarray(counts.radii, dtype=float)
    N = np.asarray(counts.counts, dtype=float)
    if window is None:
        lo, hi = r[0] + 0.6 * (r[-1] - r[0]), r[-1]
    else:
        lo, hi = window
    sel = (r >= lo) & (r <= hi) & (N > 0)
    if np.count_nonzero(sel) < 3 or hi <= lo:
        raise GeometryError("degenerate window: need >= 3 radii with nonzero counts")
    slope, _, r2 = _linfit(r[sel], np.log(N[sel]))
    diag = {"window": (float(lo), float(hi)), "r2": r2, "points": int(np.count_nonzero(sel))}
    if n is not None:
        slope = _clamp(slope, n, diag)
    return ExponentEstimate(slope, "growth-regression", diag)


def shell_slopes(index: OrbitIndex, s_grid, window, shells: int = 24):
    """Slope in r of log(sum over the shell [r, r+dr) of exp(-s d)) for each s.

    For orbits growing like e^{delta r} the slope is about delta - s, so
    its zero locates the exponent of convergence.
    """
    lo, hi = window
    edges = np.linspace(lo, hi, shells + 1)
    mids = 0.5 * (edges[1:] + edges[:-1])
    which = np.digitize(index.displacement, edges) - 1
    ok = (which >= 0) & (which < shells)
    d = index.displacement[ok]
    w = which[ok]
    out = []
    for s in np.atleast_1d(s_grid):
        sums = np.bincount(w, weights=np.exp(-s * (d - lo)), minlength=shells)
        keep = sums > 0
        if np.count_nonzero(keep) < 3:
            out.append(np.nan)
            continue
        out.append(_linfit(mids[keep], np.log(sums[keep]))[0])
    return np.array(out)


def critical_exponent(
    sys: GeneratorSystem,
    budget: int = 200_000,
    max_word_len: int = 60,
    threads: int = 1,
    index: OrbitIndex | None = None,
) -> ExponentEstimate:
    """Orbit-growth estimate of the critical exponent, cross-checked by a Poincare bracket.

    The index is grown breadth-first up to ``max_word_len`` or ``budget``
    elements; only radii below the index's completeness radius are used.
    The bracket is the s-interval where the shell sums of the Poincare
    series switch from growing to decaying in r.
    """
    if index is None:
        index = enumerate_ball(sys, max_word_len, threads=threads, max_elements=budget)
    R = min(index.complete_radius, float(index.displacement.max()))
    diag = {"elements": len(index), "word_len": int(index.lengths.max()),
            "complete_radius": R, "truncated": index.truncated}
    if not np.isfinite(R) or R <= 0:
        raise BudgetExhausted("budget too small: orbit ball not complete at any radius")
    grid = np.linspace(0.0, R, 201)
    est = entropy_estimate(orbit_counts(index, grid))
    lo, hi = est.diagnostics["window"]
    diag.update(est.diagnostics)
    s_grid = np.linspace(0.0, 2.0 * sys.n + 1.0, 200 * sys.n + 101)
    slopes = shell_slopes(index, s_grid, (lo, hi))
    good = np.isfinite(slopes)
    if np.count_nonzero(good) >= 2 and np.any(slopes[good] > 0) and np.any(slopes[good] <= 0):
        sg, sl = s_grid[good], slopes[good]
        k = int(np.argmax(sl <= 0))
        diag["bracket"] = (float(sg[max(k - 1, 0)]), float(sg[k]))
        # linear interpolation of the zero crossing
        if k > 0:
            s0 = sg[k - 1] + (sg[k] - sg[k - 1]) * sl[k - 1] / (sl[k - 1] - sl[k])
        else:
            s0 = sg[0]
        diag["poincare_estimate"] = float(s0)
    else:
        diag["bracket"] = None
        diag["poincare_estimate"] = None
        diag["flag"] = "bracket unstable: enlarge the budget"
    value = _clamp(est.value, sys.n, diag)
    return ExponentEstimate(value, "growth-regression", diag)


def spectral_bottom(delta: float, n: int) -> float:
    """Bottom of the L^2 spectrum from the critical exponent: n^2 or delta(2n - delta)."""
    if n < 1:
        raise GeometryError("n must be >= 1")
    if not 0.0 <= delta <= 2.0 * n:
        raise GeometryError(f"delta must lie in [0, {2 * n}]")
    return float(n * n) if delta <= n else float(delta * (2 * n - delta))


# ---------------------------------------------------------------- box counting


def _net_count(points, eps, gauge, tree, order):
    """Size of a greedy eps-net in the Koranyi gauge (every point within eps of a center).

    Neighbors are prefiltered with a euclidean ball of radius sqrt(2) eps,
    valid because |x - y|^2 = 2 Re(1 - <x, y>) <= 2 |1 - <x, y>| on the sphere.
    """
    covered = np.zeros(points.shape[0], dtype=bool)
    count = 0
    pre = np.sqrt(2.0) * eps * (1 + 1e-12)
    for i in order:
        if covered[i]:
            continue
        count += 1
        nb = np.asarray(tree.query_ball_point(tree.data[i], pre), dtype=int)
        ip = points[nb] @ np.conj(points[i])
        covered[nb[np.sqrt(np.abs(1.0 - ip)) <= eps]] = True
    return count


def _grid_count(points, eps):
    idx = np.floor((points - points.min(axis=0)) / eps).astype(np.int64)
    dims = tuple(int(m) + 1 for m in idx.max(axis=0))
    if np.prod(np.array(dims, dtype=float)) < 2.0**62:
        return len(np.unique(np.ravel_multi_index(idx.T, dims)))
    return len(np.unique(idx, axis=0))


def box_dimension(
    cloud,
    gauge: str = "koranyi",
    scales=None,
    min_points: int = 1000,
    min_scales: int = 4,
    min_decades: float = 1.5,
    min_count: int | None = None,
    max_fraction: float = 0.05,
    seed: int = 0,
) -> DimensionEstimate:
    """Slope of log(covering count) against log(1/eps).

    ``cloud`` is a PointCloud on the sphere (either gauge) or a real
    array of points (euclidean gauge only).  In the Koranyi gauge the
    count is the size of a greedy eps-net, since gauge balls are far from
    round in coordinates; in the euclidean gauge it is the number of
    occupied grid boxes of side eps.  Without explicit ``scales``, 25
    log-spaced scales over three decades are tried and those whose counts
    lie between ``min_count`` (20 for nets, 50 for grids) and
    ``max_fraction`` of the sample size are kept, avoiding both the coarse
    transient and saturation by the finite sample.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud)
    if gauge not in ("koranyi", "euclidean"):
        raise GeometryError(f"unknown gauge {gauge!r}")
    if gauge == "koranyi" and not np.iscomplexobj(pts):
        raise GeometryError("the Koranyi gauge needs complex sphere points")
    if pts.shape[0] < min_points:
        raise GeometryError(f"need at least {min_points} points, got {pts.shape[0]}")
    if np.iscomplexobj(pts):
        emb = np.concatenate([pts.real, pts.imag], axis=1)
    else:
        emb = np.asarray(pts, dtype=float)
    if gauge == "koranyi":
        tree = cKDTree(emb)
        order = np.random.default_rng(seed).permutation(pts.shape[0])

        def count(e):
            return _net_count(pts, e, gauge, tree, order)

        top = 1.0
        floor_count = 20 if min_count is None else min_count
    else:

        def count(e):
            return _grid_count(emb, e)

        top = float(np.max(np.ptp(emb, axis=0)))
        floor_count = 50 if min_count is None else min_count
    if scales is None:
        keep, counts = [], []
        for e in top * np.logspace(0.0, -3.0, 25):
            c = count(e)
            if c > max_fraction * pts.shape[0]:
                break
            if c >= floor_count:
                keep.append(e)
                counts.append(c)
        scales = np.array(keep)
        counts = np.array(counts)
    else:
        scales = np.sort(np.asarray(scales, dtype=float))[::-1]
        counts = np.array([count(e) for e in scales])
    if scales.size < min_scales:
        raise BudgetExhausted(f"only {scales.size} usable scales (need {min_scales}); enlarge the sample")
    decades = float(np.log10(scales.max() / scales.min()))
    if decades < min_decades - 1e-9:
        raise BudgetExhausted(f"scales span {decades:.2f} decades (need {min_decades}); enlarge the sample")
    slope, _, r2 = _linfit(np.log(1.0 / scales), np.log(counts))
    return DimensionEstimate(slope, gauge, scales, counts, 1.0 - r2)


# ---------------------------------------------------------------- reference fractals


def _in_open_middle(u, level):
    t = np.mod(np.asarray(u, dtype=float) * 3.0 ** (level - 1), 1.0)
    return (t > 1.0 / 3.0) & (t < 2.0 / 3.0)


def fractal_member(kind: str, point, depth: int) -> bool:
    """Membership in the depth-th stage of the Sierpinski carpet or Menger curve.

    A carpet point is removed at level k when both coordinates lie in an
    open middle third at that level.  A Menger point survives when each
    of its three coordinate-pair projections survives the carpet test.
    """
    p = np.asarray(point, dtype=float)
    if depth < 1:
        raise GeometryError("depth must be >= 1")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise GeometryError("point must lie in the unit square/cube")
    if kind == "sierpinski":
        if p.shape != (2,):
            raise GeometryError("carpet points are 2-vectors")
        pairs = [(0, 1)]
    elif kind == "menger":
        if p.shape != (3,):
            raise GeometryError("Menger points are 3-vectors")
        pairs = [(0, 1), (0, 2), (1, 2)]
    else:
        raise GeometryError(f"unknown fractal {kind!r}")
    for k in range(1, depth + 1):
        mid = _in_open_middle(p, k)
        if any(mid[i] and mid[j] for i, j in pairs):
            return False
    return True


def sample_fractal(kind: str, size: int, depth: int = 12, seed: int = 0) -> np.ndarray:
    """Random points of the carpet or Menger curve via random admissible base-3 digits."""
    rng = np.random.default_rng(seed)
    if kind == "sierpinski":
        dim = 2
    elif kind == "menger":
        dim = 3
    else:
        raise GeometryError(f"unknown fractal {kind!r}")
    digits = np.array([d for d in np.ndindex(*(3,) * dim) if sum(x == 1 for x in d) < 2], dtype=float)
    pts = np.zeros((size, dim))
    scale = 1.0
    for _ in range(depth):
        scale /= 3.0
        pts += digits[rng.integers(0, len(digits), size)] * scale
    pts += rng.uniform(0.0, scale, size=(size, dim))
    return pts


def sphere_sample(n: int, size: int, seed: int = 0) -> PointCloud:
    """Uniform points on S^{2n-1} in C^n."""
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(size, n)) + 1j * rng.normal(size=(size, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return PointCloud(z, ("uniform",) * size, "uniform-sphere")


def circle_sample(n: int, size: int, kind: str = "complex", seed: int = 0) -> PointCloud:
    """Uniform points on the complex circle (e^{it}, 0, ..) or the real circle (cos t, sin t, 0, ..)."""
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, 2.0 * np.pi, size)
    z = np.zeros((size, n), dtype=complex)
    if kind == "complex":
        z[:, 0] = np.exp(1j * t)
    elif kind == "real":
        if n < 2:
            raise GeometryError("a real circle needs n >= 2")
        z[:, 0], z[:, 1] = np.cos(t), np.sin(t)
    else:
        raise GeometryError(f"unknown circle kind {kind!r}")
    return PointCloud(z, (f"{kind}-circle",) * size, f"{kind}-circle")
