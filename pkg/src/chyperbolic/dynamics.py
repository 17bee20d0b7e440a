"""Orbit enumeration, limit-set samples, thin-part elements and conical approach."""

from __future__ import annotations

import hashlib
import json
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .form import BallPoint, BoundaryPoint, GeometryError, coords, hyperboloid_lift
from .geometry import BusemannSpec, busemann_lifts, distance_to_curve, ray_lifts
from .groups import GeneratorSystem, Word
from .isometry import IsometryType, classify

QUANT = 1e-7
MERGE_TOL = 1e-8  # ceiling; the per-candidate tolerance follows its rounding error
MERGE_FLOOR = 1e-12
_WEIGHT_SEED = 20240611


def _phase_weights(d: int) -> np.ndarray:
    rng = np.random.default_rng(_WEIGHT_SEED + d)
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


def canonical_matrices(M: np.ndarray) -> np.ndarray:
    """Frobenius-normalized representatives with a deterministic phase.

    The phase makes the fixed generic functional sum(W * M) real positive;
    unlike a largest-entry rule it does not jump between entries of
    nearly equal modulus.
    """
    M = M / np.linalg.norm(M, axis=(-2, -1), keepdims=True)
    s = np.einsum("...ij,ij->...", M, _phase_weights(M.shape[-1]))
    ph = np.conj(s) / np.abs(s)
    return M * ph[..., None, None]


def fingerprints(M: np.ndarray, offset: float = 0.0) -> list[bytes]:
    """Quantized (canonical matrix, log Frobenius norm) keys.

    The log-norm matters for large elements: s^k / ||s^k|| converges to a
    rank-one matrix, so the normalized matrices of s^6 and s^7 agree to
    ~1e-8 while their norms differ by e^{3 l(s)}.  Inputs are assumed
    scaled to |det| = 1.
    """
    C = canonical_matrices(M)
    lognorm = np.log(np.linalg.norm(M, axis=(-2, -1)))
    flat = np.concatenate([C.real, C.imag], axis=-1).reshape(C.shape[0], -1)
    flat = np.concatenate([flat, lognorm[:, None]], axis=1)
    Q = np.floor(flat / QUANT + offset).astype(np.int64)
    raw = Q.tobytes()
    w = Q.shape[1] * 8
    return [raw[i * w:(i + 1) * w] for i in range(Q.shape[0])]


def displacements(M: np.ndarray, x: np.ndarray) -> np.ndarray:
    """d(x, M x) for a q = -1 lift x, via sinh^2 d = q(Mx - x) + |<x, Mx - x>|^2."""
    D = M @ x - x
    sign = np.ones(x.shape[-1])
    sign[0] = -1.0
    s2 = (np.abs(D) ** 2) @ sign + np.abs((D * sign) @ np.conj(x)) ** 2
    return np.arcsinh(np.sqrt(np.maximum(s2, 0.0)))


@dataclass(frozen=True)
class OrbitElement:
    word: Word
    length: int
    displacement: float
    matrix: np.ndarray


@dataclass
class OrbitIndex:
    """Distinct group elements found by breadth-first search over reduced words."""

    system: GeneratorSystem
    basepoint: np.ndarray  # chart coordinates
    matrices: np.ndarray
    words: list
    lengths: np.ndarray
    displacement: np.ndarray
    max_word_len: int
    truncated: bool = False
    merges: int = 0
    collisions: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.words)

    def element(self, i: int) -> OrbitElement:
        return OrbitElement(Word(self.words[i]), int(self.lengths[i]),
                            float(self.displacement[i]), self.matrices[i])

    @property
    def complete_radius(self) -> float:
        """Heuristic radius up to which the orbit ball is believed complete.

        Smallest displacement among elements first reached at the last
        word length, minus the largest generator displacement.  Exact for
        free groups with monotone displacement along reduced words;
        otherwise a quasi-geodesic heuristic.
        """
        if self.truncated:
            last = int(self.lengths.max())
            mask = self.lengths >= last - 1
        else:
            mask = self.lengths == self.max_word_len
        if not np.any(mask):
            return float("inf")
        gen = self.displacement[self.lengths == 1]
        slack = float(gen.max()) if gen.size else 0.0
        return float(self.displacement[mask].min() - slack)


def _expand(frontier: np.ndarray, gens, x):
    cands = np.einsum("mij,gjk->mgik", frontier, gens).reshape(-1, *frontier.shape[1:])
    return cands, fingerprints(cands, 0.0), fingerprints(cands, 0.5), displacements(cands, x)


def enumerate_ball(
    sys: GeneratorSystem,
    L: int,
    basepoint=None,
    threads: int = 1,
    max_elements: int = 2_000_000,
    chunk: int = 4096,
) -> OrbitIndex:
    """Breadth-first enumeration of group elements of word length <= L.

    Candidates are products parent * generator for reduced extensions of
    the previous frontier.  Duplicates (relations) are merged through
    quantized fingerprints on two staggered grids and confirmed by the
    phase-minimized projective distance, with a tolerance proportional to
    the accumulated rounding error of each product (word length times
    prod ||g_i|| / ||g||).  Distinct elements of norm above ~e^25 can no
    longer be told apart in double precision.  Expansion of a frontier chunk
    may run on worker threads; merging is sequential in parent/letter
    order, so the result does not depend on ``threads``.
    """
    if L < 0:
        raise GeometryError("word length must be >= 0")
    d = sys.n + 1
    o = np.zeros(sys.n, dtype=complex) if basepoint is None else coords(basepoint)
    x = hyperboloid_lift(o / np.sqrt(max(1e-300, 1.0 - np.vdot(o, o).real)))
    letters = []
    for k in range(1, sys.rank + 1):
        letters += [k, -k]
    gens = np.array([sys.matrix_of(a) for a in letters])

    ident = np.eye(d, dtype=complex)[None]
    mats = [ident[0]]
    words = [()]
    lens = [0]
    disp = [float(displacements(ident, x)[0])]
    grid = ({}, {})
    for g, fp in zip(grid, (fingerprints(ident, 0.0)[0], fingerprints(ident, 0.5)[0])):
        g.setdefault(fp, []).append(0)
    canon = [canonical_matrices(ident)[0]]
    cond = [1.0]
    lognorms = [float(np.log(np.sqrt(d)))]
    gnorm = np.linalg.norm(gens, axis=(1, 2))

    frontier = [0]
    merges = collisions = 0
    truncated = False
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for length in range(1, L + 1):
            if not frontier or truncated:
                break
            F = np.array([mats[i] for i in frontier])
            pnorm = np.linalg.norm(F, axis=(1, 2))
            chunks = [F[s:s + chunk] for s in range(0, len(frontier), chunk)]
            if pool is not None:
                results = list(pool.map(lambda c: _expand(c, gens, x), chunks))
            else:
                results = [_expand(c, gens, x) for c in chunks]
            new_frontier = []
            base = 0
            for (cands, fa, fb, dd) in results:
                C = canonical_matrices(cands)
                cnorm = np.linalg.norm(cands, axis=(1, 2))
                clog = np.log(cnorm)
                for j in range(cands.shape[0]):
                    parent = frontier[base + j // len(letters)]
                    a = letters[j % len(letters)]
                    pw = words[parent]
                    if pw and pw[-1] == -a:
                        continue
                    cj = cond[parent] * gnorm[j % len(letters)] * pnorm[base + j // len(letters)] / cnorm[j]
                    hits = set(grid[0].get(fa[j], ())) | set(grid[1].get(fb[j], ()))
                    dup = False
                    for h in sorted(hits):
                        tol = 64 * np.finfo(float).eps * length * max(cj, cond[h])
                        tol = min(MERGE_TOL, max(MERGE_FLOOR, tol))
                        if abs(clog[j] - lognorms[h]) >= tol:
                            continue
                        ip = np.vdot(canon[h], C[j])
                        if np.linalg.norm(C[j] - ip / abs(ip) * canon[h]) < tol:
                            dup = True
                            break
                    if dup:
                        merges += 1
                        continue
                    if hits:
                        collisions += 1
                    if len(words) >= max_elements:
                        truncated = True
                        break
                    idx = len(words)
                    mats.append(cands[j])
                    canon.append(C[j])
                    cond.append(cj)
                    lognorms.append(clog[j])
                    words.append(pw + (a,))
                    lens.append(length)
                    disp.append(float(dd[j]))
                    grid[0].setdefault(fa[j], []).append(idx)
                    grid[1].setdefault(fb[j], []).append(idx)
                    new_frontier.append(idx)
                base += cands.shape[0] // len(letters)
                if truncated:
                    break
            frontier = new_frontier
    finally:
        if pool is not None:
            pool.shutdown()
    M = np.array(mats)
    M.setflags(write=False)
    return OrbitIndex(sys, o, M, words, np.array(lens), np.array(disp), L,
                      truncated, merges, collisions)


@dataclass(frozen=True)
class OrbitCounts:
    radii: np.ndarray
    counts: np.ndarray


def orbit_counts(index: OrbitIndex, grid) -> OrbitCounts:
    """N(r) = number of indexed elements with d(o, g o) <= r."""
    if len(index) == 0:
        raise GeometryError("empty orbit index")
    r = np.sort(np.asarray(grid, dtype=float))
    disp = np.sort(index.displacement)
    return OrbitCounts(r, np.searchsorted(disp, r, side="right"))


# ---------------------------------------------------------------- limit sets


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # (N, n) complex, unit norm
    provenance: tuple[str, ...]
    method: str
    gauge: str = "koranyi"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        if pts.ndim != 2:
            raise GeometryError("point cloud must be a 2-d array")
        if pts.shape[0] and np.max(np.abs(np.linalg.norm(pts, axis=1) - 1.0)) >= 1e-9:
            raise GeometryError("cloud points must lie on the unit sphere")
        if len(self.provenance) != pts.shape[0]:
            raise GeometryError("one provenance entry per point")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]


def limit_sample(
    sys: GeneratorSystem,
    L: int,
    method: str = "orbit-endpoint",
    cutoff: float = 5.0,
    index: OrbitIndex | None = None,
    threads: int = 1,
) -> PointCloud:
    """Sample the limit set from orbit endpoints or attracting fixed points."""
    if index is None:
        index = enumerate_ball(sys, L, threads=threads)
    labels = sys.labels
    if method == "orbit-endpoint":
        sel = np.nonzero(index.displacement >= cutoff)[0]
        if sel.size == 0:
            raise GeometryError(f"no orbit points beyond cutoff {cutoff}; increase L")
        x = hyperboloid_lift(index.basepoint / np.sqrt(1.0 - np.vdot(index.basepoint, index.basepoint).real))
        Y = index.matrices[sel] @ x
        Z = Y[:, 1:] / Y[:, :1]
        pts = Z / np.linalg.norm(Z, axis=1, keepdims=True)
        prov = tuple(Word(index.words[i]).format(labels) for i in sel)
    elif method == "conjugate-fixed-points":
        pts, prov = [], []
        hyperbolic = 0
        for i in range(len(index)):
            if index.lengths[i] == 0:
                continue
            c = classify(index.matrices[i])
            if c.label is IsometryType.HYPERBOLIC:
                hyperbolic += 1
                pts.append(c.attracting.xi)
                prov.append("fix+ " + Word(index.words[i]).format(labels))
        if not hyperbolic:
            raise GeometryError("no hyperbolic words found (elementary parabolic input?)")
        pts = np.array(pts)
        prov = tuple(prov)
    else:
        raise GeometryError(f"unknown limit sampling method {method!r}")
    if len(pts) < 3:
        warnings.warn("very small limit cloud: the group may be elementary", stacklevel=2)
    return PointCloud(pts, prov, method)


def thin_part_elements(index: OrbitIndex, x, eps: float) -> list[OrbitElement]:
    """Indexed elements moving x by less than eps, sorted by displacement."""
    if eps <= 0:
        raise GeometryError("eps must be positive")
    z = coords(x)
    lift = hyperboloid_lift(z / np.sqrt(1.0 - np.vdot(z, z).real))
    dd = displacements(index.matrices, lift)
    sel = np.nonzero(dd < eps)[0]
    sel = sel[np.argsort(dd[sel], kind="stable")]
    return [OrbitElement(Word(index.words[i]), int(index.lengths[i]), float(dd[i]),
                         index.matrices[i]) for i in sel]


@dataclass(frozen=True)
class ConicalWitnesses:
    conical: bool
    depths: np.ndarray  # Busemann depths of orbit points within R of the ray
    distances: np.ndarray


def conical_witnesses(xi, index: OrbitIndex, R: float, K: int = 10) -> ConicalWitnesses:
    """Orbit points within distance R of the ray from the basepoint to xi.

    Depth is minus the Busemann function at xi, so it grows along the
    ray.  The point counts as conical when at least K witnesses have
    distinct positive depths.
    """
    xi = xi if isinstance(xi, BoundaryPoint) else BoundaryPoint(xi)
    o = BallPoint(index.basepoint)
    x = hyperboloid_lift(index.basepoint / np.sqrt(1.0 - np.vdot(index.basepoint, index.basepoint).real))
    Y = index.matrices @ x
    hi = float(index.displacement.max()) + R + 1.0
    dist = distance_to_curve(Y, lambda s: ray_lifts(o, xi, s), 0.0, hi, coarse=65)
    # orbit points deep along the ray can round <y, xi> to 0: depth +inf is the right limit
    with np.errstate(divide="ignore"):
        depth = -busemann_lifts(BusemannSpec(xi, o), Y, -1.0)
    near = dist < R
    dep = np.sort(depth[near])
    dep = dep[dep > 1e-9]
    distinct = np.unique(np.round(dep, 9))
    return ConicalWitnesses(bool(distinct.size >= K), distinct, dist[near])


def conical_test(xi, index: OrbitIndex, R: float, K: int = 10) -> bool:
    return conical_witnesses(xi, index, R, K).conical


# ---------------------------------------------------------------- spill format

_MAGIC = b"CHYORB01"


def _record_fingerprint(M) -> bytes:
    return hashlib.blake2b(fingerprints(M[None], 0.0)[0], digest_size=16).digest()


def save_index(index: OrbitIndex, path) -> None:
    """Write an OrbitIndex as length-prefixed little-endian binary records.

    Layout: magic "CHYORB01"; u32 header length; UTF-8 JSON header
    (labels, basepoint, max word length, flags); then per element
    u32 record length followed by the record: 16-byte blake2b
    fingerprint, u16 matrix size d, d*d complex128 entries (row major),
    u32 word length, int16 signed 1-based generator letters.
    """
    header = json.dumps({
        "labels": list(index.system.labels),
        "basepoint": [[z.real, z.imag] for z in index.basepoint],
        "max_word_len": index.max_word_len,
        "truncated": index.truncated,
        "count": len(index),
    }).encode()
    with open(Path(path), "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for M, w in zip(index.matrices, index.words):
            d = M.shape[0]
            rec = (_record_fingerprint(M) + struct.pack("<H", d)
                   + np.ascontiguousarray(M, dtype="<c16").tobytes()
                   + struct.pack("<I", len(w)) + np.asarray(w, dtype="<i2").tobytes())
            fh.write(struct.pack("<I", len(rec)))
            fh.write(rec)


def load_index(path, system: GeneratorSystem) -> OrbitIndex:
    """Read a spill file; fingerprints are checked against the stored matrices."""
    data = Path(path).read_bytes()
    if data[:8] != _MAGIC:
        raise GeometryError("not an orbit spill file")
    (hl,) = struct.unpack_from("<I", data, 8)
    header = json.loads(data[12:12 + hl])
    if tuple(header["labels"]) != system.labels:
        raise GeometryError("spill file labels do not match the generator system")
    pos = 12 + hl
    mats, words = [], []
    while pos < len(data):
        (rl,) = struct.unpack_from("<I", data, pos)
        rec = data[pos + 4:pos + 4 + rl]
        pos += 4 + rl
        fp = rec[:16]
        (d,) = struct.unpack_from("<H", rec, 16)
        off = 18 + 16 * d * d
        M = np.frombuffer(rec[18:off], dtype="<c16").reshape(d, d).astype(complex)
        (wl,) = struct.unpack_from("<I", rec, off)
        w = tuple(int(v) for v in np.frombuffer(rec[off + 4:off + 4 + 2 * wl], dtype="<i2"))
        if _record_fingerprint(M) != fp:
            raise GeometryError("corrupt spill record (fingerprint mismatch)")
        mats.append(M)
        words.append(w)
    o = np.array([complex(a, b) for a, b in header["basepoint"]])
    x = hyperboloid_lift(o / np.sqrt(1.0 - np.vdot(o, o).real))
    M = np.array(mats)
    M.setflags(write=False)
    return OrbitIndex(system, o, M, words, np.array([len(w) for w in words]),
                      displacements(M, x), header["max_word_len"], header["truncated"])
