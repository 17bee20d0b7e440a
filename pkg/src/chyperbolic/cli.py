"""Command-line driver: build a group, run one task, write artifacts and a JSON summary."""

from __future__ import annotations

import argparse
import copy
import json
import re
import sys
from pathlib import Path

import numpy as np
import yaml

from .dimension import (
    box_dimension,
    circle_sample,
    critical_exponent,
    sample_fractal,
    spectral_bottom,
    sphere_sample,
)
from .dynamics import PointCloud, enumerate_ball, limit_sample, orbit_counts, save_index
from .form import BudgetExhausted, GeometryError, coords, project_to_chart
from .groups import (
    GeneratorSystem,
    PingPongFailure,
    cyclic_system,
    dyck_rep,
    heisenberg_lattice,
    polygon_rep,
    real_triangle_rep,
    relator_check,
    schottky_from_powers,
    ping_pong_search,
)
from .isometry import Isometry, boost, classify, weil_dimension, zeta

EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_INVARIANT = 0, 2, 3, 4
TASKS = ("classify", "orbit", "limitset", "exponent", "boxdim", "charvar", "fractal")
GROUP_KINDS = ("boost", "heisenberg", "dyck", "real-triangle", "polygon", "schottky", "matrix-file")
# bytes per indexed element beyond the matrix itself (word, fingerprints, bookkeeping)
_ELEMENT_OVERHEAD = 256

DEFAULTS = {
    "task": "classify",
    "seed": 0,
    "threads": 1,
    "out": "chyperbolic-out",
    "group": {
        "kind": "boost",
        "n": 1,
        "length": 1.0,  # boost
        "p": 2, "q": 3, "r": 7,  # dyck / real-triangle (q also the polygon order)
        "lift": "exact",  # dyck: exact | block
        "lengths": [1.0, 1.0],  # schottky: translation lengths of the seed boosts
        "power": None,  # schottky: fixed power, or null to search
        "t_max": 50,
        "file": None,  # matrix-file
    },
    "budgets": {
        "L": 8,
        "memory_mb": 2048,
        "max_elements": 2_000_000,
        "samples": 100_000,
    },
    "classify": {"word": None},
    "limitset": {"method": "orbit-endpoint", "cutoff": 5.0, "pole": None, "ply": True},
    "exponent": {"max_word_len": 60},
    "boxdim": {"source": "limitset", "gauge": "koranyi", "min_decades": 1.5, "min_scales": 4},
    "charvar": {"words": None},
    "fractal": {"kind": "sierpinski", "depth": 12, "samples": 1_000_000},
}


class InputError(ValueError):
    pass


class InvariantFailure(RuntimeError):
    pass


# ---------------------------------------------------------------- matrix text format


def format_complex(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}i"


def format_matrix(M) -> str:
    return "\n".join(" ".join(format_complex(complex(z)) for z in row) for row in np.asarray(M))


def format_system(system: GeneratorSystem) -> str:
    """Plain-text generator file: '# label NAME' then one matrix row per line."""
    out = []
    if system.name:
        out.append(f"# name {system.name}")
    for lab, g in zip(system.labels, system.generators):
        out.append(f"# label {lab}")
        out.append(format_matrix(g.matrix))
    for w in system.relators or ():
        out.append(f"@relator {w.format(system.labels) or '1'}")
    return "\n".join(out) + "\n"


_ENTRY = re.compile(r"^[+-]?[0-9.eE+-]+[+-][0-9.eE+-]*i$|^[+-]?[0-9.eE+-]+$")


def parse_complex(tok: str) -> complex:
    if not _ENTRY.match(tok):
        raise InputError(f"bad matrix entry {tok!r}")
    try:
        z = complex(tok.replace("i", "j"))
    except ValueError:
        raise InputError(f"bad matrix entry {tok!r}") from None
    if not np.isfinite(z.real) or not np.isfinite(z.imag):
        raise InputError(f"non-finite matrix entry {tok!r}")
    return z


def parse_system(text: str) -> GeneratorSystem:
    labels, rows, relators, name = [], [], [], ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split(None, 1)
            if parts and parts[0] == "label":
                if len(parts) < 2:
                    raise InputError(f"line {lineno}: label header without a name")
                labels.append(parts[1].strip())
                rows.append([])
            elif parts and parts[0] == "name" and len(parts) == 2:
                name = parts[1].strip()
            continue
        if line.startswith("@relator"):
            relators.append(line[len("@relator"):].strip())
            continue
        if not labels:
            raise InputError(f"line {lineno}: matrix row before any '# label' header")
        rows[-1].append([parse_complex(t) for t in line.split()])
    if not labels:
        raise InputError("no generators in matrix file")
    gens = []
    for lab, r in zip(labels, rows):
        if not r or any(len(x) != len(r) for x in r):
            raise InputError(f"generator {lab!r} is not a square matrix")
        try:
            gens.append(Isometry(np.array(r)))
        except GeometryError as e:
            raise InputError(f"generator {lab!r}: {e}") from None
    try:
        system = GeneratorSystem(tuple(labels), tuple(gens), name=name)
        return system.with_relators(relators) if relators else system
    except GeometryError as e:
        raise InputError(str(e)) from None


def read_system(path) -> GeneratorSystem:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read matrix file: {e}") from None
    return parse_system(text)


# ---------------------------------------------------------------- point cloud export


def cloud_csv(cloud: PointCloud, lengths=None) -> str:
    n = cloud.points.shape[1]
    head = [f"re{k + 1},im{k + 1}" for k in range(n)] + ["word_length", "method"]
    lines = [",".join(head)]
    for i, z in enumerate(cloud.points):
        cols = [f"{v.real:.17g},{v.imag:.17g}" for v in z]
        cols.append(str(int(lengths[i])) if lengths is not None else "")
        cols.append(cloud.method)
        lines.append(",".join(cols))
    return "\n".join(lines) + "\n"


def stereographic(points, pole=None) -> np.ndarray:
    """Map S^3 in C^2 = R^4 to R^3 by projection from ``pole`` (default (0, i))."""
    X = np.concatenate([points.real, points.imag], axis=1)
    if X.shape[1] != 4:
        raise InputError("stereographic export needs n = 2")
    p = np.array([0, 0, 0, 1.0]) if pole is None else np.asarray(pole, dtype=complex)
    if p.shape == (2,):
        p = np.concatenate([p.real, p.imag])
    p = np.asarray(p, dtype=float)
    if p.shape != (4,) or np.linalg.norm(p) == 0:
        raise InputError("pole must be a nonzero complex 2-vector")
    p = p / np.linalg.norm(p)
    # orthonormal frame whose last vector is the pole
    Q, _ = np.linalg.qr(np.column_stack([p, np.eye(4)[:, :3]]))
    Q = np.column_stack([Q[:, 1:], Q[:, 0] * np.sign(Q[:, 0] @ p)])
    Y = X @ Q
    with np.errstate(divide="ignore", invalid="ignore"):
        return Y[:, :3] / (1.0 - Y[:, 3:4])


def cloud_ply(xyz) -> str:
    xyz = xyz[np.all(np.isfinite(xyz), axis=1)]
    head = ["ply", "format ascii 1.0", f"element vertex {len(xyz)}",
            "property double x", "property double y", "property double z", "end_header"]
    return "\n".join(head + [" ".join(f"{v:.17g}" for v in r) for r in xyz]) + "\n"


# ---------------------------------------------------------------- config


def _merge(base: dict, over: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if k not in base:
            raise InputError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise InputError(f"config key {path + k!r} must be a mapping")
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            out[k] = v
    return out


def load_config(path=None, overrides=None) -> dict:
    user = {}
    if path is not None:
        try:
            user = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as e:
            raise InputError(f"cannot read config: {e}") from None
        if not isinstance(user, dict):
            raise InputError("config must be a mapping")
    cfg = _merge(DEFAULTS, user)
    for k, v in (overrides or {}).items():
        if v is not None:
            cfg[k] = v
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    if cfg["task"] not in TASKS:
        raise InputError(f"unknown task {cfg['task']!r}; choose from {', '.join(TASKS)}")
    if cfg["group"]["kind"] not in GROUP_KINDS:
        raise InputError(f"unknown group kind {cfg['group']['kind']!r}")
    for key in ("L", "memory_mb", "max_elements", "samples"):
        v = cfg["budgets"][key]
        if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
            raise InputError(f"budgets.{key} must be a positive integer")
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise InputError("seed must be a non-negative integer")
    if not isinstance(cfg["threads"], int) or cfg["threads"] < 1:
        raise InputError("threads must be a positive integer")


# ---------------------------------------------------------------- tasks


def build_group(cfg: dict) -> GeneratorSystem:
    g = cfg["group"]
    kind, n = g["kind"], int(g["n"])
    if kind == "boost":
        return cyclic_system(boost(float(g["length"]), n))
    if kind == "heisenberg":
        return heisenberg_lattice(n)
    if kind == "dyck":
        return dyck_rep(int(g["p"]), int(g["q"]), int(g["r"]), n=n, lift=g["lift"])
    if kind == "real-triangle":
        return real_triangle_rep(int(g["p"]), int(g["q"]), int(g["r"]), n=max(n, 2))
    if kind == "polygon":
        return polygon_rep(int(g["p"]), int(g["q"]), n=max(n, 2))
    if kind == "schottky":
        lengths = [float(x) for x in g["lengths"]]
        n = max(n, len(lengths))
        seeds = [boost(ell, n, axis=i + 1) for i, ell in enumerate(lengths)]
        t = g["power"]
        if t is None:
            try:
                t, _ = ping_pong_search(seeds, t_max=int(g["t_max"]), seed=cfg["seed"])
            except PingPongFailure as e:
                raise BudgetExhausted(str(e)) from None
        return schottky_from_powers(seeds, int(t))
    if g["file"] is None:
        raise InputError("group.file is required for kind matrix-file")
    return read_system(g["file"])


def _max_elements(cfg, system) -> int:
    d = system.n + 1
    by_memory = cfg["budgets"]["memory_mb"] * 2**20 // (16 * d * d + _ELEMENT_OVERHEAD)
    return int(min(cfg["budgets"]["max_elements"], by_memory))


def _index(cfg, system, L=None, budget=None):
    idx = enumerate_ball(system, cfg["budgets"]["L"] if L is None else L, threads=cfg["threads"],
                         max_elements=_max_elements(cfg, system) if budget is None else budget)
    if idx.collisions:
        raise InvariantFailure(f"{idx.collisions} fingerprint collisions during enumeration")
    return idx


def _check_presentation(system) -> dict:
    if not system.relators:
        return {"relators": 0}
    rep = relator_check(system)
    if not rep.passed:
        raise InvariantFailure(f"relators fail (max residual {rep.max_residual:.3g})")
    return {"relators": len(system.relators), "relator_max_residual": rep.max_residual}


def _finite(x):
    return None if x is None or not np.isfinite(x) else float(x)


def task_classify(cfg, system, out: Path) -> dict:
    word = cfg["classify"]["word"] or system.labels[0]
    c = classify(system.evaluate(word))
    rec = {"word": word, "label": c.label.value, "translation_length": float(c.translation_length)}
    rec["boundary_fixed_points"] = [[[z.real, z.imag] for z in p.xi] for p in c.boundary_fixed_points]
    if c.fixed_point is not None:
        rec["fixed_point"] = [[z.real, z.imag] for z in coords(project_to_chart(c.fixed_point))]
    return rec


def task_orbit(cfg, system, out: Path) -> dict:
    idx = _index(cfg, system)
    save_index(idx, out / "orbit.bin")
    R = float(idx.displacement.max()) if len(idx) else 0.0
    counts = orbit_counts(idx, np.linspace(0.0, R, 101))
    lines = ["radius,count"] + [f"{r:.17g},{c}" for r, c in zip(counts.radii, counts.counts)]
    (out / "counts.csv").write_text("\n".join(lines) + "\n")
    if idx.truncated:
        raise BudgetExhausted(f"element budget reached at {len(idx)} elements (artifacts are partial)")
    return {"elements": len(idx), "merges": idx.merges, "collisions": idx.collisions,
            "max_displacement": R, "complete_radius": _finite(idx.complete_radius)}


def _limit_cloud(cfg, system):
    ls = cfg["limitset"]
    idx = _index(cfg, system)
    cloud = limit_sample(system, cfg["budgets"]["L"], method=ls["method"],
                         cutoff=float(ls["cutoff"]), index=idx)
    lengths = None
    if ls["method"] == "orbit-endpoint":
        lengths = idx.lengths[np.nonzero(idx.displacement >= float(ls["cutoff"]))[0]]
    return cloud, lengths


def task_limitset(cfg, system, out: Path) -> dict:
    cloud, lengths = _limit_cloud(cfg, system)
    (out / "cloud.csv").write_text(cloud_csv(cloud, lengths))
    rec = {"points": len(cloud), "method": cloud.method}
    if system.n == 2 and cfg["limitset"]["ply"]:
        (out / "cloud.ply").write_text(cloud_ply(stereographic(cloud.points, cfg["limitset"]["pole"])))
        rec["ply"] = "cloud.ply"
    return rec


def task_exponent(cfg, system, out: Path) -> dict:
    est = critical_exponent(system, budget=_max_elements(cfg, system),
                            max_word_len=int(cfg["exponent"]["max_word_len"]), threads=cfg["threads"])
    d = est.diagnostics
    rec = {"delta": est.value, "method": est.method, "elements": d["elements"],
           "word_len": d["word_len"], "complete_radius": d["complete_radius"],
           "poincare_estimate": d.get("poincare_estimate"), "bracket": d.get("bracket")}
    if 0 <= est.value <= 2 * system.n:
        rec["spectral_bottom"] = spectral_bottom(est.value, system.n)
    return rec


def task_boxdim(cfg, system, out: Path) -> dict:
    b, N, seed = cfg["boxdim"], cfg["budgets"]["samples"], cfg["seed"]
    src = b["source"]
    n = int(cfg["group"]["n"])
    if src == "limitset":
        cloud, _ = _limit_cloud(cfg, system)
    elif src == "sphere":
        cloud = sphere_sample(n, N, seed)
    elif src in ("complex-circle", "real-circle"):
        cloud = circle_sample(n, N, src.split("-")[0], seed)
    elif src in ("sierpinski", "menger"):
        cloud = sample_fractal(src, N, depth=int(cfg["fractal"]["depth"]), seed=seed)
    else:
        raise InputError(f"unknown boxdim source {src!r}")
    gauge = "euclidean" if src in ("sierpinski", "menger") else b["gauge"]
    est = box_dimension(cloud, gauge, min_points=min(1000, N), min_scales=int(b["min_scales"]),
                        min_decades=float(b["min_decades"]), seed=seed)
    return {"dimension": est.value, "gauge": est.gauge, "source": src, "points": int(len(cloud)),
            "scales": [float(s) for s in est.scales], "counts": [int(c) for c in est.counts],
            "fit_residual": est.residual}


def task_charvar(cfg, system, out: Path) -> dict:
    """zeta of each word; with two words a, b the triple (a, b, (ab)^-1) feeds the Weil count."""
    words = cfg["charvar"]["words"] or list(system.labels[:2])
    if system.n != 2:
        raise InputError("charvar needs a system in PU(2,1) (group.n = 2)")
    mats = [system.evaluate(w) for w in words]
    if len(mats) == 2:
        mats.append(np.linalg.inv(mats[0] @ mats[1]))
        words = list(words) + [f"({words[0]} {words[1]})^-1"]
    rec = {"words": list(words), "zeta": [zeta(M) for M in mats]}
    if len(mats) == 3:
        rec["weil_dimension"] = weil_dimension(*mats)
    return rec


def task_fractal(cfg, system, out: Path) -> dict:
    f = cfg["fractal"]
    pts = sample_fractal(f["kind"], int(f["samples"]), depth=int(f["depth"]), seed=cfg["seed"])
    cols = ["x", "y", "z"][: pts.shape[1]]
    lines = [",".join(cols)] + [",".join(f"{v:.17g}" for v in p) for p in pts]
    (out / "fractal.csv").write_text("\n".join(lines) + "\n")
    est = box_dimension(pts, "euclidean", min_points=min(1000, len(pts)),
                        min_decades=float(cfg["boxdim"]["min_decades"]), seed=cfg["seed"])
    return {"kind": f["kind"], "points": len(pts), "dimension": est.value,
            "scales": [float(s) for s in est.scales], "counts": [int(c) for c in est.counts]}


_TASKS = {"classify": task_classify, "orbit": task_orbit, "limitset": task_limitset,
          "exponent": task_exponent, "boxdim": task_boxdim, "charvar": task_charvar,
          "fractal": task_fractal}


def run(cfg: dict) -> tuple[int, dict]:
    """Execute one configured task; returns (exit status, summary record)."""
    out = Path(cfg["out"])
    summary = {"task": cfg["task"], "seed": cfg["seed"], "status": "ok"}
    try:
        validate(cfg)
        out.mkdir(parents=True, exist_ok=True)
        needs_group = cfg["task"] != "fractal" and not (
            cfg["task"] == "boxdim" and cfg["boxdim"]["source"] != "limitset")
        system = None
        if needs_group:
            system = build_group(cfg)
            summary["group"] = {"name": system.name, "labels": list(system.labels), "n": system.n}
            summary["group"].update(_check_presentation(system))
            (out / "generators.txt").write_text(format_system(system))
        summary["result"] = _TASKS[cfg["task"]](cfg, system, out)
        code = EXIT_OK
    except (InputError, GeometryError, yaml.YAMLError) as e:
        code, summary["status"], summary["error"] = EXIT_INPUT, "input-error", str(e)
    except BudgetExhausted as e:
        code, summary["status"], summary["error"] = EXIT_BUDGET, "budget-exhausted", str(e)
    except (InvariantFailure, FloatingPointError, np.linalg.LinAlgError) as e:
        code, summary["status"], summary["error"] = EXIT_INVARIANT, "invariant-failure", str(e)
    if out.is_dir():
        (out / "report.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return code, summary


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="chyperbolic", description=__doc__)
    ap.add_argument("--config", help="YAML run configuration")
    ap.add_argument("--task", choices=TASKS)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--print-config", action="store_true",
                    help="print the effective configuration with all defaults and exit")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config, {"task": args.task, "seed": args.seed,
                                        "threads": args.threads, "out": args.out})
    except InputError as e:
        print(f"chyperbolic: {e}", file=sys.stderr)
        print(json.dumps({"status": "input-error", "error": str(e)}, sort_keys=True))
        return EXIT_INPUT
    if args.print_config:
        print(yaml.safe_dump(cfg, sort_keys=False), end="")
        return EXIT_OK
    code, summary = run(cfg)
    if code:
        print(f"chyperbolic: {summary['error']}", file=sys.stderr)
    print(json.dumps(summary, sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
