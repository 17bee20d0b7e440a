import numpy as np
import pytest

from chyperbolic.dynamics import (
    conical_test,
    enumerate_ball,
    fingerprints,
    limit_sample,
    load_index,
    orbit_counts,
    save_index,
    thin_part_elements,
)
from chyperbolic.form import GeometryError
from chyperbolic.geometry import boundary_gauge
from chyperbolic.groups import (
    GeneratorSystem,
    cyclic_system,
    dyck_rep,
    heisenberg_lattice,
    real_triangle_rep,
    schottky_from_powers,
)
from chyperbolic.isometry import Isometry, apply, boost, heisenberg_element
from conftest import sphere_points


def _schottky(t):
    return schottky_from_powers([boost(1.0, 2, axis=1), boost(1.0, 2, axis=2)], t)


def test_cyclic_enumeration():
    idx = enumerate_ball(cyclic_system(boost(1.0, 2)), 10)
    assert len(idx) == 21 and idx.collisions == 0 and idx.merges == 0
    assert np.allclose(np.sort(idx.displacement), np.sort(np.abs(np.arange(-10, 11))), atol=1e-9)


def test_identity_system():
    idx = enumerate_ball(GeneratorSystem(("e",), (Isometry.identity(2),)), 5)
    assert len(idx) == 1


def test_heisenberg_dedup_matches_bruteforce(frozen):
    sys = heisenberg_lattice(1)
    for L, count in enumerate(frozen["heisenberg_ball"]):
        assert len(enumerate_ball(sys, L)) == count
    assert frozen["heisenberg_ball"][4] < 1 + sum(6 * 5 ** (j - 1) for j in range(1, 5))


def test_free_group_law(frozen):
    for rec in frozen["free_ball"]:
        if rec["rank"] != 2:
            continue
        idx = enumerate_ball(_schottky(3), rec["L"])
        assert len(idx) == rec["count"] and idx.collisions == 0


def test_determinism_across_threads():
    sys = _schottky(3)
    a = enumerate_ball(sys, 6, threads=1, chunk=64)
    b = enumerate_ball(sys, 6, threads=4, chunk=64)
    assert a.words == b.words
    assert np.array_equal(a.matrices, b.matrices)
    assert np.array_equal(a.displacement, b.displacement)


def test_budget_truncation():
    idx = enumerate_ball(_schottky(3), 8, max_elements=100)
    assert idx.truncated and len(idx) <= 100 + 4 * 3


def test_fingerprint_scale_invariance(rng):
    M = _schottky(3).evaluate("s1 s2 s1^-1")
    # keys are invariant under the U(1) ambiguity of PU(n,1) (inputs have |det| = 1)
    k = np.exp(1j * rng.uniform(0, 6))
    assert fingerprints(M[None], 0.0) == fingerprints((k * M)[None], 0.0)


def test_orbit_counts_examples():
    idx = enumerate_ball(cyclic_system(boost(1.0, 2)), 10)
    c = orbit_counts(idx, [0.5, 1.5, 2.5])
    assert list(c.counts) == [1, 3, 5]
    assert orbit_counts(idx, [1e-3]).counts[0] == 1
    assert orbit_counts(idx, [idx.displacement.max()]).counts[0] == len(idx)
    grid = np.linspace(0, 12, 40)
    assert np.all(np.diff(orbit_counts(idx, grid).counts) >= 0)


def test_limit_sample_cyclic():
    cloud = limit_sample(cyclic_system(boost(1.0, 2)), 12)
    d = np.minimum(np.linalg.norm(cloud.points - [1, 0], axis=1),
                   np.linalg.norm(cloud.points + [1, 0], axis=1))
    assert d.max() < 1e-3
    fp = limit_sample(cyclic_system(boost(1.0, 2)), 3, method="conjugate-fixed-points")
    assert np.allclose(np.abs(fp.points[:, 0]), 1)


def test_limit_sample_fuchsian_circles():
    cloud = limit_sample(dyck_rep(2, 3, 7, n=2, lift="block"), 14, cutoff=2.0)
    assert len(cloud) > 20 and np.max(np.abs(cloud.points[:, 1])) < 1e-6
    cloud = limit_sample(real_triangle_rep(2, 3, 7), 14, cutoff=2.0)
    assert len(cloud) > 20 and np.max(np.abs(cloud.points.imag)) < 1e-6
    with pytest.raises(GeometryError):
        limit_sample(heisenberg_lattice(1), 3, method="conjugate-fixed-points")


def test_limit_cloud_invariance():
    sys = _schottky(3)
    cloud = limit_sample(sys, 7, cutoff=8.0)
    P = cloud.points
    for g in sys.generators:
        Q = apply(g, P)
        Q = Q / np.linalg.norm(Q, axis=1, keepdims=True)
        # one-sided: images of deep endpoints stay near the cloud
        near = [np.min(boundary_gauge(P, q)) for q in Q[::7]]
        assert max(near) < 0.05


def test_thin_part():
    idx = enumerate_ball(cyclic_system(boost(1.0, 2)), 10)
    only = thin_part_elements(idx, np.zeros(2), 0.5)
    assert len(only) == 1 and only[0].word.letters == ()
    els = thin_part_elements(idx, np.array([0.3, 0]), 2.5)
    assert sorted(e.word.letters for e in els) == sorted([(), (1,), (-1,), (1, 1), (-1, -1)])
    hidx = enumerate_ball(heisenberg_lattice(1), 4)
    counts = [len(thin_part_elements(hidx, np.array([0, r]), 1.0)) for r in (0.0, 0.6, 0.9, 0.99)]
    assert counts == sorted(counts) and counts[-1] > counts[0]
    with pytest.raises(GeometryError):
        thin_part_elements(idx, np.zeros(2), 0.0)


def test_conical(rng):
    idx = enumerate_ball(cyclic_system(boost(1.0, 2)), 20)
    assert conical_test(np.array([1, 0]), idx, 0.1)
    hidx = enumerate_ball(heisenberg_lattice(1), 4)
    assert not conical_test(np.array([0, 1]), hidx, 0.1)
    xi = sphere_points(rng, 1, 2)[0]
    assert not conical_test(xi, idx, 0.5)


def test_spill_roundtrip(tmp_path):
    sys = heisenberg_lattice(1)
    idx = enumerate_ball(sys, 3)
    save_index(idx, tmp_path / "h.bin")
    back = load_index(tmp_path / "h.bin", sys)
    assert back.words == idx.words and np.array_equal(back.matrices, idx.matrices)
    assert np.allclose(back.displacement, idx.displacement)
    raw = bytearray((tmp_path / "h.bin").read_bytes())
    raw[-20] ^= 0xFF
    (tmp_path / "bad.bin").write_bytes(bytes(raw))
    with pytest.raises(GeometryError):
        load_index(tmp_path / "bad.bin", sys)
    with pytest.raises(GeometryError):
        load_index(tmp_path / "h.bin", _schottky(2))


def test_parabolic_displacement_decay():
    g = heisenberg_element([1.0], [0.0], 0.0)
    idx = enumerate_ball(GeneratorSystem(("x",), (g,)), 1)
    assert len(idx) == 3
