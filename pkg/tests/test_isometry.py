import numpy as np
import pytest

from chyperbolic.form import BallPoint, BoundaryPoint, GeometryError, ProjectivePoint
from chyperbolic.geometry import distance
from chyperbolic.isometry import (
    Isometry,
    IsometryType,
    apply,
    boost,
    classify,
    complex_reflection,
    displacement_inf,
    embed_subgroup,
    finv,
    heisenberg_element,
    is_q_unitary,
    projective_identity_residual,
    quasiconstant_limit,
    su21_basis,
    unitary,
    weil_dimension,
    zeta,
)
from conftest import ball_points, cmat, random_conjugator, random_element


def test_is_q_unitary_examples():
    assert is_q_unitary(np.eye(3)) == (True, 0.0)
    assert is_q_unitary(np.diag([np.exp(0.3j), 1, 1]))[0]
    assert not is_q_unitary(np.diag([2, 1, 1]))[0]
    with pytest.raises(GeometryError):
        Isometry(np.diag([2, 1, 1]))


def test_apply_examples(rng):
    p = ProjectivePoint(np.array([1, 0.2j, 0.1]))
    assert apply(Isometry.identity(2), p) == p
    s = 0.8
    assert np.allclose(apply(boost(s, 2), BallPoint([0, 0])).z, [np.tanh(s), 0])
    for _ in range(20):
        M, _ = random_element(rng, 2)
        x, y = ball_points(rng, 2, 2, 0.9)
        assert abs(distance(apply(M, x), apply(M, y)) - distance(x, y)) < 1e-10
        assert apply(M, p).kind is p.kind


def test_classify_examples():
    c = classify(np.diag([np.exp(1j * np.pi / 3), 1, 1]))
    assert c.label is IsometryType.ELLIPTIC
    assert np.allclose(c.fixed_point.lift[1:], 0)
    c = classify(boost(0.9, 2))
    assert c.label is IsometryType.HYPERBOLIC
    assert c.translation_length == pytest.approx(0.9, abs=1e-12)
    ends = sorted(tuple(np.round(p.xi.real, 12)) for p in c.boundary_fixed_points)
    assert ends == [(-1.0, 0.0), (1.0, 0.0)]
    assert classify(heisenberg_element([1.0], [0.0], 0.0)).label is IsometryType.PARABOLIC
    assert classify(Isometry.identity(2)).label is IsometryType.ELLIPTIC


def test_translation_length_frozen(frozen):
    for rec in frozen["translation_length"]:
        c = classify(cmat(rec["matrix"]))
        assert c.label is IsometryType.HYPERBOLIC
        assert c.translation_length == pytest.approx(rec["length"], abs=1e-10)


def test_conjugation_invariance(rng):
    for kind in ("hyperbolic", "elliptic", "parabolic", "product"):
        for _ in range(5):
            M, _ = random_element(rng, 2, kind)
            C = random_conjugator(rng, 2)
            N = C @ M @ finv(C)
            a, b = classify(M), classify(N)
            assert a.label is b.label
            assert abs(a.translation_length - b.translation_length) < 1e-8
            assert zeta(M) == zeta(N)


def test_hyperbolic_fixed_points_are_fixed(rng):
    for _ in range(20):
        M, _ = random_element(rng, 2, "hyperbolic")
        for p in classify(M).boundary_fixed_points:
            assert np.linalg.norm(apply(M, p).xi - p.xi) < 1e-9


def test_displacement_examples():
    assert displacement_inf(Isometry.identity(2)).value == 0
    r = displacement_inf(boost(0.7, 2))
    assert r.value == pytest.approx(0.7, abs=1e-4) and r.attained
    r = displacement_inf(heisenberg_element([1.0], [0.0], 0.0))
    assert r.value <= 1e-2 and not r.attained
    r = displacement_inf(np.diag([np.exp(0.4j), 1, 1]))
    assert r.value < 1e-6 and r.attained


def test_complex_reflection_examples(rng):
    R = complex_reflection(np.array([0, 0, 1.0]), 2)
    assert np.allclose(R.matrix, np.diag([1, 1, -1]))
    w = np.array([0.3, 1 + 0.5j, -0.4j])
    R = complex_reflection(w, 5)
    J = np.diag([-1, 1, 1])
    # fixes w-perp pointwise
    for _ in range(5):
        v = rng.normal(size=3) + 1j * rng.normal(size=3)
        v -= (np.conj(w) @ J @ v) / (np.conj(w) @ J @ w) * w
        assert np.allclose(R.matrix @ v, v, atol=1e-12)
    assert projective_identity_residual((R**5).matrix) < 1e-10
    with pytest.raises(GeometryError):
        complex_reflection(np.array([1.0, 0.1, 0]), 2)


def test_embed_subgroup_examples():
    assert np.allclose(embed_subgroup("su11-complex-line", np.eye(2), 3).matrix, np.eye(4))
    s = 0.5
    A = np.array([[np.cosh(s), np.sinh(s), 0], [np.sinh(s), np.cosh(s), 0], [0, 0, 1]])
    assert classify(embed_subgroup("so21-real-plane", A)).translation_length == pytest.approx(s)
    with pytest.raises(GeometryError):
        embed_subgroup("su11-complex-line", np.diag([2, 1]))
    g = embed_subgroup("heisenberg-parabolic", ([1.0], [2.0], 3.0))
    h = embed_subgroup("heisenberg-parabolic", ([-0.5], [1.0], 0.25))
    prod = embed_subgroup("heisenberg-parabolic", ([0.5], [3.0], 3.0 + 0.25 + 1.0 * 1.0))
    assert np.allclose(g.matrix @ h.matrix, prod.matrix, atol=1e-13)
    x = heisenberg_element([1.0], [0.0], 0.0)
    y = heisenberg_element([0.0], [1.0], 0.0)
    t = heisenberg_element([0.0], [0.0], 1.0)
    comm = x.matrix @ y.matrix @ x.inverse.matrix @ y.inverse.matrix
    assert np.array_equal(comm, t.matrix)
    # fixes the boundary point e_n
    assert np.allclose(apply(g, BoundaryPoint([0, 1])).xi, [0, 1])


def test_zeta_examples(rng):
    assert zeta(np.eye(3)) == 0
    assert zeta(complex_reflection(np.array([0, 0, 1.0]), 2)) == 4
    reg = boost(0.8, 2).matrix @ np.diag([np.exp(0.3j), np.exp(0.3j), np.exp(1.1j)])
    assert zeta(reg) == 6
    with pytest.raises(GeometryError):
        zeta(np.eye(2))
    assert su21_basis().shape == (8, 3, 3)
    for _ in range(10):
        M, _ = random_element(rng, 2)
        assert zeta(M) >= 2


def test_weil_dimension_examples():
    inv = complex_reflection(np.array([0, 0, 1.0]), 2).matrix
    h = boost(0.8, 2).matrix @ np.diag([np.exp(0.3j), np.exp(0.3j), np.exp(1.1j)])
    c = np.linalg.inv(inv @ h)
    assert zeta(h) == 6 and zeta(c) == 6
    assert weil_dimension(inv, h, c) == 0
    h2 = boost(0.5, 2, axis=2).matrix @ np.diag([np.exp(0.2j), np.exp(-0.7j), np.exp(0.2j)])
    c2 = np.linalg.inv(h @ h2)
    assert weil_dimension(h, h2, c2) == 6 * 3 - 16
    with pytest.raises(GeometryError):
        weil_dimension(h, h2, h)


def test_quasiconstant_limit(rng):
    q = quasiconstant_limit(boost(1.0, 2) ** 12)
    assert np.allclose(q.attracting.xi, [1, 0], atol=1e-9)
    assert np.allclose(q.repelling.xi, [-1, 0], atol=1e-9)
    M, _ = random_element(rng, 2, "hyperbolic")
    g = Isometry(M) ** 20
    a, b = quasiconstant_limit(g), quasiconstant_limit(g.inverse)
    assert np.allclose(a.attracting.xi, b.repelling.xi) and np.allclose(a.repelling.xi, b.attracting.xi)
    X = ball_points(rng, 200, 2, 0.5)
    spreads = [np.std(apply(Isometry(M) ** k, X), axis=0).sum() for k in (2, 5, 10)]
    assert spreads[0] > spreads[1] > spreads[2]
    with pytest.raises(GeometryError):
        quasiconstant_limit(boost(0.1, 2))


def test_unitary_and_power_helpers(rng):
    U = unitary(np.diag([1j, -1]))
    assert classify(U).label is IsometryType.ELLIPTIC
    g = boost(0.3, 2)
    assert g.inverse.projective_equal(g**-1)
    assert (g @ g.inverse).projective_equal(Isometry.identity(2))
