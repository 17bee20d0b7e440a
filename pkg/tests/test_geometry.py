import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chyperbolic.form import BallPoint, BoundaryPoint, GeometryError, chart_lift, form_inner
from chyperbolic.geometry import (
    DELTA0,
    BusemannSpec,
    Geodesic,
    bergman_kernel,
    boundary_gauge,
    busemann,
    busemann_limit,
    distance,
    embed_totally_geodesic,
    geodesic_point,
    kahler_potential,
    metric_inner,
    slimness,
    support_hyperplane,
)
from conftest import ball_points, cvec, sphere_points

coord = st.floats(-1, 1, allow_nan=False)


@st.composite
def ball2(draw, rmax=0.97):
    v = np.array([draw(coord) for _ in range(4)])
    z = np.array([v[0] + 1j * v[1], v[2] + 1j * v[3]])
    r = np.linalg.norm(z)
    return z if r < rmax else z * (rmax * draw(st.floats(0, 1)) / r)


def test_distance_examples():
    assert distance(np.zeros(2), np.zeros(2)) == 0
    assert distance(np.zeros(2), [0.5, 0]) == pytest.approx(np.arccosh(2 / np.sqrt(3)), abs=1e-12)
    assert distance([0.3, 0], [0.7, 0]) == pytest.approx(np.arctanh(0.7) - np.arctanh(0.3), abs=1e-12)
    with pytest.raises(GeometryError):
        distance(np.zeros(2), [1.0, 0])


def test_distance_against_frozen_oracle(frozen):
    for rec in frozen["distance"]:
        d = distance(cvec(rec["z"]), cvec(rec["w"]))
        assert d == pytest.approx(rec["d"], rel=1e-10, abs=1e-12)


def test_metric_examples():
    assert metric_inner(np.zeros(2), [1, 0], [1, 0]) == pytest.approx(1)
    r = 0.6
    assert metric_inner([r, 0], [1, 0], [1, 0]) == pytest.approx(1 / (1 - r * r) ** 2)
    assert metric_inner([r, 0], [0, 1], [0, 1]) == pytest.approx(1 / (1 - r * r))
    with pytest.raises(GeometryError):
        metric_inner([1, 0], [1, 0], [1, 0])


def test_kahler_and_bergman():
    assert kahler_potential(np.zeros(2)) == 0
    assert kahler_potential([0.5, 0]) == pytest.approx(np.log(0.75))
    vals = [kahler_potential([r, 0]) for r in np.linspace(0, 0.999, 50)]
    assert np.all(np.diff(vals) < 0)
    assert bergman_kernel([0], [0]) == pytest.approx(1 / (2 * np.pi))
    assert bergman_kernel([0, 0], [0, 0]) == pytest.approx(1 / np.pi**2)
    rng = np.random.default_rng(1)
    Z, W = ball_points(rng, 20, 2), ball_points(rng, 20, 2)
    for z, w in zip(Z, W):
        assert bergman_kernel(z, w) == pytest.approx(np.conj(bergman_kernel(w, z)))


def test_geodesic_point_examples(rng):
    x, y = ball_points(rng, 2, 2)
    assert np.allclose(geodesic_point(x, y, 0.0).z, x)
    p = geodesic_point(np.zeros(2), [0.8, 0], np.arctanh(0.4))
    assert np.allclose(p.z, [0.4, 0], atol=1e-14)
    end = geodesic_point(x, y, distance(x, y))
    assert np.allclose(end.z, y, atol=1e-9)


@given(ball2(), ball2(), st.floats(-3, 3), st.floats(-3, 3))
def test_geodesic_unit_speed(x, y, s, t):
    if distance(x, y) < 1e-6:
        return
    a, b = geodesic_point(x, y, s), geodesic_point(x, y, t)
    assert abs(distance(a, b) - abs(s - t)) < 1e-8


def test_geodesic_between_boundary_points(rng):
    xi, eta = sphere_points(rng, 2, 2)
    g = Geodesic(xi, eta)
    t = np.linspace(-4, 4, 9)
    P = g.point(t)
    assert np.all(np.linalg.norm(P, axis=1) < 1)
    assert np.allclose(distance(P[:-1], P[1:]), 1.0, atol=1e-8)
    assert np.allclose(g.point(15.0).z, xi, atol=1e-9)
    with pytest.raises(GeometryError):
        Geodesic(xi, xi)


@given(ball2(), ball2(), ball2())
def test_triangle_inequality(x, y, z):
    assert distance(x, z) <= distance(x, y) + distance(y, z) + 1e-9
    assert distance(x, y) == pytest.approx(distance(y, x), abs=1e-12)


def test_busemann_examples():
    spec = BusemannSpec.at([1, 0])
    assert busemann(spec, np.zeros(2)) == pytest.approx(0, abs=1e-15)
    for r in (0.1, 0.5, 0.9):
        assert busemann(spec, [r, 0]) == pytest.approx(-np.arctanh(r), abs=1e-12)
    with pytest.raises(GeometryError):
        busemann(BusemannSpec(BoundaryPoint([1, 0]), BallPoint([0, 0])), [1.0, 0])


def test_busemann_against_frozen_limit(frozen):
    for rec in frozen["busemann_origin"]:
        spec = BusemannSpec.at(cvec(rec["xi"]))
        assert busemann(spec, cvec(rec["z"])) == pytest.approx(rec["b"], abs=1e-10)


def test_busemann_limit_agrees_off_origin(rng):
    for _ in range(10):
        xi = sphere_points(rng, 1, 2)[0]
        o, x = ball_points(rng, 2, 2, 0.8)
        spec = BusemannSpec.at(xi, o)
        assert busemann(spec, o) == pytest.approx(0, abs=1e-12)
        assert abs(busemann(spec, x) - busemann_limit(spec, x)) < 1e-6


@given(ball2(), ball2())
def test_busemann_lipschitz(x, y):
    spec = BusemannSpec.at(np.array([0.6, 0.8j]))
    assert abs(busemann(spec, x) - busemann(spec, y)) <= distance(x, y) + 1e-8


def test_horoball_star_shape(rng):
    xi = sphere_points(rng, 1, 2)[0]
    spec = BusemannSpec.at(xi)
    for x in ball_points(rng, 5, 2, 0.9):
        g = Geodesic(xi, -xi if abs(np.vdot(xi, x)) < 0.5 else sphere_points(rng, 1, 2)[0])
        vals = busemann(spec, g.point(np.linspace(-3, 3, 30)))
        assert np.all(np.diff(vals) < 0)


def test_support_hyperplane(rng):
    H = support_hyperplane([1, 0])
    c, c0 = H.affine_equation()
    assert np.allclose(c / c0, [1, 0])  # locus z1 = 1
    for xi in sphere_points(rng, 5, 2):
        h = support_hyperplane(xi)
        assert abs(form_inner(chart_lift(xi), h.polar.lift)) < 1e-12
        X = chart_lift(ball_points(rng, 1000, 2, 0.999))
        assert np.min(np.abs(form_inner(X, h.polar.lift))) > 0
    with pytest.raises(GeometryError):
        support_hyperplane([0.5, 0])


def test_boundary_gauge_examples(rng):
    e1, e2 = np.array([1, 0]), np.array([0, 1])
    assert boundary_gauge(e1, e1) == 0
    assert boundary_gauge(e1, -e1) == pytest.approx(np.sqrt(2))
    assert boundary_gauge(e1, e2) == pytest.approx(1)
    A, B = sphere_points(rng, 500, 2), sphere_points(rng, 500, 2)
    ch, ko = boundary_gauge(A, B, "chordal"), boundary_gauge(A, B, "koranyi")
    assert np.allclose(boundary_gauge(B, A), ko)
    # sanity envelope: chordal^2 / 2 <= koranyi^2 <= chordal
    assert np.all(ch**2 / 2 <= ko**2 + 1e-12) and np.all(ko**2 <= ch + 1e-12)


def test_totally_geodesic_embeddings(rng):
    cl = embed_totally_geodesic("complex-line", 3)
    assert np.allclose(cl(0.0), 0)
    for r in (0.2, 0.7):
        assert distance(np.zeros(3), cl(r)) == pytest.approx(np.arctanh(r))
    rp = embed_totally_geodesic("real-plane", 2)
    a, b = rng.uniform(-0.6, 0.6, size=(2, 2))
    assert distance(rp(a), rp(b)) == pytest.approx(rp.model_distance(a, b))
    ck = embed_totally_geodesic("complex-k-subspace", 3, 2)
    u, v = ball_points(rng, 2, 2)
    assert distance(ck(u), ck(v)) == pytest.approx(distance(u, v))
    with pytest.raises(GeometryError):
        embed_totally_geodesic("complex-k-subspace", 2, 3)


def test_slimness_small_cases(rng):
    x, y = ball_points(rng, 2, 2, 0.8)
    mid = geodesic_point(x, y, 0.4 * distance(x, y))
    assert slimness(x, y, mid) <= 1e-2
    c = np.array([0.1, 0.2j])
    tiny = [c, c + [1e-3, 0], c + [0, 1e-3]]
    assert slimness(*tiny) <= 1e-3
    assert DELTA0 == pytest.approx(np.arccosh(np.sqrt(2)))
