import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FROZEN = json.loads((Path(__file__).parent / "data" / "frozen.json").read_text())


def cvec(pairs):
    return np.array([complex(a, b) for a, b in pairs])


def cmat(rows):
    return np.array([[complex(a, b) for a, b in row] for row in rows])


def ball_points(rng, k, n, rmax=0.95):
    z = rng.normal(size=(k, n)) + 1j * rng.normal(size=(k, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z * (rmax * rng.uniform(size=(k, 1)) ** (1.0 / (2 * n)))


def sphere_points(rng, k, n):
    z = rng.normal(size=(k, n)) + 1j * rng.normal(size=(k, n))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def frozen():
    return FROZEN


def random_unitary(rng, n):
    Z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_conjugator(rng, n, rmax=0.7):
    from chyperbolic.isometry import transvection

    U = np.eye(n + 1, dtype=complex)
    U[1:, 1:] = random_unitary(rng, n)
    return transvection(ball_points(rng, 1, n, rmax)[0]) @ U


def random_element(rng, n=2, kind=None):
    """Random element of U(n,1) of a requested type (or a random product).

    kinds: hyperbolic, elliptic, parabolic, ellipto-parabolic, product.
    """
    from chyperbolic.isometry import boost, complex_reflection, heisenberg_element, transvection

    kind = kind or rng.choice(["hyperbolic", "elliptic", "parabolic", "ellipto-parabolic", "product"])
    if kind == "product":
        M = np.eye(n + 1, dtype=complex)
        for _ in range(rng.integers(1, 4)):
            c = rng.integers(3)
            if c == 0:
                M = M @ boost(rng.uniform(0.1, 2.0), n, int(rng.integers(1, n + 1))).matrix
            elif c == 1:
                U = np.eye(n + 1, dtype=complex)
                U[1:, 1:] = random_unitary(rng, n)
                M = M @ U
            else:
                w = np.concatenate([[rng.uniform(-0.5, 0.5)], rng.normal(size=n) + 1j * rng.normal(size=n)])
                M = M @ complex_reflection(w, int(rng.integers(2, 7))).matrix
        return M, kind
    if kind == "hyperbolic":
        core = boost(rng.uniform(0.2, 2.5), n).matrix
        # phases equal on the boost plane commute with the boost (loxodromic rotation)
        ph = rng.uniform(-np.pi, np.pi, n + 1)
        ph[1] = ph[0]
        core = core @ np.diag(np.exp(1j * ph))
    elif kind == "elliptic":
        core = np.eye(n + 1, dtype=complex)
        core[1:, 1:] = random_unitary(rng, n)
    else:
        a = rng.normal(size=n - 1) if n > 1 else np.zeros(0)
        b = rng.normal(size=n - 1) if n > 1 else np.zeros(0)
        if n == 1:
            core = heisenberg_element([], [], rng.uniform(0.3, 2.0)).matrix
        else:
            core = heisenberg_element(a, b, rng.normal()).matrix
        if kind == "ellipto-parabolic" and n > 1:
            core = heisenberg_element(np.zeros(n - 1), np.zeros(n - 1), rng.uniform(0.3, 2.0)).matrix
            R = np.eye(n + 1, dtype=complex)
            R[1:n, 1:n] = random_unitary(rng, n - 1)
            core = core @ R
    C = random_conjugator(rng, n)
    from chyperbolic.isometry import finv

    return C @ core @ finv(C), kind
