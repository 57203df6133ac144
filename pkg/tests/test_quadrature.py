import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drumflux.layerpot import quadrature as q

P = 16


def _basis(b):
    x, _ = q.gauss_legendre(P)
    lam = q.barycentric_weights(P)

    def f(u):
        # Lagrange polynomial l_b in mpmath precision
        num = mp.mpf(1)
        for j in range(P):
            if j != b:
                num *= (u - x[j]) / (x[b] - x[j])
        return num

    return f


def test_gauss_legendre_integrates_polynomials():
    x, w = q.gauss_legendre(P)
    for deg in range(2 * P):
        exact = (1 - (-1) ** (deg + 1)) / (deg + 1)
        assert np.sum(w * x**deg) == pytest.approx(exact, abs=1e-14)


@given(st.lists(st.floats(-3, 3), min_size=P, max_size=P), st.floats(-1, 1))
@settings(max_examples=40, deadline=None)
def test_lagrange_basis_reproduces_interpolant(coeffs, t):
    x, _ = q.gauss_legendre(P)
    poly = np.polynomial.Polynomial(coeffs[:8])
    vals = poly(x)
    B = q.lagrange_basis(P, [t])
    assert B.shape == (1, P)
    assert B[0] @ vals == pytest.approx(poly(t), abs=1e-10 * (1 + np.abs(coeffs).sum()))


def test_legendre_transform_roundtrip():
    x, _ = q.gauss_legendre(P)
    f = np.exp(x) * np.cos(3 * x)
    c = q.legendre_transform(P) @ f
    assert np.allclose(np.polynomial.legendre.legval(x, c), f, atol=1e-13)


def test_self_log_table_against_mpmath():
    W = q.self_log_table(P)
    x, _ = q.gauss_legendre(P)
    mp.mp.dps = 30
    for a, b in [(0, 0), (3, 7), (8, 8), (15, 2)]:
        f = _basis(b)
        ref = mp.quad(lambda u: f(u) * mp.log(abs(x[a] - u)), [-1, x[a], 1])
        assert W[a, b] == pytest.approx(float(ref), abs=1e-12)


@pytest.mark.parametrize("z0", [0.3 + 0.05j, -0.9 + 0.02j, 1.05 + 0.1j, 0.0 + 0.5j])
def test_near_weights_against_mpmath(z0):
    WL, WC, WH = q.near_weights(np.array([z0]), P)
    mp.mp.dps = 30
    for b in [0, 5, 15]:
        f = _basis(b)
        zz = mp.mpc(z0.real, z0.imag)
        rl = mp.quad(lambda u: f(u) * mp.log(abs(zz - u)), [-1, z0.real if -1 < z0.real < 1 else 0, 1])
        rc = mp.quad(lambda u: f(u) / (zz - u), [-1, z0.real if -1 < z0.real < 1 else 0, 1])
        rh = mp.quad(lambda u: f(u) / (zz - u) ** 2, [-1, z0.real if -1 < z0.real < 1 else 0, 1])
        scale = max(1.0, abs(complex(rh)))
        assert WL[0, b] == pytest.approx(float(rl), abs=1e-11)
        assert abs(WC[0, b] - complex(rc)) < 1e-10 * max(1.0, abs(complex(rc)))
        assert abs(WH[0, b] - complex(rh)) < 1e-9 * scale


def test_leave_one_out_table_interpolates():
    E = q.leave_one_out_table(P)
    x, _ = q.gauss_legendre(P)
    f = np.sin(x)
    # value at each node predicted from the other nodes
    pred = np.einsum("ab,b->a", E, f)
    assert np.allclose(pred, f, atol=1e-9)
    assert np.allclose(np.diag(E), 0.0)


def test_endpoint_basis():
    B = q.endpoint_basis(P)
    x, _ = q.gauss_legendre(P)
    assert B.shape == (2, P)
    assert B[0] @ x**3 == pytest.approx(-1.0, abs=1e-12)
    assert B[1] @ np.exp(x) == pytest.approx(math.e, abs=1e-12)


def test_bernstein_radius():
    assert q.bernstein_radius(0.0 + 0.0j) == pytest.approx(1.0)
    rho = 2.0
    z = 0.5 * (rho * np.exp(0.7j) + np.exp(-0.7j) / rho)
    assert q.bernstein_radius(z) == pytest.approx(rho, rel=1e-12)


def test_preimage_recovers_parameter():
    x, _ = q.gauss_legendre(P)
    u = x
    curve = (u + 0.3 * u**2) + 1j * (0.2 * u**3)  # a bent panel
    coefs = (q.legendre_transform(P) @ curve)[None, :]
    z_true = np.array([0.2 + 0.1j, -0.7 + 0.05j])
    targets = np.polynomial.legendre.legval(z_true, coefs[0])
    z, ok = q.preimages(targets, np.zeros(2, dtype=np.int64), coefs)
    assert ok.all()
    assert np.allclose(z, z_true, atol=1e-12)
    z, ok = q.preimages(np.zeros(0, complex), np.zeros(0, np.int64), coefs)
    assert z.size == 0


def test_differentiation_matrix():
    D = q.differentiation_matrix(P)
    x, _ = q.gauss_legendre(P)
    assert np.allclose(D @ np.sin(2 * x), 2 * np.cos(2 * x), atol=1e-10)
