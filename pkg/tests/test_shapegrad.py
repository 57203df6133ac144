import math

import numpy as np
import pytest

from drumflux.eigensolve import objective
from drumflux.geometry.curve import build_star
from drumflux.geometry.fields import general_field, normal_field
from drumflux.geometry.polygon import (PolarPolygon, build_rounded_polygon, rebuild_with_vertices,
                                       vertex_velocity_field)
from drumflux.shapegrad import (ShapeContext, assemble_dk_sprime, delta_F, delta_k, delta_N, delta_sigma,
                                delta_sprime, fd_audit, hadamard_rate, inner, radial_gradient)

from conftest import SQUARE


def _trig(curve, m, phase=0.0):
    t = np.angle(curve.x)
    return normal_field(curve, np.cos(m * t + phase), -m * np.sin(m * t + phase))


@pytest.fixture(scope="module")
def circle_ctx(circle_eig):
    return ShapeContext(circle_eig)


@pytest.fixture(scope="module")
def square_ctx(square_eig):
    return ShapeContext(square_eig)


def test_circle_audit_second_order(circle, circle_eig, circle_ctx):
    m = 2
    sd = circle_ctx.derivative(_trig(circle, m), normal=True)
    rows = fd_audit(circle_eig, sd, lambda e: build_star(1.0, {m: e}, 32), [2e-3, 1e-3])
    for name in ("dk", "dN", "dF"):
        e0, e1 = getattr(rows[0], name), getattr(rows[1], name)
        assert e1 < 1e-5, name
    # dk vanishes at first order on the disk for m != 0; the nonzero dsigma
    # and the F derivative converge at second order
    assert 3.0 < rows[0].dsigma / rows[1].dsigma < 5.0


def test_normal_and_general_routes_agree(circle, circle_ctx):
    V = _trig(circle, 3, 0.4)
    a = circle_ctx.derivative(V, normal=True)
    b = circle_ctx.derivative(V, normal=False)
    assert a.dk == pytest.approx(b.dk, abs=1e-10)
    assert a.dN == pytest.approx(b.dN, abs=1e-9)
    assert a.dF == pytest.approx(b.dF, abs=1e-9)
    assert np.max(np.abs(a.dsigma - b.dsigma)) < 1e-8


def test_matrix_level_interface_matches_context(square, square_eig, square_ctx):
    V = vertex_velocity_field(square, 2, "x")
    sd = square_ctx.derivative(V)
    dS = delta_sprime(square_eig, V)
    dkS = assemble_dk_sprime(square, square_eig.k1)
    dk = delta_k(square_eig, dS, dkS)
    ds = delta_sigma(square_eig, dS, dkS, dk)
    dN = delta_N(square_eig, ds, dk, V)
    dF = delta_F(square_eig, ds, dk, dN)
    assert dk == pytest.approx(sd.dk, rel=1e-10)
    assert dF == pytest.approx(sd.dF, rel=1e-8)


def test_derivatives_are_linear_in_the_field(square, square_ctx):
    V1 = vertex_velocity_field(square, 2, "x")
    V2 = vertex_velocity_field(square, 3, "y")
    a, b = square_ctx.derivative(V1), square_ctx.derivative(V2)
    c = square_ctx.derivative(V1.scaled(2.0) + V2.scaled(-0.5))
    assert c.dk == pytest.approx(2 * a.dk - 0.5 * b.dk, rel=1e-10)
    assert c.dF == pytest.approx(2 * a.dF - 0.5 * b.dF, rel=1e-9)


def test_tangential_field_changes_nothing(square, square_ctx):
    # a field tangent to the curve only reparametrizes it: dk = 0
    from drumflux.geometry.fields import panel_derivative, tangential_field

    beta = np.sin(np.angle(square.x - 1j)) ** 2
    V = tangential_field(square, beta, panel_derivative(square, beta))
    assert abs(square_ctx.derivative(V).dk) < 1e-7


@pytest.mark.parametrize("vertex,direction", [(2, "x"), (3, "radial")])
def test_hadamard_identity(square, square_eig, square_ctx, vertex, direction):
    V = vertex_velocity_field(square, vertex, direction)
    sd = square_ctx.derivative(V)
    assert 2 * square_eig.k1 * sd.dk == pytest.approx(hadamard_rate(square_eig, V), abs=1e-6)


def test_hadamard_identity_on_star():
    """Non-normal field V = (0.2 + cos t) e^{it} on a star curve r(t) e^{it}."""
    c = build_star(1.0, {3: 0.1}, 32)
    eig = objective(c)
    t = np.angle(c.x)
    V = (0.2 + np.cos(t)) * np.exp(1j * t)
    dV_dt = (-np.sin(t) + 1j * (0.2 + np.cos(t))) * np.exp(1j * t)
    rr, dr = 1.0 + 0.1 * np.cos(3 * t), -0.3 * np.sin(3 * t)
    speed_t = np.abs(dr + 1j * rr)
    # general_field wants the derivative along the panel parameter
    field = general_field(c, V, dV_dt / speed_t * c.speed)
    sd = ShapeContext(eig).derivative(field)
    assert 2 * eig.k1 * sd.dk == pytest.approx(hadamard_rate(eig, field), abs=1e-6)


def test_gauge_condition(square, square_eig, square_ctx):
    V = vertex_velocity_field(square, 3, "x")
    sd = square_ctx.derivative(V)
    assert abs(inner(square, square_eig.sigma_c, sd.dsigma)) < 1e-10 * np.max(np.abs(sd.dsigma))


def test_square_vertex_audit(square, square_eig, square_ctx):
    V = vertex_velocity_field(square, 2, "y")
    sd = square_ctx.derivative(V)

    def build(e):
        v = SQUARE.copy()
        v[1, 1] += e
        return rebuild_with_vertices(square, v)

    rows = fd_audit(square_eig, sd, build, [1e-3, 5e-4])
    for name in ("dk", "dsigma", "dN", "dF"):
        assert getattr(rows[1], name) < 1e-5, name


def test_radial_gradient_semidisk_is_symmetric_and_small(semidisk16, semidisk16_eig):
    g = radial_gradient(semidisk16, semidisk16_eig)
    assert np.max(np.abs(g.grad - g.grad[::-1])) < 1e-10
    # the all-ones polar polygon is a rounded semidisk, close to stationary
    assert g.norm < 1e-5


def test_radial_gradient_matches_finite_differences():
    params = PolarPolygon(np.linspace(1.0, 1.5, 8))
    c = build_rounded_polygon(params)
    eig = objective(c)
    g = radial_gradient(c, eig)
    e = 1e-4
    for i in (0, 3, 7):
        r = params.radii.copy()
        r[i] += e
        fp = objective(rebuild_with_vertices(c, params.vertices(r)), k_guess=eig.k1).F
        r[i] -= 2 * e
        fm = objective(rebuild_with_vertices(c, params.vertices(r)), k_guess=eig.k1).F
        assert (fp - fm) / (2 * e) == pytest.approx(g.grad[i], abs=1e-7)
