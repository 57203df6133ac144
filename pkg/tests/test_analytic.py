import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drumflux import analytic as an

from conftest import CSTAR


def test_semidisk_constant():
    # value quoted for the semidisk, and an independent mpmath evaluation
    assert an.semidisk_cstar() == pytest.approx(CSTAR, rel=1e-14)
    j11 = mp.besseljzero(1, 1)
    ref = 1 / (mp.sqrt(mp.pi) * j11 * abs(mp.besselj(0, j11)))
    assert an.semidisk_cstar() == pytest.approx(float(ref), rel=1e-14)


def test_disk_objective():
    j01 = mp.besseljzero(0, 1)
    assert an.disk_objective() == pytest.approx(float(1 / (mp.sqrt(mp.pi) * j01)), rel=1e-14)


def test_rectangle_objective_value():
    assert an.rectangle_objective(math.sqrt(3)) == pytest.approx(0.362794816, abs=1e-8)
    assert an.rectangle_objective(1 / math.sqrt(3)) == an.rectangle_objective(math.sqrt(3))
    with pytest.raises(an.AnalyticError):
        an.rectangle_objective(0.0)


@given(st.floats(0.05, 20.0), st.floats(0.1, 10.0))
@settings(max_examples=100, deadline=None)
def test_rectangle_objective_scale_invariant(alpha, scale):
    # F depends on the aspect ratio only
    a, b = alpha * scale, scale
    assert an.rectangle_objective_sides(a, b) == pytest.approx(an.rectangle_objective(alpha), rel=1e-12)


def test_rectangle_maximized_below_semidisk():
    al = np.linspace(1.0, 4.0, 3001)
    vals = [an.rectangle_objective(a) for a in al]
    best = al[int(np.argmax(vals))]
    # d/d alpha of alpha^{3/2}/(alpha^2+1) vanishes at alpha = sqrt 3
    assert best == pytest.approx(math.sqrt(3), abs=2e-3)
    assert max(vals) < CSTAR


def test_sector_exponent():
    assert an.sector_flux_exponent(math.pi) == 0.0
    assert an.sector_flux_exponent(math.pi / 2) == pytest.approx(1.0)
    assert an.sector_flux_exponent(1.5 * math.pi) < 0
    with pytest.raises(an.AnalyticError):
        an.sector_flux_exponent(2 * math.pi)


def test_oracles():
    d = an.oracle("disk")
    assert d.lambda1 == pytest.approx(2.404825557695773**2)
    s = an.oracle("semidisk")
    assert s.G == pytest.approx(CSTAR)
    r = an.oracle("rectangle")
    assert r.lambda1 == pytest.approx(math.pi**2 * (1 / 3 + 1))
    for o in (d, s, r):
        assert o.G <= an.THEOREM1_BOUND
    with pytest.raises(an.AnalyticError):
        an.oracle("hexagon")


def test_hadamard_rate_for_sine_field():
    # -(4 k^2/pi) int sin^3 = -(16/(3 pi)) k^2
    k = 3.8317059702075125
    V = an.trig_field([1.0])
    assert an.semidisk_hadamard_rate(V) == pytest.approx(-16 * k * k / (3 * math.pi), rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_criticality_for_random_fields(seed):
    p = an.semidisk_solve_perturbation(an.random_arc_field(seed))
    assert abs(an.criticality_residual(p)) < 1e-10
    assert p.solvability < 1e-10


def test_criticality_needs_c1_zero():
    p = an.semidisk_solve_perturbation(an.trig_field([1.0, 0.3], [0.2]))
    assert abs(an.criticality_residual(p)) < 1e-10
    assert abs(an.criticality_residual(p, c1=0.1)) > 1e-3


def test_boundary_match_improves_with_truncation():
    V = an.random_arc_field(3)
    res = [an.semidisk_solve_perturbation(V, L=L).boundary_residual() for L in (8, 16, 32, 64)]
    assert all(b < a for a, b in zip(res, res[1:]))
    assert res[-1] < 1e-2


def test_endpoint_validation():
    with pytest.raises(an.AnalyticError):
        an.semidisk_solve_perturbation(lambda th: np.cos(th))
    with pytest.raises(an.AnalyticError):
        an.semidisk_solve_perturbation(an.trig_field([1.0]), L=1)


@given(st.integers(0, 10_000))
@settings(max_examples=10, deadline=None)
def test_random_fields_vanish_at_endpoints(seed):
    V = an.random_arc_field(seed)
    assert np.all(np.abs(V(np.array([0.0, math.pi]))) < 1e-12)
