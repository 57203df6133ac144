"""Acceptance criteria 1-10, each checked at its stated tolerance.

Every test records one PASS/FAIL line; the lines are printed together in
the terminal summary (see conftest.py).
"""
import math
import time

import numpy as np
import pytest

from drumflux import analytic as an
from drumflux.eigensolve import objective
from drumflux.geometry.curve import build_circle, build_ellipse, build_star
from drumflux.geometry.fields import normal_field
from drumflux.geometry.polygon import (PolarPolygon, RoundedPolygon, build_from_polygon, build_rounded_polygon,
                                       rebuild_with_vertices, rectangle_polygon, vertex_velocity_field)
from drumflux.optimize import OptimizerConfig, gradient_ascent, initial_radii, vertex_refinement
from drumflux.shapegrad import ShapeContext, fd_audit, hadamard_rate

from conftest import CSTAR, J01, SQUARE, record

# Gauss-Bonnet errors of every curve built here and G of every convex
# domain evaluated (criteria 10 and 5); only scalars are kept because the
# curves and results carry dense matrices
GB_ERRORS = []
CONVEX_G = []


def _built(curve):
    GB_ERRORS.append(abs(curve.gauss_bonnet() - 2 * math.pi))
    return curve


def _eval(curve, **kw):
    _built(curve)
    res = objective(curve, keep_factorization=False, **kw)
    if _convex(curve):
        CONVEX_G.append(res.G)
    return res


def _convex(curve) -> bool:
    return bool(np.all(curve.kappa >= -1e-10))


# -- 1, 2 --------------------------------------------------------------------

def test_criterion_01_disk_eigenvalue():
    t0 = time.perf_counter()
    res = _eval(build_circle(1.0, 32))
    dt = time.perf_counter() - t0
    err = abs(res.k1 - J01)
    ok = err <= 1e-8 and dt < 10.0
    record(1, ok, f"k1 = {res.k1:.15f}, |k1 - j01| = {err:.1e} (tol 1e-8), runtime {dt:.2f} s (< 10 s)")
    assert ok


def test_criterion_02_disk_objective():
    res = _eval(build_circle(1.0, 32))
    ref = 1 / (math.sqrt(math.pi) * J01)
    rel = abs(res.F - ref) / ref
    ok = rel <= 1e-6
    record(2, ok, f"F = {res.F:.15f}, closed form {ref:.15f}, rel err {rel:.1e} (tol 1e-6)")
    assert ok


# -- 3 -----------------------------------------------------------------------

def _semidisk(N, alpha, p, k):
    """(G, k1, peak at anchor) for a rounded semidisk; drops the dense data."""
    res = _eval(build_rounded_polygon(PolarPolygon(np.ones(N), alpha=alpha, nodes_per_panel=p)), k_guess=k)
    out = (res.G, res.k1, bool(res.profile().max() <= res.F))
    res.curve._cache.clear()
    return out


@pytest.mark.slow
def test_criterion_03_semidisk_constant():
    # panel refinement at N = 101, alpha = 0.02 (nodes per panel 12 -> 24)
    k = an.oracle("semidisk").lambda1 ** 0.5
    panel = []
    for p in (12, 16, 20, 24):
        panel.append(_semidisk(101, 0.02, p, k))
        k = panel[-1][1]
    # rounding refinement alpha = 0.08 -> 0.04 -> 0.02 at the finest panel order
    rounding = [_semidisk(N, alpha, 24, k) for N, alpha in ((26, 0.08), (51, 0.04))] + [panel[-1]]
    G = panel[-1][0]
    rel = abs(G - CSTAR) / CSTAR
    e_panel = [abs(r[0] - CSTAR) for r in panel]
    e_round = [abs(r[0] - CSTAR) for r in rounding]
    mono_panel = all(b < a for a, b in zip(e_panel, e_panel[1:]))
    # a rounding step may not increase the error by more than the
    # discretization uncertainty, estimated by the last panel refinement
    res = abs(panel[-1][0] - panel[-2][0])
    mono_round = all(b < a + res for a, b in zip(e_round, e_round[1:])) and e_round[-1] < e_round[0]
    peak = all(r[2] for r in panel + rounding)
    ok = rel <= 5e-3 and mono_panel and mono_round and peak
    record(3, ok, f"G = {G:.12f} (N=101, alpha=0.02), rel err {rel:.1e} (tol 5e-3); "
                  f"|G-C*| panel ladder p=12..24 {['%.1e' % e for e in e_panel]} monotone={mono_panel}; "
                  f"rounding ladder alpha=.08,.04,.02 {['%.1e' % e for e in e_round]} monotone within "
                  f"resolution {res:.1e}: {mono_round}; peak at anchor={peak}")
    assert ok


# -- 4 -----------------------------------------------------------------------

def test_criterion_04_rectangle():
    exact = an.rectangle_objective(math.sqrt(3.0))
    res = _eval(build_from_polygon(rectangle_polygon(math.sqrt(3.0), 1.0, alpha=0.05)))
    d_an = abs(exact - 0.362794816)
    d_bie = abs(res.F - exact)
    ok = d_an <= 1e-8 and d_bie <= 1e-2
    record(4, ok, f"analytic {exact:.10f} (|. - 0.362794816| = {d_an:.1e}, tol 1e-8); "
                  f"BIE rounded sqrt3-rectangle F = {res.F:.10f}, diff {d_bie:.1e} (tol 1e-2)")
    assert ok


# -- 6 -----------------------------------------------------------------------

AUDIT_EPS = (4e-3, 2e-3, 1e-4)
QUANTITIES = ("dk", "dsigma", "dN", "dF")


def _audit_ok(rows, noise=1e-8):
    """<= 1e-4 at eps = 1e-4 and second order between the two larger eps
    (unless both errors are already at the noise floor)."""
    out = {}
    for q in QUANTITIES:
        e = [getattr(r, q) for r in rows]
        second = (e[0] / e[1] > 3.0) if e[1] > noise else True
        out[q] = (e[2] <= 1e-4 and second, e)
    return out


@pytest.mark.slow
def test_criterion_06_shape_derivative_audits():
    details, ok = [], True
    # (a) circle with trig normal fields
    circle = build_circle(1.0, 32)
    eig = _eval(circle)
    ctx = ShapeContext(eig)
    t = np.angle(circle.x)
    had = 0.0
    for m in (0, 2, 3):
        V = normal_field(circle, np.cos(m * t), -m * np.sin(m * t))
        sd = ctx.derivative(V, normal=True)
        rows = fd_audit(eig, sd, lambda e, m=m: build_star(1.0, {m: e}, 32), AUDIT_EPS)
        for q, (good, e) in _audit_ok(rows).items():
            ok &= good
            if not good:
                details.append(f"circle m={m} {q} errs {e}")
        had = max(had, abs(2 * eig.k1 * sd.dk - hadamard_rate(eig, V)))
    worst_a = max(getattr(r, q) for r in rows for q in QUANTITIES if r.eps == 1e-4)
    # (b) rounded square with vertex fields
    square = build_from_polygon(RoundedPolygon(SQUARE, alpha=0.1))
    eig = _eval(square)
    ctx = ShapeContext(eig)
    worst_b = 0.0
    for vi in range(1, 5):
        # vertices 1 and 4 bound the anchor edge and may only slide along it
        for j, d in enumerate(("x", "y") if vi in (2, 3) else ("x",)):
            V = vertex_velocity_field(square, vi, d)
            sd = ctx.derivative(V)

            def build(e, vi=vi, j=j):
                v = SQUARE.copy()
                v[vi - 1, j] += e
                return rebuild_with_vertices(square, v)

            rows = fd_audit(eig, sd, build, AUDIT_EPS)
            for q, (good, e) in _audit_ok(rows).items():
                ok &= good
                worst_b = max(worst_b, e[2])
                if not good:
                    details.append(f"square v{vi}{d} {q} errs {e}")
            had = max(had, abs(2 * eig.k1 * sd.dk - hadamard_rate(eig, V)))
    ok &= had <= 1e-6
    record(6, ok, f"max rel err at eps=1e-4: circle {worst_a:.1e}, square {worst_b:.1e} (tol 1e-4), "
                  f"second order checked; Hadamard max |2k dk + int V (dn u)^2| = {had:.1e} (tol 1e-6)"
           + ("; " + "; ".join(details) if details else ""))
    assert ok


# -- 7 -----------------------------------------------------------------------

def test_criterion_07_scale_invariance():
    base = build_from_polygon(RoundedPolygon(SQUARE, alpha=0.1))
    F0 = _eval(base).F
    diffs = {f: abs(_eval(base.scaled(f)).F - F0) for f in (0.5, 2.0)}
    ok = max(diffs.values()) <= 1e-8
    record(7, ok, f"|F(s x) - F| = {diffs[0.5]:.1e} (s=0.5), {diffs[2.0]:.1e} (s=2) (tol 1e-8)")
    assert ok


# -- 8 -----------------------------------------------------------------------

def test_criterion_08_semidisk_criticality():
    crit, solv = [], []
    for seed in range(20):
        p = an.semidisk_solve_perturbation(an.random_arc_field(seed))
        crit.append(abs(an.criticality_residual(p)))
        solv.append(p.solvability)
    ok = max(crit) <= 1e-10 and max(solv) <= 1e-10
    record(8, ok, f"20 seeded fields: max criticality residual {max(crit):.1e}, max |g1| {max(solv):.1e} (tol 1e-10)")
    assert ok


# -- 9 -----------------------------------------------------------------------

REFINEMENT_SCHEDULE = {8: 200, 15: 100, 29: 30, 57: 10, 113: 3}


@pytest.mark.slow
def test_criterion_09_optimization():
    t0 = time.perf_counter()
    finals = {}
    for init in ("circle", "square", "triangle"):
        st = gradient_ascent(PolarPolygon(initial_radii(init, 16), alpha=0.1), eta=5e-6, K=500,
                             config=OptimizerConfig())
        finals[init] = (st.F, st.iteration, st.grad_norms[-1], st.converged)
        _built(build_rounded_polygon(st.params))
    t_runs = time.perf_counter() - t0
    refinement = vertex_refinement(113, eta=5e-6, K=500, init="circle", N0=8, alpha=0.1,
                                         K_schedule=REFINEMENT_SCHEDULE)
    _built(build_rounded_polygon(refinement.params))
    total = time.perf_counter() - t0
    F = np.array([v[0] for v in finals.values()])
    terminated = all(v[3] or v[1] == 500 for v in finals.values())
    spread = (F.max() - F.min()) / F.max()
    ref_rel = abs(refinement.F - CSTAR) / CSTAR
    ok = terminated and F.min() > 0.36 and spread <= 0.01 and ref_rel <= 0.02 and total <= 7200
    runs = ", ".join(f"{k}: F={v[0]:.8f} it={v[1]} |g|={v[2]:.1e}" for k, v in finals.items())
    record(9, ok, f"N=16 runs [{runs}], spread {spread:.1e} (tol 1e-2); refinement 8->113 F={refinement.F:.8f} "
                  f"rel to C* {ref_rel:.1e} (tol 2e-2); runtime {total / 60:.1f} min "
                  f"(N=16 runs {t_runs / 60:.1f} min, budget 120 min)")
    assert ok


# -- 5, 10: properties of everything built above ------------------------------

def _baseline_domains():
    yield build_circle(1.0, 32)
    yield build_ellipse(1.5, 1.0, 48)
    yield build_from_polygon(RoundedPolygon(SQUARE, alpha=0.1))
    yield build_from_polygon(rectangle_polygon(3.0, 1.0, alpha=0.05))
    yield build_rounded_polygon(PolarPolygon(np.ones(16), alpha=0.1))
    yield build_rounded_polygon(PolarPolygon(initial_radii("triangle", 9), alpha=0.1))


def test_criterion_05_theorem1_bound():
    for c in _baseline_domains():
        _eval(c)
    Gmax = max(CONVEX_G)
    ok = Gmax <= an.THEOREM1_BOUND + 1e-6
    record(5, ok, f"{len(CONVEX_G)} convex domains evaluated, max G = {Gmax:.10f} <= {an.THEOREM1_BOUND} + 1e-6")
    assert ok


def test_criterion_10_geometry_identities():
    for c in _baseline_domains():
        _built(c)
    gb = max(GB_ERRORS)
    # Thomas rule dn = -tau dnu/ds and speed variation d|x'| = kappa nu |x'|
    # on the circle under nu = cos(3 t), then x'.V'/|x'| for a vertex field
    c0 = build_circle(1.0, 32)
    t = np.angle(c0.x)
    V = normal_field(c0, np.cos(3 * t), -3 * np.sin(3 * t))
    errs_n, errs_s = [], []
    for eps in (1e-3, 5e-4, 2.5e-4):
        c = build_star(1.0, {3: eps}, 32)
        errs_n.append(np.max(np.abs((c.normal - c0.normal) / eps + c0.tau * V.dnu)))
        errs_s.append(np.max(np.abs((c.speed - c0.speed) / eps - c0.kappa * V.nu * c0.speed)))
    sq = build_from_polygon(RoundedPolygon(SQUARE, alpha=0.1))
    W = vertex_velocity_field(sq, 2, "x")
    errs_g = []
    for eps in (1e-4, 5e-5, 2.5e-5):
        v = SQUARE.copy()
        v[1, 0] += eps
        c = rebuild_with_vertices(sq, v)
        errs_g.append(np.max(np.abs((c.speed - sq.speed) / eps - W.stretch * sq.speed)))

    def first_order(e):
        r = np.array(e[:-1]) / np.array(e[1:])
        return bool(np.all((r > 1.7) & (r < 2.3)) and e[-1] < 1e-2)

    fo = first_order(errs_n) and first_order(errs_s) and first_order(errs_g)
    ok = gb <= 1e-6 and fo
    record(10, ok, f"Gauss-Bonnet max error {gb:.1e} over {len(GB_ERRORS)} curves (tol 1e-6); first-order FD audits "
                   f"(normal {errs_n[-1]:.1e}, speed {errs_s[-1]:.1e}, vertex-field speed {errs_g[-1]:.1e}) pass={fo}")
    assert ok
