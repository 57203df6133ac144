import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drumflux.geometry.polygon import PolarPolygon
from drumflux.optimize import (OptimizerConfig, RefinementError, gradient_ascent, initial_radii, insert_vertices,
                               ray_polygon_radii, vertex_refinement, write_trajectory_csv)


def _on_polygon(pts, poly):
    """Distance from each point to the closed polygon."""
    d = np.full(len(pts), np.inf)
    for i in range(len(poly)):
        a, b = poly[i], poly[(i + 1) % len(poly)]
        e = b - a
        t = np.clip(((pts - a) @ e) / (e @ e), 0, 1)
        d = np.minimum(d, np.linalg.norm(pts - (a + t[:, None] * e), axis=1))
    return d


@given(st.lists(st.floats(0.5, 2.0), min_size=3, max_size=12))
@settings(max_examples=100, deadline=None)
def test_insertion_preserves_polygon(radii):
    p = PolarPolygon(np.array(radii))
    q = insert_vertices(p)
    assert q.N == 2 * p.N - 1
    assert np.array_equal(q.radii[::2], p.radii)
    closed = np.vstack([p.vertices(), [[0.0, 0.0]]])  # the closing edge passes through the origin
    assert np.max(_on_polygon(q.vertices(), closed)) < 1e-12


def test_initial_shapes():
    N = 5  # angles 0, 45, 90, 135, 180 degrees
    sq = initial_radii("square", N)
    assert np.allclose(sq, [1, math.sqrt(2), 2, math.sqrt(2), 1])
    tri = initial_radii("triangle", N)
    assert tri[2] == pytest.approx(math.sqrt(3)) and tri[0] == pytest.approx(1.0)
    circ = initial_radii("circle", N)
    assert circ[0] == pytest.approx(0.6) and circ[2] == pytest.approx(1.8)
    assert np.all(initial_radii("semidisk", N) == 1.0)
    with pytest.raises(ValueError):
        initial_radii("hexagon", N)


def test_ray_misses_polygon():
    with pytest.raises(RefinementError):
        ray_polygon_radii(np.array([[1.0, 1.0], [2.0, 1.0], [2.0, 2.0]]), np.array([-math.pi / 2]))


def test_short_ascent_is_monotone(tmp_path):
    ck = tmp_path / "ck.jsonl"
    cfg = OptimizerConfig(checkpoint=str(ck))
    st_ = gradient_ascent(PolarPolygon(initial_radii("square", 5)), eta=5e-6, K=3, config=cfg)
    F = np.array(st_.history)
    assert st_.iteration == 3 and len(F) == 4
    assert np.all(np.diff(F) >= -cfg.monotone_tol)
    assert F[-1] > F[0]
    recs = [json.loads(line) for line in open(ck)]
    assert [r["iter"] for r in recs] == [0, 1, 2, 3]
    path = tmp_path / "traj.csv"
    write_trajectory_csv(st_, path)
    rows = list(csv.reader(open(path)))
    assert rows[0][:4] == ["iter", "level", "N", "F"] and len(rows) == 5


def test_stationary_point_terminates_immediately():
    st_ = gradient_ascent(PolarPolygon(np.ones(5)), eta=1.0, K=10)
    assert st_.converged and st_.iteration == 0 and st_.steps == ["converged"]


def test_refinement_ladder():
    seen = []
    st_ = vertex_refinement(5, eta=5e-6, K=1, init="square", N0=3,
                            callback=lambda s, rec: seen.append(rec["N"]))
    assert st_.params.N == 5 and st_.level == 1
    assert seen == [3, 5]
    # ascent is monotone within a level; insertion shrinks the corner
    # roundings (they scale with edge length) so F may shift between levels
    for lev in (0, 1):
        F = [r["F"] for r in st_.trajectory if r["level"] == lev]
        assert np.all(np.diff(F) >= -1e-10)
    with pytest.raises(RefinementError):
        vertex_refinement(5, N0=1)
