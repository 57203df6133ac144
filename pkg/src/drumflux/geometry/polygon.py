"""Rounded polygons: polygon corners replaced by smooth convex blends.

At a vertex p with unit edge directions e_in (arriving) and e_out (leaving),
the polygon near p is p + h (u m + |u| d) with m = (e_in + e_out)/2,
d = (e_out - e_in)/2. The rounded corner swaps |u| for an even blend phi with
phi'' = K (1 - u^2)^4 on [-1, 1], matched to |u| with five continuous
derivatives at u = +-1. The half-width is h = alpha * smin(adjacent edge
lengths).

All construction steps are analytic in the vertex coordinates, so vertex
velocity fields are obtained exactly by complex-step differentiation.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .curve import GeometryError, PanelizedCurve, PanelLayout, nodes_from_layout
from .fields import DeformationField, general_field

BLEND_ORDER = 4
_CSTEP = 1e-30


# ---------------------------------------------------------------------------
# smooth minimum and blend profile
# ---------------------------------------------------------------------------

def smin(a, b):
    """Smooth minimum 1/log(exp(1/a) + exp(1/b) - 1).

    Evaluated with the larger reciprocal factored out so only exponentials
    of nonpositive numbers appear. Accepts complex input (for complex-step
    differentiation); the branch is chosen on real parts.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if np.any(np.real(a) <= 0) or np.any(np.real(b) <= 0):
        raise GeometryError("smin needs positive arguments")
    ia, ib = 1.0 / a, 1.0 / b
    first = np.real(ia) >= np.real(ib)
    big = np.where(first, ia, ib)
    small = np.where(first, ib, ia)
    out = 1.0 / (big + np.log1p(np.exp(small - big) - np.exp(-big)))
    return out if out.ndim else out[()]


def _blend_polynomials(m: int = BLEND_ORDER):
    base = P.polypow([1.0, 0.0, -1.0], m)  # (1 - u^2)^m
    d1 = P.polyint(base)  # odd, zero at 0
    K = 1.0 / P.polyval(1.0, d1)
    d2 = K * base
    d1 = K * d1
    phi = P.polyint(d1)
    phi[0] = 1.0 - P.polyval(1.0, phi)
    return phi, d1, d2


_PHI, _DPHI, _D2PHI = _blend_polynomials()


def blend(u):
    """Corner blend phi(u) and its first two derivatives."""
    return P.polyval(u, _PHI), P.polyval(u, _DPHI), P.polyval(u, _D2PHI)


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------

@dataclass
class LayoutOptions:
    """Panel-size controls.

    ``kappa_factor``: corner panels satisfy length * max|kappa| <= kappa_factor.
    ``grade``: size ratio between consecutive edge panels moving away from a
    corner. ``weak_turn``: corners turning by less than this angle (radians)
    let the first edge panel grow by weak_turn/turn, since a mild corner
    barely disturbs the density. ``max_panel``: cap on panel length as a
    fraction of the polygon diameter.
    """

    kappa_factor: float = 1.0
    grade: float = 2.0
    weak_turn: float = 0.5
    max_panel: float = 0.2


@dataclass
class PolarPolygon:
    """Radii r_1..r_N at equally spaced angles theta_i = (i-1) pi / (N-1).

    p_1 and p_N sit on the x-axis on opposite sides of the origin, so the
    closing edge [p_N, p_1] contains the anchor x* = (0, 0).
    """

    radii: np.ndarray
    alpha: float = 0.1
    nodes_per_panel: int = 16
    layout: LayoutOptions = field(default_factory=LayoutOptions)

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        if self.radii.ndim != 1 or self.radii.size < 3:
            raise GeometryError("need at least 3 radii")
        if np.any(~np.isfinite(self.radii)) or np.any(self.radii <= 0):
            raise GeometryError("radii must be positive")
        if not 0 < self.alpha < 0.5:
            raise GeometryError("rounding fraction must lie in (0, 1/2)")

    @property
    def N(self) -> int:
        return self.radii.size

    @property
    def angles(self) -> np.ndarray:
        return np.arange(self.N) * math.pi / (self.N - 1)

    def vertices(self, radii=None) -> np.ndarray:
        r = self.radii if radii is None else radii
        th = self.angles
        return np.stack([r * np.cos(th), r * np.sin(th)], axis=1)

    def with_radii(self, radii) -> "PolarPolygon":
        return PolarPolygon(np.array(radii, dtype=float), self.alpha, self.nodes_per_panel, self.layout)

    def to_json(self) -> str:
        return json.dumps({"radii": [float(r) for r in self.radii], "alpha": self.alpha,
                           "nodes_per_panel": self.nodes_per_panel})

    @classmethod
    def from_dict(cls, d: dict) -> "PolarPolygon":
        if "radii" not in d:
            raise GeometryError("polygon spec needs 'radii'")
        return cls(np.asarray(d["radii"], dtype=float), float(d.get("alpha", 0.1)),
                   int(d.get("nodes_per_panel", 16)))

    @classmethod
    def from_json(cls, text: str) -> "PolarPolygon":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# construction (generic dtype: float, or complex for complex-step)
# ---------------------------------------------------------------------------

def _norm(v):
    return np.sqrt(v[..., 0] ** 2 + v[..., 1] ** 2)


@dataclass
class _Frame:
    """Derived quantities of a rounded polygon for given vertices."""

    V: np.ndarray  # (N, 2) vertices
    anchor: np.ndarray  # (2,)
    e: np.ndarray  # (N, 2) unit direction of edge i -> i+1
    ell: np.ndarray  # (N,) edge lengths
    h: np.ndarray  # (N,) corner half-widths
    start: np.ndarray  # (N, 2) corner start points p_i - h_i e_in
    end: np.ndarray  # (N, 2) corner end points p_i + h_i e_out


def _frame(V, alpha, anchor) -> _Frame:
    Vn = np.roll(V, -1, axis=0)
    diff = Vn - V
    ell = _norm(diff)
    if np.any(np.real(ell) <= 0):
        raise GeometryError("zero-length polygon edge")
    e = diff / ell[:, None]
    ell_prev = np.roll(ell, 1)
    h = alpha * smin(ell_prev, ell)
    e_in = np.roll(e, 1, axis=0)
    start = V - h[:, None] * e_in
    end = V + h[:, None] * e
    return _Frame(V, anchor, e, ell, h, start, end)


def _corner_segment(fr: _Frame, i: int):
    p = fr.V[i]
    e_in = fr.e[i - 1]
    e_out = fr.e[i]
    m = 0.5 * (e_in + e_out)
    d = 0.5 * (e_out - e_in)
    h = fr.h[i]

    def seg(u):
        ph, dph, d2ph = blend(u)
        pos = p[None, :] + h * (u[:, None] * m[None, :] + ph[:, None] * d[None, :])
        d1 = h * (m[None, :] + dph[:, None] * d[None, :])
        d2 = h * (d2ph[:, None] * d[None, :])
        return pos, d1, d2

    return seg


def _line_segment(a, b):
    def seg(t):
        pos = a[None, :] + t[:, None] * (b - a)[None, :]
        d1 = np.broadcast_to((b - a)[None, :], pos.shape)
        return pos, d1, np.zeros_like(pos)

    return seg


def _segments(fr: _Frame):
    """Segments in traversal order starting at the anchor:
    anchor -> corner 1 start, corner 1, edge 1, corner 2, ..., corner N,
    corner N end -> anchor."""
    N = fr.V.shape[0]
    segs = [_line_segment(fr.anchor, fr.start[0])]
    kinds = [("anchor_edge", 0)]
    for i in range(N):
        segs.append(_corner_segment(fr, i))
        kinds.append(("corner", i))
        if i < N - 1:
            segs.append(_line_segment(fr.end[i], fr.start[i + 1]))
            kinds.append(("edge", i))
    segs.append(_line_segment(fr.end[N - 1], fr.anchor))
    kinds.append(("anchor_edge", N - 1))
    return segs, kinds


def _seg_param_range(kind):
    return (-1.0, 1.0) if kind[0] == "corner" else (0.0, 1.0)


def _complexify(segs):
    """Wrap (m, 2)-array segments into complex-point segments."""

    def wrap(seg):
        def f(t):
            pos, d1, d2 = seg(t)
            return (pos[:, 0] + 1j * pos[:, 1], d1[:, 0] + 1j * d1[:, 1], d2[:, 0] + 1j * d2[:, 1])

        return f

    return [wrap(s) for s in segs]


def _validate(fr: _Frame):
    V = np.real(fr.V)
    N = V.shape[0]
    ell = np.real(fr.ell)
    h = np.real(fr.h)
    if np.any(h + np.roll(h, -1) >= ell):
        raise GeometryError("rounded corners overlap; reduce alpha")
    # anchor lies strictly inside the closing edge, between the two rounds
    a = np.real(fr.anchor)
    pN, p1 = V[-1], V[0]
    edge = p1 - pN
    t = np.dot(a - pN, edge) / np.dot(edge, edge)
    off = abs(edge[0] * (a - pN)[1] - edge[1] * (a - pN)[0]) / np.linalg.norm(edge)
    if off > 1e-12 * max(1.0, np.linalg.norm(edge)):
        raise GeometryError("anchor is not on the closing edge [p_N, p_1]")
    L = ell[-1]
    if not (h[-1] / L < t < 1 - h[0] / L):
        raise GeometryError("anchor falls inside a rounded corner")
    # simple polygon: no two non-adjacent edges intersect
    for i in range(N):
        a0, a1 = V[i], V[(i + 1) % N]
        for j in range(i + 2, N):
            if i == 0 and j == N - 1:
                continue
            b0, b1 = V[j], V[(j + 1) % N]
            if _segments_cross(a0, a1, b0, b1):
                raise GeometryError("polygon self-intersects")
    area = 0.5 * np.sum(V[:, 0] * np.roll(V[:, 1], -1) - np.roll(V[:, 0], -1) * V[:, 1])
    if area <= 0:
        raise GeometryError("vertices must be in counterclockwise order")


def _segments_cross(a0, a1, b0, b1) -> bool:
    def orient(p, q, r):
        return np.sign((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))

    o1, o2 = orient(a0, a1, b0), orient(a0, a1, b1)
    o3, o4 = orient(b0, b1, a0), orient(b0, b1, a1)
    return o1 * o2 < 0 and o3 * o4 < 0


# ---------------------------------------------------------------------------
# panel layout
# ---------------------------------------------------------------------------

def _corner_stats(seg, n=257):
    u = np.cos(np.linspace(0, np.pi, n))[::-1]
    _, d1, d2 = seg(u)
    sp = np.hypot(d1[:, 0], d1[:, 1])
    kap = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / sp**3
    from numpy.polynomial import legendre

    x, w = legendre.leggauss(64)
    _, g1, _ = seg(x)
    arc = float(np.sum(w * np.hypot(g1[:, 0], g1[:, 1])))
    return arc, float(kap.max())


def _graded_sizes(length, a, b, grade, cap):
    """Panel lengths along an edge, growing geometrically from both ends.

    ``a``/``b`` are the preferred first sizes at the start/end (None: no
    constraint at that end)."""
    a = cap if a is None else min(a, cap)
    b = cap if b is None else min(b, cap)
    left, right = [], []
    rem = length
    while rem > a + b:
        if a <= b:
            left.append(a)
            rem -= a
            a = min(a * grade, cap)
        else:
            right.append(b)
            rem -= b
            b = min(b * grade, cap)
    last = max(left[-1] if left else 0.0, right[-1] if right else 0.0)
    if left and right and rem < 0.5 * last:
        left[-1] += 0.5 * rem
        right[-1] += 0.5 * rem
        mid = []
    elif (left or right) and rem < 0.5 * last:
        (left if left else right)[-1] += rem
        mid = []
    else:
        nm = max(1, math.ceil(rem / min(cap, max(a, b))))
        mid = [rem / nm] * nm
    return left + mid + right[::-1]


def polygon_layout(fr: _Frame, kinds, segs, p: int, opts: LayoutOptions) -> PanelLayout:
    V = np.real(fr.V)
    diam = max(np.linalg.norm(V[i] - V[j]) for i in range(len(V)) for j in range(len(V)))
    cap = opts.max_panel * diam
    e = np.real(fr.e)
    N = V.shape[0]
    turn = np.array([abs(math.atan2(e[i - 1, 0] * e[i, 1] - e[i - 1, 1] * e[i, 0],
                                    np.dot(e[i - 1], e[i]))) for i in range(N)])
    ncorner = np.zeros(N, dtype=int)
    cplen = np.zeros(N)
    for idx, kind in enumerate(kinds):
        if kind[0] == "corner":
            i = kind[1]
            arc, kmax = _corner_stats(segs[idx])
            nc = max(1, math.ceil(arc * kmax / opts.kappa_factor), math.ceil(arc / cap))
            ncorner[i] = nc
            cplen[i] = arc / nc

    def first_size(i):
        return opts.grade * cplen[i] * max(1.0, opts.weak_turn / max(turn[i], 1e-300))

    seg_ids, t0s, t1s = [], [], []
    for idx, kind in enumerate(kinds):
        if kind[0] == "corner":
            b = np.linspace(-1.0, 1.0, ncorner[kind[1]] + 1)
            sizes_t = list(zip(b[:-1], b[1:]))
        else:
            i = kind[1]
            if kind[0] == "edge":
                length = float(np.linalg.norm(np.real(fr.start[i + 1] - fr.end[i])))
                sizes = _graded_sizes(length, first_size(i), first_size(i + 1), opts.grade, cap)
            elif i == 0:  # anchor -> corner 1
                length = float(np.linalg.norm(np.real(fr.start[0] - fr.anchor)))
                sizes = _graded_sizes(length, None, first_size(0), opts.grade, cap)
            else:  # corner N -> anchor
                length = float(np.linalg.norm(np.real(fr.anchor - fr.end[N - 1])))
                sizes = _graded_sizes(length, first_size(N - 1), None, opts.grade, cap)
            c = np.concatenate([[0.0], np.cumsum(sizes)]) / length
            c[-1] = 1.0
            sizes_t = list(zip(c[:-1], c[1:]))
        for a, b in sizes_t:
            seg_ids.append(idx)
            t0s.append(a)
            t1s.append(b)
    return PanelLayout(np.array(seg_ids), np.array(t0s), np.array(t1s), anchor_break=0)


# ---------------------------------------------------------------------------
# public builders
# ---------------------------------------------------------------------------

@dataclass
class RoundedPolygon:
    """Counterclockwise polygon whose closing edge [v_N, v_1] contains the anchor."""

    vertices: np.ndarray
    alpha: float = 0.1
    anchor: tuple = (0.0, 0.0)
    nodes_per_panel: int = 16
    layout_options: LayoutOptions = field(default_factory=LayoutOptions)

    def frame(self, vertices=None) -> _Frame:
        V = self.vertices if vertices is None else vertices
        anchor = np.asarray(self.anchor, dtype=V.dtype)
        return _frame(V, self.alpha, anchor)


def build_from_polygon(poly: RoundedPolygon, layout: Optional[PanelLayout] = None,
                       vertices=None, tag: str = "rounded polygon") -> PanelizedCurve:
    V = np.asarray(poly.vertices if vertices is None else vertices, dtype=float)
    fr = poly.frame(V)
    _validate(fr)
    segs, kinds = _segments(fr)
    if layout is None:
        layout = polygon_layout(fr, kinds, segs, poly.nodes_per_panel, poly.layout_options)
    x, dx, ddx = nodes_from_layout(_complexify(segs), layout, poly.nodes_per_panel)
    curve = PanelizedCurve(x, dx, ddx, poly.nodes_per_panel, layout,
                           complex(poly.anchor[0], poly.anchor[1]), tag)
    curve._cache["polygon"] = RoundedPolygon(V, poly.alpha, poly.anchor, poly.nodes_per_panel,
                                             poly.layout_options)
    return curve


def polar_to_polygon(params: PolarPolygon) -> RoundedPolygon:
    return RoundedPolygon(params.vertices(), params.alpha, (0.0, 0.0), params.nodes_per_panel,
                          params.layout)


def build_rounded_polygon(params: PolarPolygon, layout: Optional[PanelLayout] = None) -> PanelizedCurve:
    """Rounded polar polygon with the anchor x* = (0, 0) registered as a panel break."""
    curve = build_from_polygon(polar_to_polygon(params), layout, tag="polar polygon")
    curve._cache["polar"] = params
    return curve


def rectangle_polygon(width: float, height: float, alpha: float = 0.1, **kw) -> RoundedPolygon:
    """Rectangle [-w/2, w/2] x [0, h] with the anchor at the bottom midpoint."""
    w2 = 0.5 * width
    V = np.array([[w2, 0.0], [w2, height], [-w2, height], [-w2, 0.0]])
    return RoundedPolygon(V, alpha, (0.0, 0.0), **kw)


def _perturbed_nodes(poly: RoundedPolygon, layout: PanelLayout, Vc: np.ndarray):
    fr = poly.frame(Vc)
    segs, _ = _segments(fr)
    glx = None
    from ..layerpot.quadrature import gauss_legendre

    glx, _ = gauss_legendre(poly.nodes_per_panel)
    pos_l, d1_l = [], []
    for seg, t0, t1 in zip(layout.seg, layout.t0, layout.t1):
        hl = 0.5 * (t1 - t0)
        t = 0.5 * (t0 + t1) + hl * glx
        pos, d1, _ = segs[seg](t)
        pos_l.append(pos)
        d1_l.append(d1 * hl)
    return np.concatenate(pos_l), np.concatenate(d1_l)


def vertex_velocity_field(curve: PanelizedCurve, vertex_index: int, direction) -> DeformationField:
    """Boundary velocity for moving one vertex at fixed curve parameters.

    ``vertex_index`` is 1-based. ``direction`` is "x", "y", "radial" (along
    (cos theta_i, sin theta_i) from the origin) or a 2-vector. Computed by
    complex-step differentiation of the construction, so the result is exact
    to rounding and vanishes identically away from the moved vertex.
    """
    poly: RoundedPolygon = curve._cache.get("polygon")
    if poly is None:
        raise GeometryError("curve was not built from a polygon")
    N = poly.vertices.shape[0]
    if not 1 <= vertex_index <= N:
        raise GeometryError(f"vertex index must be in 1..{N}")
    i = vertex_index - 1
    if isinstance(direction, str):
        if direction in ("x", "x-axis"):
            dvec = np.array([1.0, 0.0])
        elif direction in ("y", "y-axis"):
            dvec = np.array([0.0, 1.0])
        elif direction == "radial":
            v = poly.vertices[i]
            dvec = v / np.linalg.norm(v)
        else:
            raise GeometryError(f"unknown direction {direction!r}")
    else:
        dvec = np.asarray(direction, dtype=float)
    return _cstep_field(curve, poly, {i: dvec})


def _cstep_field(curve, poly, moves: dict) -> DeformationField:
    Vc = poly.vertices.astype(complex)
    for i, dvec in moves.items():
        Vc[i] = Vc[i] + 1j * _CSTEP * dvec
    pos, d1 = _perturbed_nodes(poly, curve.layout, Vc)
    V = (pos[:, 0].imag + 1j * pos[:, 1].imag) / _CSTEP
    dV_du = (d1[:, 0].imag + 1j * d1[:, 1].imag) / _CSTEP
    return general_field(curve, V, dV_du)


def radial_fields(curve: PanelizedCurve) -> list:
    """Fields d(gamma)/d(r_i) for a polar polygon, i = 1..N."""
    params: PolarPolygon = curve._cache.get("polar")
    if params is None:
        raise GeometryError("curve was not built from a polar polygon")
    poly = curve._cache["polygon"]
    th = params.angles
    out = []
    for i in range(params.N):
        out.append(_cstep_field(curve, poly, {i: np.array([math.cos(th[i]), math.sin(th[i])])}))
    return out


def rebuild_with_vertices(curve: PanelizedCurve, vertices) -> PanelizedCurve:
    """Same panel layout, new vertex positions (for finite-difference audits)."""
    poly: RoundedPolygon = curve._cache["polygon"]
    out = build_from_polygon(poly, curve.layout, vertices=vertices, tag=curve.tag)
    if "polar" in curve._cache:
        params = curve._cache["polar"]
        V = np.asarray(vertices)
        out._cache["polar"] = params.with_radii(np.hypot(V[:, 0], V[:, 1]))
    return out
