"""Panelized closed curves.

Points and vectors in the plane are stored as complex numbers x + iy. A curve
is a list of smooth segments, each split into panels carrying p-point
Gauss-Legendre nodes in a local panel parameter u in [-1, 1].
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..layerpot.quadrature import endpoint_basis, gauss_legendre, legendre_transform


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class PanelLayout:
    """Panel subdivision of a list of segments: panel q covers parameter
    interval [t0[q], t1[q]] of segment seg[q]. ``anchor_break`` is the index
    q of the panel that starts at the anchor point (or None)."""

    seg: np.ndarray
    t0: np.ndarray
    t1: np.ndarray
    anchor_break: Optional[int] = None

    @property
    def npanels(self) -> int:
        return len(self.seg)


@dataclass
class PanelizedCurve:
    """Discretized closed boundary, traversed counterclockwise.

    Per-node arrays: ``x`` position, ``dx``/``ddx`` first and second
    derivatives with respect to the panel parameter u. Everything else is
    derived from those three.
    """

    x: np.ndarray
    dx: np.ndarray
    ddx: np.ndarray
    p: int
    layout: PanelLayout
    anchor: Optional[complex] = None
    tag: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = self.x.shape[0]
        if n % self.p:
            raise GeometryError("node count is not a multiple of nodes_per_panel")
        self.speed = np.abs(self.dx)
        if np.any(self.speed <= 0):
            raise GeometryError("degenerate parametrization (zero speed)")
        self.tau = self.dx / self.speed
        # outward normal: clockwise rotation of the tangent
        self.normal = -1j * self.tau
        self.kappa = np.imag(np.conj(self.dx) * self.ddx) / self.speed**3
        _, glw = gauss_legendre(self.p)
        self.gl_w = np.tile(glw, self.npanels)
        self.w = self.gl_w * self.speed
        self.panel_of = np.repeat(np.arange(self.npanels), self.p)
        lens = self.w.reshape(self.npanels, self.p).sum(axis=1)
        self.panel_length = lens
        start = np.concatenate([[0.0], np.cumsum(lens)[:-1]])
        # arclength inside a panel from its start, by integrating the speed
        # interpolant
        cum = _cumulative_matrix(self.p)
        sp = self.speed.reshape(self.npanels, self.p)
        local = sp @ cum.T
        self.s = (start[:, None] + local).ravel()
        if self.layout.anchor_break is not None:
            shift = start[self.layout.anchor_break]
            self.s = np.mod(self.s - shift, lens.sum())
            self.anchor_s = 0.0
        else:
            self.anchor_s = None

    # ------------------------------------------------------------------
    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def npanels(self) -> int:
        return self.layout.npanels

    @property
    def length(self) -> float:
        return float(self.w.sum())

    def panel_slice(self, q: int) -> slice:
        return slice(q * self.p, (q + 1) * self.p)

    def legendre_coefficients(self) -> np.ndarray:
        """Legendre coefficients of each panel's position interpolant."""
        c = self._cache.get("legcoef")
        if c is None:
            T = legendre_transform(self.p)
            c = self.x.reshape(self.npanels, self.p) @ T.T
            self._cache["legcoef"] = c
        return c

    def pairwise_distance(self) -> np.ndarray:
        d = self._cache.get("dist")
        if d is None:
            d = np.abs(self.x[:, None] - self.x[None, :])
            self._cache["dist"] = d
        return d

    def gauss_bonnet(self) -> float:
        """Discrete total curvature; 2*pi for a simple closed curve."""
        return float(np.sum(self.kappa * self.w))

    def anchor_functional(self) -> np.ndarray:
        """Row vector a with a @ f = f(x*) for a node function f.

        The anchor sits on a panel break, so the value is extrapolated to the
        shared endpoint from both adjacent panels and averaged.
        """
        q = self.layout.anchor_break
        if q is None:
            raise GeometryError("curve has no registered anchor")
        E = endpoint_basis(self.p)
        a = np.zeros(self.n)
        prev = (q - 1) % self.npanels
        a[self.panel_slice(q)] += 0.5 * E[0]
        a[self.panel_slice(prev)] += 0.5 * E[1]
        return a

    def scaled(self, factor: float) -> "PanelizedCurve":
        """Dilation about the origin (keeps the anchor at the origin)."""
        anchor = None if self.anchor is None else self.anchor * factor
        return PanelizedCurve(self.x * factor, self.dx * factor, self.ddx * factor,
                              self.p, self.layout, anchor, self.tag)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["s", "x", "y", "nx", "ny", "kappa", "weight"])
            for i in range(self.n):
                wr.writerow([f"{self.s[i]:.16e}", f"{self.x[i].real:.16e}", f"{self.x[i].imag:.16e}",
                             f"{self.normal[i].real:.16e}", f"{self.normal[i].imag:.16e}",
                             f"{self.kappa[i]:.16e}", f"{self.w[i]:.16e}"])


def _cumulative_matrix(p: int) -> np.ndarray:
    """C[a, b] = integral from -1 to u_a of l_b(u) du."""
    from numpy.polynomial import legendre as L

    x, _ = gauss_legendre(p)
    T = legendre_transform(p)  # node values -> Legendre coefficients
    C = np.empty((p, p))
    for b in range(p):
        coef = T[:, b]
        integ = L.legint(coef, lbnd=-1.0)
        C[:, b] = L.legval(x, integ)
    return C


# ----------------------------------------------------------------------------
# assembly from segments
# ----------------------------------------------------------------------------

SegmentFn = Callable[[np.ndarray], tuple]


def nodes_from_layout(segments: Sequence[SegmentFn], layout: PanelLayout, p: int):
    """Evaluate positions and u-derivatives at all nodes.

    ``segments[k](t)`` returns (pos, d1, d2): position and its first two
    derivatives with respect to the segment parameter t.
    """
    glx, _ = gauss_legendre(p)
    xs, d1s, d2s = [], [], []
    for seg, t0, t1 in zip(layout.seg, layout.t0, layout.t1):
        hl = 0.5 * (t1 - t0)
        t = 0.5 * (t0 + t1) + hl * glx
        pos, d1, d2 = segments[seg](t)
        xs.append(pos)
        d1s.append(d1 * hl)
        d2s.append(d2 * hl * hl)
    return np.concatenate(xs), np.concatenate(d1s), np.concatenate(d2s)


def uniform_layout(n_panels: int, t0: float = 0.0, t1: float = 2 * np.pi, anchor_break=0) -> PanelLayout:
    b = np.linspace(t0, t1, n_panels + 1)
    return PanelLayout(np.zeros(n_panels, dtype=int), b[:-1], b[1:], anchor_break)


def radial_segment(r: Callable, center: complex = 0.0):
    """Segment for the star-shaped curve center + r(t) e^{it}.

    ``r(t)`` returns (r, r', r'') arrays.
    """

    def seg(t):
        rr, r1, r2 = r(t)
        e = np.exp(1j * t)
        pos = center + rr * e
        d1 = (r1 + 1j * rr) * e
        d2 = (r2 + 2j * r1 - rr) * e
        return pos, d1, d2

    return seg


def build_radial(r: Callable, n_panels: int, p: int = 16, center: complex = 0.0, tag: str = "radial",
                 anchor_t: float = 0.0) -> PanelizedCurve:
    """Curve center + r(t) e^{it}, t in [anchor_t, anchor_t + 2 pi], with a
    panel break (the registered anchor) at t = anchor_t."""
    if n_panels < 4:
        raise GeometryError("need at least 4 panels")
    layout = uniform_layout(n_panels, anchor_t, anchor_t + 2 * np.pi)
    x, dx, ddx = nodes_from_layout([radial_segment(r, center)], layout, p)
    anchor = center + r(np.array([anchor_t]))[0][0] * np.exp(1j * anchor_t)
    return PanelizedCurve(x, dx, ddx, p, layout, complex(anchor), tag)


def build_circle(radius: float, n_panels: int, p: int = 16, center: complex = 0.0,
                 anchor_t: float = 0.0) -> PanelizedCurve:
    """Exact circle; the anchor is the boundary point at angle ``anchor_t``."""
    if radius <= 0:
        raise GeometryError("radius must be positive")

    def r(t):
        return np.full_like(t, radius), np.zeros_like(t), np.zeros_like(t)

    return build_radial(r, n_panels, p, center, "circle", anchor_t)


def build_star(radius: float, amplitudes: dict, n_panels: int, p: int = 16) -> PanelizedCurve:
    """Radial perturbation r(t) = radius + sum_m a_m cos(m t) (+ b_m sin(m t)
    for negative keys m)."""

    def r(t):
        rr = np.full_like(t, radius)
        r1 = np.zeros_like(t)
        r2 = np.zeros_like(t)
        for m, a in amplitudes.items():
            if m >= 0:
                rr = rr + a * np.cos(m * t)
                r1 = r1 - a * m * np.sin(m * t)
                r2 = r2 - a * m * m * np.cos(m * t)
            else:
                mm = -m
                rr = rr + a * np.sin(mm * t)
                r1 = r1 + a * mm * np.cos(mm * t)
                r2 = r2 - a * mm * mm * np.sin(mm * t)
        return rr, r1, r2

    return build_radial(r, n_panels, p, 0.0, "star")


def build_ellipse(a: float, b: float, n_panels: int, p: int = 16) -> PanelizedCurve:
    """Ellipse (a cos t, b sin t); anchor at (a, 0)."""

    def seg(t):
        c, s = np.cos(t), np.sin(t)
        return a * c + 1j * b * s, -a * s + 1j * b * c, -a * c - 1j * b * s

    layout = uniform_layout(n_panels)
    x, dx, ddx = nodes_from_layout([seg], layout, p)
    return PanelizedCurve(x, dx, ddx, p, layout, complex(a), "ellipse")
