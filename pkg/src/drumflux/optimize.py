"""Gradient ascent on f_N(r) = F(rounded polar N-gon) with a three-point
quadratic line search, and vertex refinement by chord-preserving insertion."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .eigensolve import EigenError, EigenResult, objective
from .geometry.curve import GeometryError
from .geometry.polygon import LayoutOptions, PolarPolygon, build_rounded_polygon
from .shapegrad import radial_gradient

log = logging.getLogger(__name__)

R_MIN = 1e-3


class OptimizationError(RuntimeError):
    def __init__(self, msg, state=None):
        super().__init__(msg)
        self.state = state


class RefinementError(ValueError):
    pass


@dataclass
class OptimizerConfig:
    h: float = 1e-2
    eta: float = 5e-6
    K: int = 500
    r_min: float = R_MIN
    # ascent guard: an accepted step may not lower f by more than this
    monotone_tol: float = 1e-10
    # replace the raw-gradient fallback by backtracking along d
    backtracking: bool = False
    checkpoint: Optional[str] = None  # JSON-lines file, one record per iteration


@dataclass
class OptimizerState:
    params: PolarPolygon
    iteration: int = 0
    level: int = 0
    history: List[float] = field(default_factory=list)
    grad_norms: List[float] = field(default_factory=list)
    steps: List[str] = field(default_factory=list)
    trajectory: List[dict] = field(default_factory=list)
    k1: Optional[float] = None
    converged: bool = False

    @property
    def F(self) -> float:
        return self.history[-1] if self.history else float("nan")

    def record(self, F, gnorm, kind, k1):
        self.history.append(float(F))
        self.grad_norms.append(float(gnorm))
        self.steps.append(kind)
        self.k1 = k1
        rec = {"iter": self.iteration, "level": self.level, "N": self.params.N,
               "radii": [float(r) for r in self.params.radii], "F": float(F),
               "grad_norm": float(gnorm), "step": kind, "k1": float(k1)}
        self.trajectory.append(rec)
        return rec

    def to_dict(self) -> dict:
        return {"N": self.params.N, "alpha": self.params.alpha, "radii": list(map(float, self.params.radii)),
                "iterations": self.iteration, "F": self.F, "k1": self.k1, "converged": self.converged,
                "grad_norm": self.grad_norms[-1] if self.grad_norms else None}


# ---------------------------------------------------------------------------
# initial shapes
# ---------------------------------------------------------------------------

def ray_polygon_radii(vertices: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Distance from the origin to the polygon boundary along each angle
    (first crossing of the ray with an edge)."""
    P = np.asarray(vertices, dtype=float)
    out = np.empty(len(angles))
    for j, th in enumerate(angles):
        d = np.array([math.cos(th), math.sin(th)])
        best = np.inf
        for i in range(len(P)):
            a, b = P[i], P[(i + 1) % len(P)]
            e = b - a
            M = np.array([[d[0], -e[0]], [d[1], -e[1]]])
            det = np.linalg.det(M)
            if abs(det) < 1e-14:
                continue
            rho, t = np.linalg.solve(M, a)
            if rho > 1e-12 and -1e-12 <= t <= 1 + 1e-12:
                best = min(best, rho)
        if not np.isfinite(best):
            raise RefinementError(f"ray at angle {th} misses the polygon")
        out[j] = best
    return out


def initial_radii(kind: str, N: int) -> np.ndarray:
    """Polar radii of the named starting shape sampled at theta_i = (i-1) pi/(N-1).

    circle: the unit disk centred at (0, 0.8), cut by the x-axis. A full
    disk cannot pass through the anchor with positive radii at theta = 0, pi.
    square: [-1, 1] x [0, 2]. triangle: vertices (+-1, 0), (0, sqrt 3).
    """
    th = np.pi * np.arange(N) / (N - 1)
    if kind == "circle":
        c, R = 0.8, 1.0
        s = np.sin(th)
        return c * s + np.sqrt(c * c * s * s + R * R - c * c)
    if kind == "semidisk":
        return np.ones(N)
    if kind == "square":
        return ray_polygon_radii(np.array([[-1, 0], [1, 0], [1, 2], [-1, 2]], float), th)
    if kind == "triangle":
        return ray_polygon_radii(np.array([[-1, 0], [1, 0], [0, math.sqrt(3)]], float), th)
    raise ValueError(f"unknown initialization {kind!r}")


def insert_vertices(params: PolarPolygon) -> PolarPolygon:
    """N -> 2N - 1 by adding, between consecutive vertices, the point where
    the chord meets the ray at the mid angle. The polygon is unchanged."""
    r = np.asarray(params.radii, dtype=float)
    th = params.angles
    p = r[:, None] * np.c_[np.cos(th), np.sin(th)]
    new = np.empty(2 * r.size - 1)
    new[::2] = r
    for i in range(r.size - 1):
        tm = 0.5 * (th[i] + th[i + 1])
        d = np.array([math.cos(tm), math.sin(tm)])
        e = p[i + 1] - p[i]
        M = np.array([[d[0], -e[0]], [d[1], -e[1]]])
        if abs(np.linalg.det(M)) < 1e-15:
            raise RefinementError("chord parallel to bisecting ray")
        rho, t = np.linalg.solve(M, p[i])
        if rho <= 0 or not -1e-12 <= t <= 1 + 1e-12:
            raise RefinementError("bisecting ray misses the chord (polygon not star-shaped)")
        new[2 * i + 1] = rho
    return params.with_radii(new)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate(params: PolarPolygon, k_guess: Optional[float] = None) -> EigenResult:
    curve = build_rounded_polygon(params)
    return objective(curve, k_guess=k_guess, check_isolated=False)


def _try_eval(params, k_guess):
    try:
        return evaluate(params, k_guess)
    except (GeometryError, EigenError) as exc:
        log.info("evaluation failed: %s", exc)
        return None


def _write_checkpoint(path, rec):
    if path:
        with open(path, "a") as fh:
            fh.write(json.dumps(rec) + "\n")


def gradient_ascent(params: PolarPolygon, eta: float = 5e-6, K: int = 500,
                    config: Optional[OptimizerConfig] = None, state: Optional[OptimizerState] = None,
                    callback: Optional[Callable] = None) -> OptimizerState:
    """Maximize f_N from ``params`` until ||g|| <= eta or K iterations.

    Each iteration: gradient g, direction d = g/||g||, values f0, f(r + h d),
    f(r - h d), quadratic model a t^2 + b t + f0 and step t* = -b/(2a); when
    t* < 0 the step is r + g instead. A step that would lower f by more than
    ``monotone_tol`` (or yield an invalid shape) is halved until it does not.
    """
    cfg = config or OptimizerConfig()
    st = state or OptimizerState(params)
    st.params = params
    st.converged = False
    h = cfg.h
    eig = _try_eval(params, st.k1)
    if eig is None:
        raise OptimizationError("objective not evaluable at the initial radii", st)
    for _ in range(K):
        grad, dks = radial_gradient(eig.curve, eig, return_dk=True)
        g = grad.grad
        gn = float(np.linalg.norm(g))
        r = np.asarray(st.params.radii, dtype=float)
        f0 = eig.F
        if gn <= eta:
            rec = st.record(f0, gn, "converged", eig.k1)
            _write_checkpoint(cfg.checkpoint, rec)
            st.converged = True
            break
        d = g / gn
        kd = float(dks @ d)  # directional derivative of k, for warm starts
        ep = _try_eval(st.params.with_radii(r + h * d), eig.k1 + h * kd)
        em = _try_eval(st.params.with_radii(r - h * d), eig.k1 - h * kd)
        if ep is None or em is None:
            rec = st.record(f0, gn, "failed", eig.k1)
            _write_checkpoint(cfg.checkpoint, rec)
            raise OptimizationError("objective evaluation failed in line search", st)
        fp, fm = ep.F, em.F
        a = (fp + fm - 2 * f0) / (2 * h * h)
        b = (fp - fm) / (2 * h)
        t = -b / (2 * a) if a != 0 else math.nan
        if math.isfinite(t) and t >= 0:
            step, kind = t * d, "quadratic"
        elif cfg.backtracking:
            step, kind = h * d, "backtrack"
        else:
            step, kind = g, "fallback"
        new_eig, new_r, kind = _guarded_step(st.params, r, step, kind, f0, eig, kd, d, cfg,
                                             [(fp, ep, r + h * d)])
        if new_eig is None:
            rec = st.record(f0, gn, "stalled", eig.k1)
            _write_checkpoint(cfg.checkpoint, rec)
            log.warning("no ascent step found at iteration %d", st.iteration)
            break
        rec = st.record(f0, gn, kind, eig.k1)
        _write_checkpoint(cfg.checkpoint, rec)
        if callback:
            callback(st, rec)
        st.params = st.params.with_radii(new_r)
        st.iteration += 1
        eig = new_eig
        log.debug("iter %d N=%d F=%.12f |g|=%.3e step=%s", st.iteration, st.params.N, eig.F, gn, kind)
    else:
        # K iterations done: report the final point
        grad = radial_gradient(eig.curve, eig)
        rec = st.record(eig.F, grad.norm, "max_iter", eig.k1)
        _write_checkpoint(cfg.checkpoint, rec)
        st.converged = grad.norm <= eta
    return st


def _guarded_step(params, r, step, kind, f0, eig, kd, d, cfg, extra):
    """Apply the step with radius clamping; halve it while it lowers f or
    produces an invalid shape. Falls back to the best line-search point."""
    for halvings in range(30):
        new_r = np.maximum(r + step, cfg.r_min)
        guess = eig.k1 + kd * float(np.dot(new_r - r, d))
        new_eig = _try_eval(params.with_radii(new_r), guess)
        if new_eig is not None and new_eig.F >= f0 - cfg.monotone_tol:
            return new_eig, new_r, kind if halvings == 0 else kind + "+halved"
        step = 0.5 * step
    for fx, ex, rx in extra:
        if fx >= f0 - cfg.monotone_tol:
            return ex, np.maximum(rx, cfg.r_min), "probe"
    return None, r, kind


def vertex_refinement(N_target: int, eta: float = 5e-6, K: int = 500, init: str = "circle",
                      N0: int = 8, alpha: float = 0.1, config: Optional[OptimizerConfig] = None,
                      K_schedule: Optional[dict] = None, radii=None, callback=None) -> OptimizerState:
    """Alternate gradient ascent and vertex insertion, N0 -> 2 N0 - 1 -> ...,
    until N >= N_target. ``K_schedule`` maps N to an iteration cap overriding K."""
    if N0 < 2:
        raise RefinementError("need at least two vertices")
    r0 = initial_radii(init, N0) if radii is None else np.asarray(radii, float)
    params = PolarPolygon(r0, alpha=alpha)
    st = OptimizerState(params)
    while True:
        Kn = (K_schedule or {}).get(params.N, K)
        st = gradient_ascent(params, eta, Kn, config, st, callback)
        params = st.params
        if params.N >= N_target:
            break
        params = insert_vertices(params)
        st.level += 1
        st.params = params
    return st


def write_trajectory_csv(state: OptimizerState, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["iter", "level", "N", "F", "grad_norm", "k1", "step"])
        for rec in state.trajectory:
            wr.writerow([rec["iter"], rec["level"], rec["N"], f"{rec['F']:.16e}",
                         f"{rec['grad_norm']:.6e}", f"{rec['k1']:.16e}", rec["step"]])
