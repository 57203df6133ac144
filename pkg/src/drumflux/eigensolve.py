"""First Dirichlet eigenpair from the boundary integral equation
(1/2) sigma - S'_k sigma = 0, its null densities, the Rellich normalization
and the anchored flux functional F = sigma(x*) / (k^2 sqrt(N)).

sigma is stored as the inward normal derivative of the mode (nonnegative for
the first mode).
"""
from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import chebyshev as cheb
from scipy.spatial import cKDTree

from . import specfun
from .layerpot.operators import assemble_dk_sprime, assemble_sprime

log = logging.getLogger(__name__)


# accepted distance of the determinant's zero from the real axis, relative to k
REAL_ROOT_TOL = 1e-6
# a warm-started root farther than this (relative) from its guess is not
# trusted to be the first eigenvalue
WARM_START_WINDOW = 0.15


class EigenError(RuntimeError):
    pass


class BracketError(EigenError):
    pass


class AmbiguityError(EigenError):
    pass


class ConditioningError(EigenError):
    pass


class NearDegeneracyWarning(UserWarning):
    pass


@dataclass
class EigenResult:
    k1: float
    sigma: np.ndarray  # real, inward normal derivative up to scale, max = 1
    mu: np.ndarray  # real left density with <mu, sigma> = 1
    N: float  # Rellich norm of the mode built from sigma
    F: float
    sigma_anchor: float
    residual: float  # ||(I/2 - S')sigma|| / ||sigma||
    singular_values: Tuple[float, float]  # two smallest (estimates)
    det_value: complex
    curve: object = field(repr=False)
    # complex null vectors of the discrete operator (phase-aligned) and its LU
    sigma_c: np.ndarray = field(repr=False, default=None)
    mu_c: np.ndarray = field(repr=False, default=None)
    lu: tuple = field(repr=False, default=None)

    @property
    def lambda1(self) -> float:
        return self.k1**2

    def profile(self) -> np.ndarray:
        """Normalized flux sigma / (k^2 sqrt(N)) at the nodes."""
        return self.sigma / (self.k1**2 * math.sqrt(self.N))

    @property
    def G(self) -> float:
        """Peak normalized flux over the boundary (nodes and anchor)."""
        return float(max(self.profile().max(), self.F))

    def to_dict(self) -> dict:
        return {"k1": self.k1, "lambda1": self.lambda1, "N": self.N, "F": self.F, "G": self.G,
                "residuals": {"null_residual": self.residual,
                              "smallest_singular_values": list(self.singular_values),
                              "det_abs": abs(self.det_value)},
                "nodes": int(self.sigma.size)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# ---------------------------------------------------------------------------
# determinant
# ---------------------------------------------------------------------------

def bie_matrix(curve, k: float) -> np.ndarray:
    """Discretization of (1/2) I - S'_k acting on node values."""
    A = -assemble_sprime(curve, k).matrix
    A[np.diag_indices_from(A)] += 0.5
    return A


def log_det(curve, k: float):
    """(phase, log|det|) of the Nystrom discretization of I - 2 S'_k."""
    M = 2.0 * bie_matrix(curve, k)
    sign, logabs = np.linalg.slogdet(M)
    return complex(sign), float(logabs)


def fredholm_det(curve, k: float) -> complex:
    """Determinant of the discretized I - 2 S'_k.

    The value is complex for real k (the operator is not self-adjoint);
    its zeros on the real axis are the Dirichlet eigen-wavenumbers.
    """
    sign, logabs = log_det(curve, k)
    return sign * math.exp(logabs)


# ---------------------------------------------------------------------------
# root finding
# ---------------------------------------------------------------------------

def default_bracket(curve, grid: int = 48) -> Tuple[float, float]:
    """[0.9 j01 / r_out, 1.1 j01 / r_in] from domain monotonicity.

    r_out is the largest node distance from the centroid, r_in the largest
    node distance found from interior grid points.
    """
    x = curve.x
    w = curve.w
    # centroid of the enclosed region by the boundary formula
    area = 0.5 * np.sum(w * np.real(np.conj(x) * curve.normal))
    cx = np.sum(w * 0.5 * x.real**2 * curve.normal.real) / area
    cy = np.sum(w * 0.5 * x.imag**2 * curve.normal.imag) / area
    r_out = float(np.abs(x - (cx + 1j * cy)).max())
    gx = np.linspace(x.real.min(), x.real.max(), grid)
    gy = np.linspace(x.imag.min(), x.imag.max(), grid)
    G = (gx[:, None] + 1j * gy[None, :]).ravel()
    inside = _inside(curve, G)
    tree = cKDTree(np.c_[x.real, x.imag])
    d, _ = tree.query(np.c_[G[inside].real, G[inside].imag])
    r_in = float(d.max())
    j01 = specfun.j01()
    return 0.9 * j01 / r_out, 1.1 * j01 / r_in


def _inside(curve, pts):
    """Winding-number test against the node polygon."""
    x = curve.x
    xn = np.roll(x, -1)
    ang = np.angle((xn[None, :] - pts[:, None]) / (x[None, :] - pts[:, None]))
    return np.abs(ang.sum(axis=1)) > np.pi


def chebyshev_roots(f, a: float, b: float, n: int = 33, values=None):
    """Roots in the complex plane of the degree n-1 Chebyshev interpolant of f
    on [a, b] (Chebyshev extreme points). Returns (roots, coefficients)."""
    t = np.cos(np.pi * np.arange(n) / (n - 1))
    k = 0.5 * (a + b) + 0.5 * (b - a) * t
    vals = np.array([f(kk) for kk in k]) if values is None else values
    scale = np.abs(vals).max()
    if scale == 0 or not np.isfinite(scale):
        raise EigenError("determinant samples are zero or non-finite")
    coef = cheb.chebfit(t, vals / scale, n - 1)
    mag = np.abs(coef)
    keep = np.nonzero(mag > 1e-13 * mag.max())[0]
    coef_c = coef[: keep[-1] + 1]
    if coef_c.size < 2:
        return np.array([]), coef
    r = cheb.chebroots(coef_c)
    return 0.5 * (a + b) + 0.5 * (b - a) * r, coef


def _det_fn(curve):
    cache = {}

    def f(k):
        k = float(k)
        if k not in cache:
            cache[k] = fredholm_det(curve, k)
        return cache[k]

    return f


@dataclass
class _Factored:
    """Operator (1/2) I - S'_k at one k with its LU and approximate null vectors."""

    k: float
    A: np.ndarray
    lu: tuple
    x: np.ndarray
    y: np.ndarray
    nu: complex  # eigenvalue of A closest to zero

    def det(self) -> complex:
        """det(2A) = det(I - 2S') from the LU factors."""
        lu, piv = self.lu
        d = np.diag(lu)
        sign = (-1.0) ** np.count_nonzero(piv != np.arange(piv.size))
        logabs = float(np.sum(np.log(np.abs(2 * d))))
        phase = sign * np.prod(d / np.abs(d))
        return complex(phase * math.exp(logabs)) if logabs < 700 else complex(phase * np.inf)


def _factor(curve, k, x=None, y=None, iters=2) -> _Factored:
    A = bie_matrix(curve, k)
    lu = _lu(A)
    n = A.shape[0]
    x = np.ones(n, dtype=complex) if x is None else x
    y = np.ones(n, dtype=complex) if y is None else y
    for _ in range(iters):
        x = sla.lu_solve(lu, x, check_finite=False)
        x /= np.linalg.norm(x)
        y = sla.lu_solve(lu, y, trans=1, check_finite=False)
        y /= np.linalg.norm(y)
    nu = complex((y @ (A @ x)) / (y @ x))
    return _Factored(k, A, lu, x, y, nu)


def _newton_real(curve, k_guess: float, lo: float = 0.0, maxit: int = 12):
    """Newton iteration for the real k closest to a zero of the eigenvalue
    nu(k) of (1/2) I - S'_k nearest the origin.

    nu vanishes exactly where the determinant does. dnu/dk comes from the
    left/right eigenvectors and the wavenumber derivative of S'. The
    discrete zero sits about the discretization error off the real axis, so
    each step is the real least-squares Newton step. Returns
    (k, offset, converged, factored) with offset = |nu| / |dnu/dk| the
    distance of the zero from the real axis.
    """
    k = float(k_guess)
    fac = _factor(curve, k, iters=3)
    offset, converged = np.inf, False
    for _ in range(maxit):
        dA = -assemble_dk_sprime(curve, k).matrix
        dnu = complex((fac.y @ (dA @ fac.x)) / (fac.y @ fac.x))
        if dnu == 0:
            break
        offset = abs(fac.nu) / abs(dnu)
        step = -float(np.real(np.conj(dnu) * fac.nu)) / abs(dnu) ** 2
        if abs(step) < 1e-13 * k:
            converged = True
            break
        step = float(np.clip(step, -0.2 * k, 0.2 * k))
        k = max(k + step, lo + 1e-12 * k)
        fac = _factor(curve, k, fac.x, fac.y)
        if abs(step) < 1e-11 * k:
            converged = True
            dA = -assemble_dk_sprime(curve, k).matrix
            dnu = complex((fac.y @ (dA @ fac.x)) / (fac.y @ fac.x))
            offset = abs(fac.nu) / abs(dnu) if dnu != 0 else np.inf
            break
    return k, offset, converged, fac


def find_first_eigenvalue(curve, bracket: Optional[Tuple[float, float]] = None, n_cheb: int = 33,
                          strict: bool = False, max_depth: int = 3) -> float:
    """Smallest Dirichlet eigen-wavenumber in the bracket.

    Samples the determinant at Chebyshev points, takes the interpolant's
    roots near the real segment, polishes each candidate by Newton iteration
    and keeps the smallest confirmed real root. When the interpolant is not
    resolved (slowly decaying coefficients) the bracket is split in half.
    """
    a, b = default_bracket(curve) if bracket is None else bracket
    if not a < b:
        raise BracketError("bracket must satisfy a < b")
    return _first_root(curve, a, b, n_cheb, strict, max_depth)[0]


def _first_root(curve, a, b, n_cheb=33, strict=False, max_depth=3):
    found = _bracket_roots(curve, a, b, n_cheb, max_depth)
    if not found:
        raise BracketError(f"no eigenvalue found in [{a}, {b}]")
    found.sort(key=lambda t: t[0])
    if strict and len(found) > 1:
        raise AmbiguityError(f"several eigenvalues in bracket: {[t[0] for t in found]}")
    return found[0]


def _bracket_roots(curve, a, b, n_cheb, depth):
    f = _det_fn(curve)
    r, coef = chebyshev_roots(lambda k: f(k), a, b, n_cheb)
    tail = np.abs(coef[-3:]).max() / np.abs(coef).max()
    if tail > 1e-6 and depth > 0:
        m = 0.5 * (a + b)
        return _bracket_roots(curve, a, m, n_cheb, depth - 1) + _bracket_roots(curve, m, b, n_cheb, depth - 1)
    width = b - a
    cand = r[(np.abs(r.imag) < 0.05 * width) & (r.real > a - 0.01 * width) & (r.real < b + 0.01 * width)]
    found = []
    for z in sorted(cand, key=lambda z: z.real):
        k, offset, ok, fac = _newton_real(curve, float(z.real), lo=0.5 * a)
        if not ok or not (a - 0.01 * width <= k <= b + 0.01 * width):
            continue
        # a genuine eigenvalue: the zero lies (numerically) on the real axis
        if offset > REAL_ROOT_TOL * k:
            continue
        if all(abs(k - q[0]) > 1e-8 * k for q in found):
            found.append((k, fac))
    return found


# ---------------------------------------------------------------------------
# null densities and normalization
# ---------------------------------------------------------------------------

def _lu(A):
    return sla.lu_factor(A, check_finite=False)


def smallest_singular_values(A: np.ndarray, lu, iters: int = 6, seed: int = 0):
    """Estimates of the two smallest singular values by block inverse
    iteration on A^H A."""
    rng = np.random.default_rng(seed)
    n = A.shape[0]
    Q = rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2))
    Q, _ = np.linalg.qr(Q)
    for _ in range(iters):
        Y = sla.lu_solve(lu, Q, trans=2, check_finite=False)
        Y = sla.lu_solve(lu, Y, check_finite=False)
        Q, _ = np.linalg.qr(Y)
    s = np.linalg.svd(A @ Q, compute_uv=False)
    return float(s[-1]), float(s[0])


def null_density(curve, k1: float, check_isolated: bool = True, factored: Optional[_Factored] = None):
    """(sigma, mu, extras) for the operator (1/2) I - S'_{k1}.

    sigma is phase-aligned, scaled to max 1 and made nonnegative on average;
    mu = l / w from the left null vector l, normalized so sum w mu sigma = 1.
    """
    fac = factored if factored is not None and factored.k == k1 else _factor(curve, k1, iters=3)
    x = fac.x
    # one more inverse-iteration sweep for the final vectors
    x = sla.lu_solve(fac.lu, x, check_finite=False)
    y = sla.lu_solve(fac.lu, fac.y, trans=1, check_finite=False)
    # rotate to (nearly) real and fix sign and scale
    j = np.argmax(np.abs(x))
    x = x * (abs(x[j]) / x[j])
    if np.sum(curve.w * x.real) < 0:
        x = -x
    x = x / np.abs(x).max()
    mu_c = y / curve.w
    mu_c = mu_c / np.sum(curve.w * mu_c * x)
    A = fac.A
    resid = float(np.linalg.norm(A @ x) / np.linalg.norm(x))
    svals = smallest_singular_values(A, fac.lu)
    if check_isolated and svals[1] < 1e3 * svals[0]:
        warnings.warn(f"smallest singular value not isolated: {svals}", NearDegeneracyWarning, stacklevel=2)
    return x, mu_c, {"residual": resid, "svals": svals, "lu": fac.lu, "A": A, "det": fac.det()}


def rellich_norm(curve, k: float, sigma: np.ndarray) -> float:
    """||u||^2 = (1/2k^2) int sigma^2 (x . n) ds."""
    xn = np.real(np.conj(curve.x) * curve.normal)
    val = float(np.real(np.sum(curve.w * sigma**2 * xn)) / (2 * k * k))
    if not val > 0:
        raise EigenError("nonpositive Rellich norm (orientation or geometry problem)")
    return val


def objective(curve, bracket=None, k_guess: Optional[float] = None, keep_factorization: bool = True,
              check_isolated: bool = True) -> EigenResult:
    """Full eigen-solve and evaluation of F at the registered anchor.

    With ``k_guess`` (e.g. from a nearby shape) the root is polished
    directly from the guess; the bracket search is the fallback.
    """
    k1 = fac = None
    if k_guess is not None:
        k, offset, ok, fac = _newton_real(curve, float(k_guess), lo=0.5 * k_guess)
        if ok and offset < REAL_ROOT_TOL * k and abs(k - k_guess) < WARM_START_WINDOW * k_guess:
            k1 = k
        else:
            log.info("warm start from k=%g failed; falling back to bracket search", k_guess)
    if k1 is None:
        a, b = default_bracket(curve) if bracket is None else bracket
        k1, fac = _first_root(curve, a, b)
    sigma_c, mu_c, extra = null_density(curve, k1, check_isolated, fac)
    sigma = sigma_c.real
    mu = mu_c.real
    N = rellich_norm(curve, k1, sigma)
    a = curve.anchor_functional()
    s_anchor = float(a @ sigma)
    F = s_anchor / (k1 * k1 * math.sqrt(N))
    return EigenResult(k1, sigma, mu, N, F, s_anchor, extra["residual"], extra["svals"], extra["det"], curve,
                       sigma_c, mu_c, extra["lu"] if keep_factorization else None)


def boundary_profile(res: EigenResult):
    """Rows (s, x, y, flux/lambda) in arclength order from the anchor."""
    c = res.curve
    prof = res.profile()
    order = np.argsort(c.s)
    rows = [(0.0, c.anchor.real, c.anchor.imag, res.F)] if c.anchor is not None else []
    rows += [(float(c.s[i]), float(c.x[i].real), float(c.x[i].imag), float(prof[i])) for i in order]
    return rows


def write_profile_csv(res: EigenResult, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["s", "x", "y", "dnu_over_lambda"])
        for row in boundary_profile(res):
            wr.writerow([f"{v:.16e}" for v in row])
