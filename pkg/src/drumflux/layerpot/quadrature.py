"""Panel quadrature: Gauss-Legendre rules, polynomial interpolation on a panel,
and product-integration weights for singular and nearly singular kernels.

All weights integrate the Lagrange basis of the panel's Gauss-Legendre nodes
against a fixed singular factor in the panel parameter u in [-1, 1]:

* ``log|z0 - u|``
* ``1/(z0 - u)`` (Cauchy)
* ``1/(z0 - u)**2`` (hypersingular)

For a point z0 off the segment the integrals are computed by composite
Gauss-Legendre quadrature on a mesh that is graded geometrically toward the
projection of z0, which keeps every sub-interval well separated from the
singularity relative to its own length.
"""
from __future__ import annotations

import warnings
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from scipy import integrate

from .._accel import USE_NUMBA, njit

# reference rule used on the sub-intervals of the graded mesh
_SUB_ORDER = 16
_SUB_X, _SUB_W = legendre.leggauss(_SUB_ORDER)


@lru_cache(maxsize=8)
def gauss_legendre(p: int):
    """Nodes and weights of the p-point Gauss-Legendre rule on [-1, 1]."""
    x, w = legendre.leggauss(p)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=8)
def barycentric_weights(p: int) -> np.ndarray:
    """Barycentric weights for the Gauss-Legendre nodes (closed form)."""
    x, w = gauss_legendre(p)
    lam = np.sqrt((1.0 - x * x) * w)
    lam[1::2] *= -1.0
    lam.setflags(write=False)
    return lam


def lagrange_basis(p: int, t) -> np.ndarray:
    """Values of the p Lagrange basis polynomials at points ``t``.

    Returns an array of shape (len(t), p). ``t`` may be complex.
    """
    x, _ = gauss_legendre(p)
    lam = barycentric_weights(p)
    t = np.atleast_1d(np.asarray(t))
    diff = t[:, None] - x[None, :]
    hit = diff == 0
    diff = np.where(hit, 1.0, diff)
    terms = lam / diff
    out = terms / terms.sum(axis=1, keepdims=True)
    rows = hit.any(axis=1)
    if rows.any():
        out[rows] = hit[rows].astype(out.dtype)
    return out


@lru_cache(maxsize=8)
def legendre_transform(p: int) -> np.ndarray:
    """Matrix mapping node values to Legendre coefficients of the interpolant."""
    x, w = gauss_legendre(p)
    P = legendre.legvander(x, p - 1)  # (p nodes, p degrees)
    T = (P * w[:, None]).T * ((2 * np.arange(p) + 1) / 2.0)[:, None]
    T.setflags(write=False)
    return T


@lru_cache(maxsize=8)
def self_log_table(p: int) -> np.ndarray:
    """Table W[a, b] = integral of l_b(u) log|u_a - u| over [-1, 1].

    The endpoint logarithm on each side of u_a is handled by QUADPACK's
    algebraic-logarithmic weight, so the table is accurate to near machine
    precision.
    """
    x, _ = gauss_legendre(p)
    W = np.empty((p, p))
    with warnings.catch_warnings():
        # QUADPACK reports roundoff once it hits machine precision; harmless here
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        _fill_self_log(W, x, p)
    W.setflags(write=False)
    return W


def _fill_self_log(W, x, p):
    for a in range(p):
        for b in range(p):
            f = lambda u, b=b: lagrange_basis(p, [u])[0, b]
            right, _ = integrate.quad(f, x[a], 1.0, weight="alg-loga", wvar=(0.0, 0.0),
                                      epsabs=1e-15, epsrel=1e-14, limit=200)
            left, _ = integrate.quad(f, -1.0, x[a], weight="alg-logb", wvar=(0.0, 0.0),
                                     epsabs=1e-15, epsrel=1e-14, limit=200)
            W[a, b] = left + right


@lru_cache(maxsize=8)
def leave_one_out_table(p: int) -> np.ndarray:
    """E[a, b]: value at u_a of the b-th Lagrange basis polynomial built on
    the nodes other than u_a (E[a, a] = 0).

    Used to recover diagonal limits of bounded kernels from the other nodes
    of the same panel.
    """
    x, _ = gauss_legendre(p)
    E = np.zeros((p, p))
    for a in range(p):
        others = [m for m in range(p) if m != a]
        for b in others:
            val = 1.0
            for m in others:
                if m != b:
                    val *= (x[a] - x[m]) / (x[b] - x[m])
            E[a, b] = val
    E.setflags(write=False)
    return E


@lru_cache(maxsize=8)
def endpoint_basis(p: int):
    """Lagrange basis values at u = -1 and u = +1, shape (2, p)."""
    out = lagrange_basis(p, np.array([-1.0, 1.0])).real
    out.setflags(write=False)
    return out


def bernstein_radius(z):
    """Parameter of the Bernstein ellipse through z (foci at -1, 1)."""
    z = np.asarray(z, dtype=complex)
    s = np.sqrt(z - 1.0) * np.sqrt(z + 1.0)
    return np.maximum(np.abs(z + s), np.abs(z - s))


# ---------------------------------------------------------------------------
# graded composite mesh toward a point near [-1, 1]
# ---------------------------------------------------------------------------

@njit
def _graded_breaks(c, d):
    """Breakpoints of a mesh on [-1, 1] graded toward c at scale d."""
    half = 0.5 * d
    lo = max(-1.0, c - half)
    hi = min(1.0, c + half)
    left = []
    s = half
    x = lo
    while x > -1.0:
        nx = max(-1.0, x - s)
        # absorb a sliver rather than create a badly proportioned last piece
        if nx - (-1.0) < 0.25 * s:
            nx = -1.0
        left.append(nx)
        x = nx
        s *= 2.0
    right = []
    s = half
    x = hi
    while x < 1.0:
        nx = min(1.0, x + s)
        if 1.0 - nx < 0.25 * s:
            nx = 1.0
        right.append(nx)
        x = nx
        s *= 2.0
    nb = len(left) + len(right) + 2
    out = np.empty(nb)
    k = 0
    for i in range(len(left) - 1, -1, -1):
        out[k] = left[i]
        k += 1
    out[k] = lo
    k += 1
    out[k] = hi
    k += 1
    for i in range(len(right)):
        out[k] = right[i]
        k += 1
    return out


def _graded_breaks_np(c: float, d: float) -> np.ndarray:
    half = 0.5 * d
    lo, hi = max(-1.0, c - half), min(1.0, c + half)
    left, s, x = [], half, lo
    while x > -1.0:
        nx = max(-1.0, x - s)
        if nx + 1.0 < 0.25 * s:
            nx = -1.0
        left.append(nx)
        x, s = nx, 2 * s
    right, s, x = [], half, hi
    while x < 1.0:
        nx = min(1.0, x + s)
        if 1.0 - nx < 0.25 * s:
            nx = 1.0
        right.append(nx)
        x, s = nx, 2 * s
    return np.array(left[::-1] + [lo, hi] + right)


@njit
def _near_weights_one(z0, nodes, lam, sx, sw, WL, WC, WH):
    p = nodes.shape[0]
    c = min(1.0, max(-1.0, z0.real))
    d = abs(z0 - c)
    br = _graded_breaks(c, d)
    for j in range(p):
        WL[j] = 0.0
        WC[j] = 0.0
        WH[j] = 0.0
    basis = np.empty(p)
    for q in range(br.shape[0] - 1):
        a = br[q]
        b = br[q + 1]
        if b <= a:
            continue
        hm = 0.5 * (b - a)
        cm = 0.5 * (b + a)
        for m in range(sx.shape[0]):
            u = cm + hm * sx[m]
            wq = hm * sw[m]
            hit = -1
            tot = 0.0
            for j in range(p):
                du = u - nodes[j]
                if du == 0.0:
                    hit = j
                    break
                basis[j] = lam[j] / du
                tot += basis[j]
            if hit >= 0:
                for j in range(p):
                    basis[j] = 0.0
                basis[hit] = 1.0
            else:
                for j in range(p):
                    basis[j] /= tot
            diff = z0 - u
            lg = np.log(abs(diff))
            inv = 1.0 / diff
            inv2 = inv * inv
            for j in range(p):
                bw = basis[j] * wq
                WL[j] += bw * lg
                WC[j] += bw * inv
                WH[j] += bw * inv2


@njit
def _near_weights_batch_numba(z0s, nodes, lam, sx, sw):
    m = z0s.shape[0]
    p = nodes.shape[0]
    WL = np.empty((m, p))
    WC = np.empty((m, p), dtype=np.complex128)
    WH = np.empty((m, p), dtype=np.complex128)
    for i in range(m):
        _near_weights_one(z0s[i], nodes, lam, sx, sw, WL[i], WC[i], WH[i])
    return WL, WC, WH


def _near_weights_batch_numpy(z0s, nodes, lam, sx, sw):
    m, p = z0s.shape[0], nodes.shape[0]
    WL = np.empty((m, p))
    WC = np.empty((m, p), dtype=complex)
    WH = np.empty((m, p), dtype=complex)
    for i, z0 in enumerate(z0s):
        c = min(1.0, max(-1.0, z0.real))
        br = _graded_breaks_np(c, abs(z0 - c))
        a, b = br[:-1], br[1:]
        keep = b > a
        a, b = a[keep], b[keep]
        hm = 0.5 * (b - a)
        u = (0.5 * (a + b))[:, None] + hm[:, None] * sx[None, :]
        wq = (hm[:, None] * sw[None, :]).ravel()
        u = u.ravel()
        diff = u[:, None] - nodes[None, :]
        hit = diff == 0
        terms = lam / np.where(hit, 1.0, diff)
        basis = terms / terms.sum(axis=1, keepdims=True)
        rows = hit.any(axis=1)
        if rows.any():
            basis[rows] = hit[rows]
        bw = basis * wq[:, None]
        dz = z0 - u
        WL[i] = np.log(np.abs(dz)) @ bw
        WC[i] = (1.0 / dz) @ bw
        WH[i] = (1.0 / dz**2) @ bw
    return WL, WC, WH


def near_weights(z0s, p: int):
    """Product-integration weights for each z0 in ``z0s``.

    Returns (WL, WC, WH) of shapes (m, p): log (real), Cauchy and
    hypersingular (complex) weights against the Lagrange basis.
    """
    z0s = np.ascontiguousarray(np.atleast_1d(z0s), dtype=np.complex128)
    nodes, _ = gauss_legendre(p)
    lam = barycentric_weights(p)
    args = (z0s, np.ascontiguousarray(nodes), np.ascontiguousarray(lam), _SUB_X, _SUB_W)
    if USE_NUMBA:
        return _near_weights_batch_numba(*args)
    return _near_weights_batch_numpy(*args)


# ---------------------------------------------------------------------------
# preimage of a point under a panel's polynomial parametrization
# ---------------------------------------------------------------------------

@njit
def _legendre_eval(coef, z):
    """Value and derivative of sum_n coef[n] P_n(z) at complex z."""
    p0 = 1.0 + 0.0j
    d0 = 0.0 + 0.0j
    val = coef[0] * p0
    der = 0.0j
    if coef.shape[0] == 1:
        return val, der
    p1 = z
    d1 = 1.0 + 0.0j
    val += coef[1] * p1
    der += coef[1] * d1
    for n in range(1, coef.shape[0] - 1):
        p2 = ((2 * n + 1) * z * p1 - n * p0) / (n + 1)
        d2 = d0 + (2 * n + 1) * p1
        val += coef[n + 1] * p2
        der += coef[n + 1] * d2
        p0, p1 = p1, p2
        d0, d1 = d1, d2
    return val, der


@njit
def _preimage_batch(targets, panels, coefs, tol, maxit):
    m = targets.shape[0]
    out = np.empty(m, dtype=np.complex128)
    ok = np.zeros(m, dtype=np.bool_)
    for i in range(m):
        coef = coefs[panels[i]]
        x = targets[i]
        e0, _ = _legendre_eval(coef, -1.0 + 0.0j)
        e1, _ = _legendre_eval(coef, 1.0 + 0.0j)
        z = (2.0 * x - (e1 + e0)) / (e1 - e0)
        for _ in range(maxit):
            f, df = _legendre_eval(coef, z)
            if df == 0:
                break
            step = (f - x) / df
            z = z - step
            if abs(step) < tol * (1.0 + abs(z)):
                ok[i] = True
                break
        out[i] = z
    return out, ok


def _preimage_batch_numpy(targets, panels, coefs, tol, maxit):
    C = coefs[panels]  # (m, p)
    deg = C.shape[1]

    def ev(z):
        p0 = np.ones_like(z)
        d0 = np.zeros_like(z)
        val = C[:, 0] * p0
        der = np.zeros_like(z)
        p1, d1 = z.copy(), np.ones_like(z)
        val = val + C[:, 1] * p1
        der = der + C[:, 1] * d1
        for n in range(1, deg - 1):
            p2 = ((2 * n + 1) * z * p1 - n * p0) / (n + 1)
            d2 = d0 + (2 * n + 1) * p1
            val = val + C[:, n + 1] * p2
            der = der + C[:, n + 1] * d2
            p0, p1, d0, d1 = p1, p2, d1, d2
        return val, der

    m = targets.shape[0]
    e0, _ = ev(-np.ones(m, dtype=complex))
    e1, _ = ev(np.ones(m, dtype=complex))
    z = (2.0 * targets - (e1 + e0)) / (e1 - e0)
    ok = np.zeros(m, dtype=bool)
    for _ in range(maxit):
        f, df = ev(z)
        step = np.where(ok | (df == 0), 0.0, (f - targets) / np.where(df == 0, 1.0, df))
        z = z - step
        ok |= np.abs(step) < tol * (1.0 + np.abs(z))
        if ok.all():
            break
    return z, ok


def preimages(targets, panels, coefs, tol: float = 1e-14, maxit: int = 40):
    """Solve y_P(z) = x for complex z by Newton's method.

    ``coefs[P]`` holds the Legendre coefficients (complex positions) of panel
    P; ``targets`` are complex points, ``panels`` the panel index per target.
    Returns (z0, converged).
    """
    targets = np.ascontiguousarray(targets, dtype=np.complex128)
    panels = np.ascontiguousarray(panels, dtype=np.int64)
    coefs = np.ascontiguousarray(coefs, dtype=np.complex128)
    if len(targets) == 0:
        return np.empty(0, dtype=complex), np.empty(0, dtype=bool)
    if USE_NUMBA:
        return _preimage_batch(targets, panels, coefs, tol, maxit)
    return _preimage_batch_numpy(targets, panels, coefs, tol, maxit)


@lru_cache(maxsize=8)
def differentiation_matrix(p: int) -> np.ndarray:
    """D[a, b] = l_b'(u_a): differentiates the panel interpolant at the nodes."""
    x, _ = gauss_legendre(p)
    lam = barycentric_weights(p)
    D = np.zeros((p, p))
    for a in range(p):
        for b in range(p):
            if a != b:
                D[a, b] = (lam[b] / lam[a]) / (x[a] - x[b])
        D[a, a] = -D[a].sum()
    D.setflags(write=False)
    return D
