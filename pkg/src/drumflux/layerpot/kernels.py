"""Pointwise Helmholtz kernels and their singularity splits, plus block
assembly of Nystrom matrices with local corrections.

Every kernel K(x, y) handled here has the form

    K = L log|x - y| + Re(C / a) + Re(H / a**2) + (smooth),   a = x - y,

with complex numbers encoding plane vectors. ``kernel_parts`` returns
(K, L, C, H) for one kernel kind. The same formula code runs elementwise
under numpy broadcasting and, compiled, inside the numba loops.

Kinds:

* ``S``   single layer, (i/4) H0(k rho)
* ``SP``  normal derivative at the target, n_x . grad_x G
* ``DK``  wavenumber derivative of SP
* ``DG``  shape derivative of SP under a general velocity field V
* ``DN``  shape derivative of SP under a normal field nu n
"""
from __future__ import annotations

import math

import numpy as np

from .._accel import USE_NUMBA, njit

S, SP, DK, DG, DN = 0, 1, 2, 3, 4
KIND_NAMES = {S: "S", SP: "S'", DK: "dk S'", DG: "delta S' (general)", DN: "delta S' (normal)"}

INV2PI = 1.0 / (2.0 * math.pi)
EULER_GAMMA = 0.57721566490153286061


def _dot(a, b):
    return a.real * b.real + a.imag * b.imag


def _kernel_parts(kind, k, a, rho, j0, y0, j1, y1,
                  nt, tt, ft1, ft2, ft3, ft4, fs1, fs3, ns, ks):
    """Kernel value and split coefficients for target t and source s.

    Field arguments by kind: DG uses ft1/fs1 = V, ft2 = dV/ds at t,
    ft3/fs3 = tau . dV/ds; DN uses ft3/fs3 = nu, ft4 = dnu/ds at t.
    """
    rhat = a / rho
    z = k * rho
    h0 = j0 + 1j * y0
    h1 = j1 + 1j * y1
    gp = -0.25j * k * h1
    php = k * INV2PI * j1
    zero = 0.0 * nt
    if kind == S:
        return 0.25j * h0, -INV2PI * j0, zero, zero
    if kind == SP:
        nr = _dot(nt, rhat)
        return gp * nr, php * nr, -INV2PI * nt, zero
    if kind == DK:
        an = _dot(a, nt)
        return -0.25j * k * h0 * an, k * INV2PI * j0 * an, zero, zero
    gpp = -0.25j * k * k * (h0 - h1 / z)
    phpp = k * k * INV2PI * (j0 - j1 / z)
    nr = _dot(nt, rhat)
    if kind == DG:
        vr = ft1 - fs1
        c1 = -1j * ft2
        db = fs3 - ft3
        rw = _dot(rhat, vr)
        nw = _dot(nt, vr)
        cr = _dot(c1, rhat)
        K = gp * cr + gpp * nr * rw + gp / rho * (nw - nr * rw) + gp * nr * db
        L = php * cr + phpp * nr * rw + php / rho * (nw - nr * rw) + php * nr * db
        return K, L, -INV2PI * (c1 + nt * db), INV2PI * nt * vr
    # DN
    nsr = _dot(ns, rhat)
    nn = _dot(nt, ns)
    tr = _dot(tt, rhat)
    nut, dnut, nus = ft3, ft4, fs3
    K = (nut * (gpp * nr * nr + gp / rho * (1.0 - nr * nr))
         - nus * (gpp * nr * nsr + gp / rho * (nn - nr * nsr))
         - dnut * gp * tr + ks * nus * gp * nr)
    L = (nut * (phpp * nr * nr + php / rho * (1.0 - nr * nr))
         - nus * (phpp * nr * nsr + php / rho * (nn - nr * nsr))
         - dnut * php * tr + ks * nus * php * nr)
    C = INV2PI * (dnut * tt - ks * nus * nt)
    H = INV2PI * (nut * nt * nt - nus * nt * ns)
    return K, L, C, H


kernel_parts = _kernel_parts
_dot_nb = njit(_dot)
if USE_NUMBA:
    import numba

    _dot = _dot_nb
    _kernel_parts_nb = numba.njit(cache=True)(_kernel_parts)
else:
    _kernel_parts_nb = _kernel_parts


def diagonal_limit(kind: int, k: float, kappa):
    """Analytic limit of K - L log rho on the diagonal (kinds S, SP, DK)."""
    if kind == S:
        return 0.25j - INV2PI * (math.log(k / 2.0) + EULER_GAMMA) + 0.0 * kappa
    if kind == SP:
        return -kappa / (4.0 * math.pi) + 0j
    if kind == DK:
        return 0.0 * kappa + 0j
    raise ValueError("no closed-form diagonal for shape-derivative kernels")


# ---------------------------------------------------------------------------
# geometry / field packing
# ---------------------------------------------------------------------------

class NodeData:
    """Flat arrays describing curve nodes and an optional deformation field."""

    __slots__ = ("x", "n", "t", "kap", "w", "sp", "f1", "f2", "f3", "f4")

    def __init__(self, curve, field=None, kind=SP):
        n = curve.n
        self.x = curve.x
        self.n = curve.normal
        self.t = curve.tau
        self.kap = curve.kappa
        self.w = curve.w
        self.sp = curve.speed
        self.f1 = np.zeros(n, dtype=complex)
        self.f2 = np.zeros(n, dtype=complex)
        self.f3 = np.zeros(n)
        self.f4 = np.zeros(n)
        if kind == DG:
            self.f1 = np.ascontiguousarray(field.V, dtype=complex)
            self.f2 = np.ascontiguousarray(field.dV, dtype=complex)
            self.f3 = np.ascontiguousarray(field.stretch, dtype=float)
        elif kind == DN:
            self.f3 = np.ascontiguousarray(field.nu, dtype=float)
            self.f4 = np.ascontiguousarray(field.dnu, dtype=float)


# ---------------------------------------------------------------------------
# numba block assembly
# ---------------------------------------------------------------------------

@njit
def _far_block_nb(kind, k, rows, cols, X, N, T, F1, F2, F3, F4, KAP, W, J0, Y0, J1, Y1, out):
    for r in range(rows.shape[0]):
        i = rows[r]
        xi = X[i]
        for c in range(cols.shape[0]):
            j = cols[c]
            if i == j:
                out[r, c] = 0.0
                continue
            a = xi - X[j]
            rho = abs(a)
            K, L, C, H = _kernel_parts_nb(kind, k, a, rho, J0[i, j], Y0[i, j], J1[i, j], Y1[i, j],
                                          N[i], T[i], F1[i], F2[i], F3[i], F4[i],
                                          F1[j], F3[j], N[j], KAP[j])
            out[r, c] = K * W[j]


@njit
def _self_block_nb(kind, k, p, rows, row_pos, col_pos, X, N, T, F1, F2, F3, F4, KAP, W, SPD, GLW,
                   J0, Y0, J1, Y1, WLS, E, glx, diag_vals, out):
    for r in range(rows.shape[0]):
        i = rows[r]
        q = i // p
        a_loc = i - q * p
        base = q * p
        if col_pos[base] < 0:
            continue
        # remainder values for diagonal interpolation
        Mrow = np.zeros(p, dtype=np.complex128)
        for b in range(p):
            j = base + b
            if j == i:
                continue
            a = X[i] - X[j]
            rho = abs(a)
            K, L, C, H = _kernel_parts_nb(kind, k, a, rho, J0[i, j], Y0[i, j], J1[i, j], Y1[i, j],
                                          N[i], T[i], F1[i], F2[i], F3[i], F4[i],
                                          F1[j], F3[j], N[j], KAP[j])
            Mrow[b] = K - L * math.log(rho)
            out[r, col_pos[j]] = W[j] * K + L * SPD[j] * (WLS[a_loc, b] - GLW[b] * math.log(abs(glx[a_loc] - glx[b])))
        if kind == DG or kind == DN:
            md = 0.0j
            for b in range(p):
                md += E[a_loc, b] * Mrow[b]
        else:
            md = diag_vals[i]
        out[r, col_pos[i]] = W[i] * md


@njit
def _near_block_nb(kind, k, p, nt_idx, np_idx, WL, WC, WH, DD, row_pos, col_pos,
                   X, N, T, F1, F2, F3, F4, KAP, W, SPD, J0, Y0, J1, Y1, out):
    for m in range(nt_idx.shape[0]):
        i = nt_idx[m]
        r = row_pos[i]
        if r < 0:
            continue
        base = np_idx[m] * p
        if col_pos[base] < 0:
            continue
        for b in range(p):
            j = base + b
            a = X[i] - X[j]
            rho = abs(a)
            K, L, C, H = _kernel_parts_nb(kind, k, a, rho, J0[i, j], Y0[i, j], J1[i, j], Y1[i, j],
                                          N[i], T[i], F1[i], F2[i], F3[i], F4[i],
                                          F1[j], F3[j], N[j], KAP[j])
            inva = 1.0 / a
            M = K - L * math.log(rho) - (C * inva).real - (H * inva * inva).real
            dd = DD[m, b]
            val = W[j] * M + L * (SPD[j] * WL[m, b] + W[j] * math.log(abs(dd)))
            val += (C * SPD[j] * WC[m, b] / dd).real + (H * SPD[j] * WH[m, b] / (dd * dd)).real
            out[r, col_pos[j]] = val


# ---------------------------------------------------------------------------
# numpy block assembly
# ---------------------------------------------------------------------------

def _parts_np(kind, k, nd, I, J, tables):
    J0, Y0, J1, Y1 = tables
    a = nd.x[I] - nd.x[J]
    rho = np.abs(a)
    return a, rho, _kernel_parts(kind, k, a, rho, J0[I, J], Y0[I, J], J1[I, J], Y1[I, J],
                                 nd.n[I], nd.t[I], nd.f1[I], nd.f2[I], nd.f3[I], nd.f4[I],
                                 nd.f1[J], nd.f3[J], nd.n[J], nd.kap[J])


def _far_block_np(kind, k, rows, cols, nd, tables, out):
    I = rows[:, None]
    J = cols[None, :]
    same = I == J
    Jsafe = np.where(same, (J + 1) % nd.x.shape[0], J)  # avoid rho = 0
    _, _, (K, _, _, _) = _parts_np(kind, k, nd, I, Jsafe, tables)
    out[:] = np.where(same, 0.0, K * nd.w[J])


def _self_block_np(kind, k, p, rows, col_pos, nd, glw_all, tables, WLS, E, glx, diag_vals, out):
    q = rows // p
    base = q * p
    keep = col_pos[base] >= 0
    rows, base = rows[keep], base[keep]
    if rows.size == 0:
        return
    rr = np.nonzero(keep)[0]
    a_loc = rows - base
    J = base[:, None] + np.arange(p)[None, :]
    I = np.broadcast_to(rows[:, None], J.shape)
    same = I == J
    Jsafe = np.where(same, np.where(J + 1 < base[:, None] + p, J + 1, J - 1), J)
    _, rho, (K, L, _, _) = _parts_np(kind, k, nd, I, Jsafe, tables)
    du = np.abs(glx[a_loc][:, None] - glx[None, :])
    logdu = np.log(np.where(same, 1.0, du))
    vals = nd.w[J] * K + L * nd.sp[J] * (WLS[a_loc] - glw_all[None, :] * logdu)
    M = K - L * np.log(rho)
    if kind in (DG, DN):
        md = np.sum(E[a_loc] * np.where(same, 0.0, M), axis=1)
    else:
        md = diag_vals[rows]
    vals = np.where(same, (nd.w[rows] * md)[:, None], vals)
    out[rr[:, None], col_pos[J]] = vals


def _near_block_np(kind, k, p, nt_idx, np_idx, WL, WC, WH, DD, row_pos, col_pos, nd, tables, out):
    r = row_pos[nt_idx]
    base = np_idx * p
    keep = (r >= 0) & (col_pos[base] >= 0)
    if not keep.any():
        return
    nt_idx, base, r = nt_idx[keep], base[keep], r[keep]
    WL, WC, WH, DD = WL[keep], WC[keep], WH[keep], DD[keep]
    J = base[:, None] + np.arange(p)[None, :]
    I = np.broadcast_to(nt_idx[:, None], J.shape)
    a, rho, (K, L, C, H) = _parts_np(kind, k, nd, I, J, tables)
    inva = 1.0 / a
    M = K - L * np.log(rho) - (C * inva).real - (H * inva * inva).real
    spd, w = nd.sp[J], nd.w[J]
    val = w * M + L * (spd * WL + w * np.log(np.abs(DD)))
    val = val + (C * spd * WC / DD).real + (H * spd * WH / (DD * DD)).real
    out[r[:, None], col_pos[J]] = val


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def assemble_block(kind, k, curve, near, tables, rows=None, col_panels=None, field=None):
    """Nystrom block for target nodes ``rows`` and source panels ``col_panels``.

    Column order follows the node order of the listed panels. Entries are
    matrix coefficients acting on node values (quadrature weights included).
    """
    from .quadrature import gauss_legendre, leave_one_out_table, self_log_table

    n, p = curve.n, curve.p
    rows = np.arange(n) if rows is None else np.asarray(rows, dtype=np.int64)
    if col_panels is None:
        cols = np.arange(n)
    else:
        col_panels = np.asarray(col_panels, dtype=np.int64)
        cols = (col_panels[:, None] * p + np.arange(p)[None, :]).ravel()
    row_pos = np.full(n, -1, dtype=np.int64)
    row_pos[rows] = np.arange(rows.size)
    col_pos = np.full(n, -1, dtype=np.int64)
    col_pos[cols] = np.arange(cols.size)
    nd = NodeData(curve, field, kind)
    glx, glw = gauss_legendre(p)
    WLS = self_log_table(p)
    E = leave_one_out_table(p)
    if kind in (S, SP, DK):
        diag_vals = np.asarray(diagonal_limit(kind, k, curve.kappa), dtype=complex)
        if kind == S:
            # log coefficient -1/(2 pi) survives on the diagonal: add its
            # product-rule weight and the log of the local speed
            a_loc = np.arange(n) % p
            diag_vals = diag_vals - INV2PI * (np.log(curve.speed) + np.diag(WLS)[a_loc] / glw[a_loc])
    else:
        diag_vals = np.zeros(n, dtype=complex)
    out = np.empty((rows.size, cols.size), dtype=complex)
    J0, Y0, J1, Y1 = tables
    if USE_NUMBA:
        geo = (nd.x, nd.n, nd.t, nd.f1, nd.f2, nd.f3, nd.f4, nd.kap, nd.w)
        _far_block_nb(kind, k, rows, cols, *geo, J0, Y0, J1, Y1, out)
        _self_block_nb(kind, k, p, rows, row_pos, col_pos, *geo, nd.sp, np.ascontiguousarray(glw),
                       J0, Y0, J1, Y1, np.ascontiguousarray(WLS), np.ascontiguousarray(E),
                       np.ascontiguousarray(glx), diag_vals, out)
        if near.count:
            _near_block_nb(kind, k, p, near.target, near.panel, near.WL, near.WC, near.WH, near.DD,
                           row_pos, col_pos, *geo, nd.sp, J0, Y0, J1, Y1, out)
    else:
        _far_block_np(kind, k, rows, cols, nd, tables, out)
        _self_block_np(kind, k, p, rows, col_pos, nd, np.asarray(glw), tables, np.asarray(WLS),
                       np.asarray(E), np.asarray(glx), diag_vals, out)
        if near.count:
            _near_block_np(kind, k, p, near.target, near.panel, near.WL, near.WC, near.WH, near.DD,
                           row_pos, col_pos, nd, tables, out)
    return out
