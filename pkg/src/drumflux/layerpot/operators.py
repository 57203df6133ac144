"""Nystrom matrices for Helmholtz layer potentials on panelized curves."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import specfun
from . import kernels as kr
from .nearfield import NearField, find_near


class LayerPotentialError(ValueError):
    pass


@dataclass(frozen=True)
class NystromMatrix:
    """Dense matrix acting on node values of a boundary density."""

    matrix: np.ndarray
    k: float
    tag: str
    curve: object

    def __matmul__(self, other):
        return self.matrix @ other

    @property
    def shape(self):
        return self.matrix.shape


def _check_k(k: float) -> float:
    k = float(k)
    if not np.isfinite(k) or k <= 0:
        raise LayerPotentialError(f"wavenumber must be positive, got {k}")
    return k


def nearfield(curve) -> NearField:
    nf = curve._cache.get("nearfield")
    if nf is None:
        nf = find_near(curve, curve.x, exclude_self=True)
        curve._cache["nearfield"] = nf
    return nf


def bessel_tables(curve, k: float):
    """(J0, Y0, J1, Y1) of k|x_i - x_j| for all node pairs; the most recent
    wavenumber is cached on the curve."""
    key = curve._cache.get("bessel_k")
    if key == k:
        return curve._cache["bessel"]
    curve._cache.pop("bessel", None)
    tabs = specfun.bessel_table(k * curve.pairwise_distance())
    curve._cache["bessel_k"] = k
    curve._cache["bessel"] = tabs
    return tabs


def _assemble(kind, curve, k, field=None, rows=None, col_panels=None):
    k = _check_k(k)
    return kr.assemble_block(kind, k, curve, nearfield(curve), bessel_tables(curve, k),
                             rows=rows, col_panels=col_panels, field=field)


def assemble_single_layer(curve, k: float) -> NystromMatrix:
    return NystromMatrix(_assemble(kr.S, curve, k), k, "S", curve)


def assemble_sprime(curve, k: float) -> NystromMatrix:
    """Matrix of S'_k: (S'_k sigma)(x_i) ~ sum_j A_ij sigma_j."""
    return NystromMatrix(_assemble(kr.SP, curve, k), k, "S'", curve)


def assemble_dk_sprime(curve, k: float) -> NystromMatrix:
    """Matrix of the wavenumber derivative of S'_k."""
    return NystromMatrix(_assemble(kr.DK, curve, k), k, "dk S'", curve)


def assemble_delta_sprime_normal(curve, k: float, field) -> NystromMatrix:
    """Shape derivative of S'_k under the normal field V = nu n.

    Uses the combined kernel nu_t n_t.H n_t - nu_s n_t.H n_s - nu'_t tau_t.grad G
    + kappa_s nu_s n_t.grad G, whose 1/r singularities cancel.
    """
    if field.nu is None:
        raise LayerPotentialError("normal-field assembly needs nu and dnu")
    return NystromMatrix(_assemble(kr.DN, curve, k, field), k, "delta S' normal", curve)


def assemble_delta_sprime_general(curve, k: float, field) -> NystromMatrix:
    """Shape derivative of S'_k under a general velocity field V."""
    return NystromMatrix(_assemble(kr.DG, curve, k, field), k, "delta S' general", curve)


def apply_delta_sprime(curve, k: float, field, sigma: np.ndarray, normal: bool = False) -> np.ndarray:
    """(delta S'_k) sigma, touching only rows/columns where the field lives.

    Kernel entries vanish unless the target or the source lies on a panel
    where V is nonzero, so only those two blocks are assembled.
    """
    kind = kr.DN if normal else kr.DG
    supp = field.support_panels()
    out = np.zeros(curve.n, dtype=complex)
    if supp.size == 0:
        return out
    p = curve.p
    supp_nodes = (supp[:, None] * p + np.arange(p)[None, :]).ravel()
    block = _assemble(kind, curve, k, field, rows=supp_nodes)
    out[supp_nodes] = block @ sigma
    others = np.setdiff1d(np.arange(curve.n), supp_nodes)
    if others.size:
        block = _assemble(kind, curve, k, field, rows=others, col_panels=supp)
        out[others] = block @ sigma[supp_nodes]
    return out


def eval_single_layer(curve, k: float, sigma: np.ndarray, targets, return_flags: bool = False):
    """Single-layer potential S_k[sigma] at interior points.

    Targets close to the boundary are integrated with the panel's log
    product rule. The returned flags mark targets closer than one panel
    length to the curve, where accuracy degrades as the distance shrinks.
    """
    k = _check_k(k)
    targets = np.atleast_1d(np.asarray(targets, dtype=complex))
    sigma = np.asarray(sigma)
    a = targets[:, None] - curve.x[None, :]
    rho = np.abs(a)
    if np.any(rho == 0):
        raise LayerPotentialError("target coincides with a boundary node")
    z = k * rho
    G = 0.25j * (specfun.sp.j0(z) + 1j * specfun.sp.y0(z))
    vals = G @ (curve.w * sigma)
    nf = find_near(curve, targets, exclude_self=False)
    if nf.count:
        p = curve.p
        J = nf.panel[:, None] * p + np.arange(p)[None, :]
        aa = targets[nf.target][:, None] - curve.x[J]
        rr = np.abs(aa)
        zz = k * rr
        K = 0.25j * (specfun.sp.j0(zz) + 1j * specfun.sp.y0(zz))
        L = -kr.INV2PI * specfun.sp.j0(zz)
        w, spd = curve.w[J], curve.speed[J]
        M = K - L * np.log(rr)
        corr = w * M + L * (spd * nf.WL + w * np.log(np.abs(nf.DD)))
        naive = w * K
        delta = ((corr - naive) * sigma[J]).sum(axis=1)
        np.add.at(vals, nf.target, delta)
    flags = np.zeros(targets.size, dtype=bool)
    dmin = rho.reshape(targets.size, curve.npanels, curve.p).min(axis=2)
    flags = (dmin < curve.panel_length[None, :]).any(axis=1)
    if flags.any() and not return_flags:
        warnings.warn("some targets are within one panel length of the boundary", stacklevel=2)
    return (vals, flags) if return_flags else vals
