"""Shape derivatives of k, sigma, the Rellich norm and F, and the gradient of
the discretized objective with respect to polar vertex radii.

All derivatives are Lagrangian: they follow the boundary nodes as the curve
moves with the velocity field V. Two routes exist for delta S'. The normal
route (V = nu n) and the general route (arbitrary V) are assembled by
separate kernels and must agree when both apply.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .eigensolve import EigenResult, EigenError, objective
from .geometry.fields import DeformationField
from .layerpot.operators import (NystromMatrix, apply_delta_sprime, assemble_delta_sprime_general,
                                 assemble_delta_sprime_normal, assemble_dk_sprime)


class DegeneracyError(EigenError):
    pass


@dataclass
class ShapeDerivative:
    dk: float
    dsigma: np.ndarray  # complex, gauge <sigma, dsigma> = 0
    dN: float
    dF: float
    field: DeformationField = field(repr=False)


@dataclass
class RadialGradient:
    grad: np.ndarray
    F: float
    k1: float
    eig: EigenResult = field(repr=False)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.grad))


def inner(curve, f, g) -> complex:
    """Boundary quadrature inner product sum w f g (no conjugation)."""
    return complex(np.sum(curve.w * f * g))


class ShapeContext:
    """Quantities shared by all deformations of one eigen-solve: the wavenumber
    derivative applied to sigma and a factorization of the augmented operator
    (1/2 I - S'_k) + mu <sigma, .>."""

    def __init__(self, eig: EigenResult):
        self.eig = eig
        c = eig.curve
        self.curve = c
        self.sigma = eig.sigma_c
        self.mu = eig.mu_c
        self.dkS_sigma = assemble_dk_sprime(c, eig.k1).matrix @ self.sigma
        self.denom = inner(c, self.mu, self.dkS_sigma)
        scale = math.sqrt(np.sum(c.w * np.abs(self.mu) ** 2) * np.sum(c.w * np.abs(self.sigma) ** 2))
        if abs(self.denom) < 1e-10 * scale:
            raise DegeneracyError("<mu, dk S' sigma> vanishes; eigenvalue not simple")
        from .eigensolve import bie_matrix
        A = bie_matrix(c, eig.k1)
        A += np.outer(self.mu, c.w * self.sigma)
        self.lu = sla.lu_factor(A, check_finite=False)
        # cheap conditioning estimate from the factor's diagonal
        d = np.abs(np.diag(self.lu[0]))
        if d.min() < 1e-12 * d.max():
            raise DegeneracyError("augmented operator is ill-conditioned")

    # -- individual pieces -------------------------------------------------

    def delta_k_from(self, dS_sigma: np.ndarray) -> float:
        val = -inner(self.curve, self.mu, dS_sigma) / self.denom
        return float(val.real)

    def delta_sigma_from(self, dS_sigma: np.ndarray, dk: float) -> np.ndarray:
        rhs = dS_sigma + dk * self.dkS_sigma
        return sla.lu_solve(self.lu, rhs, check_finite=False)

    def delta_N_from(self, dsigma: np.ndarray, dk: float, V: DeformationField, normal: bool = False) -> float:
        return delta_N(self.eig, dsigma, dk, V, normal)

    def delta_F_from(self, dsigma: np.ndarray, dk: float, dN: float) -> float:
        return delta_F(self.eig, dsigma, dk, dN)

    # -- full derivative ---------------------------------------------------

    def derivative(self, V: DeformationField, normal: bool = False) -> ShapeDerivative:
        """All four shape derivatives for the field V. ``normal=True`` uses
        the normal-field kernel and formulas (V must carry nu, dnu)."""
        dS_sigma = apply_delta_sprime(self.curve, self.eig.k1, V, self.sigma, normal=normal)
        dk = self.delta_k_from(dS_sigma)
        dsig = self.delta_sigma_from(dS_sigma, dk)
        dN = self.delta_N_from(dsig, dk, V, normal)
        dF = self.delta_F_from(dsig, dk, dN)
        return ShapeDerivative(dk, dsig, dN, dF, V)


# ---------------------------------------------------------------------------
# matrix-level interface
# ---------------------------------------------------------------------------

def delta_sprime(eig: EigenResult, V: DeformationField, normal: bool = False) -> NystromMatrix:
    if normal:
        return assemble_delta_sprime_normal(eig.curve, eig.k1, V)
    return assemble_delta_sprime_general(eig.curve, eig.k1, V)


def delta_k(eig: EigenResult, dS: NystromMatrix, dkS: NystromMatrix) -> float:
    """-<mu, dS sigma> / <mu, dk S' sigma>, real part."""
    c = eig.curve
    num = inner(c, eig.mu_c, dS.matrix @ eig.sigma_c)
    den = inner(c, eig.mu_c, dkS.matrix @ eig.sigma_c)
    scale = math.sqrt(np.sum(c.w * np.abs(eig.mu_c) ** 2) * np.sum(c.w * np.abs(eig.sigma_c) ** 2))
    if abs(den) < 1e-10 * scale:
        raise DegeneracyError("<mu, dk S' sigma> vanishes; eigenvalue not simple")
    return float((-num / den).real)


def delta_sigma(eig: EigenResult, dS: NystromMatrix, dkS: NystromMatrix, dk: float) -> np.ndarray:
    """Solve (1/2 I - S' + mu <sigma, .>) dsigma = dS sigma + dk dkS sigma."""
    from .eigensolve import bie_matrix
    c = eig.curve
    A = bie_matrix(c, eig.k1) + np.outer(eig.mu_c, c.w * eig.sigma_c)
    if np.linalg.cond(A) > 1e12:
        raise DegeneracyError("augmented operator is ill-conditioned")
    rhs = dS.matrix @ eig.sigma_c + dk * (dkS.matrix @ eig.sigma_c)
    return np.linalg.solve(A, rhs)


def delta_N(eig: EigenResult, dsigma: np.ndarray, dk: float, V: DeformationField,
            normal: bool = False) -> float:
    """Derivative of the Rellich norm (1/2k^2) int sigma^2 (x . n) ds."""
    c, k, N = eig.curve, eig.k1, eig.N
    s = eig.sigma
    xn = np.real(np.conj(c.x) * c.normal)
    if normal:
        # V = nu n: nu - (x . tau) dnu/ds + kappa nu (x . n)
        xt = np.real(np.conj(c.x) * c.tau)
        geo = V.nu - xt * V.dnu + c.kappa * V.nu * xn
    else:
        # V . n + x . (R dV/ds)
        geo = V.alpha + np.real(np.conj(c.x) * V.rotated_dV)
    return float(-2 * dk / k * N + np.sum(c.w * s * dsigma.real * xn) / k**2
                 + np.sum(c.w * s**2 * geo) / (2 * k**2))


def delta_F(eig: EigenResult, dsigma: np.ndarray, dk: float, dN: float) -> float:
    """Quotient rule for F = sigma(x*) / (k^2 sqrt(N))."""
    k, N = eig.k1, eig.N
    s0 = eig.sigma_anchor
    ds0 = float(eig.curve.anchor_functional() @ dsigma.real)
    rN = math.sqrt(N)
    return ds0 / (k**2 * rN) - 2 * dk * s0 / (k**3 * rN) - s0 * dN / (2 * k**2 * N * rN)


def shape_derivative(eig: EigenResult, V: DeformationField, normal: bool = False) -> ShapeDerivative:
    return ShapeContext(eig).derivative(V, normal)


def hadamard_rate(eig: EigenResult, V: DeformationField) -> float:
    """-int V.n (d_n u)^2 ds for the L2-normalized mode: the predicted d(lambda)."""
    c = eig.curve
    dnu = eig.sigma / math.sqrt(eig.N)
    return float(-np.sum(c.w * V.alpha * dnu**2))


# ---------------------------------------------------------------------------
# gradient with respect to radii
# ---------------------------------------------------------------------------

def radial_gradient(curve, eig: Optional[EigenResult] = None, k_guess: Optional[float] = None,
                    return_dk: bool = False):
    """Gradient of F with respect to the polar radii r_1..r_N.

    One eigen-solve and one factorization serve all N fields. Each radial
    field is the exact (complex-step) velocity of moving vertex i along
    (cos theta_i, sin theta_i), which equals the projection of the x- and
    y-vertex fields onto that direction.
    """
    from .geometry.polygon import radial_fields

    if eig is None:
        eig = objective(curve, k_guess=k_guess)
    ctx = ShapeContext(eig)
    fields = radial_fields(curve)
    g = np.empty(len(fields))
    dks = np.empty(len(fields))
    for i, V in enumerate(fields):
        sd = ctx.derivative(V)
        g[i] = sd.dF
        dks[i] = sd.dk
    out = RadialGradient(g, eig.F, eig.k1, eig)
    return (out, dks) if return_dk else out


# ---------------------------------------------------------------------------
# finite-difference audits
# ---------------------------------------------------------------------------

@dataclass
class AuditRow:
    eps: float
    dk: float
    dsigma: float
    dN: float
    dF: float


def _gauge_matched(eig0: EigenResult, eig: EigenResult) -> np.ndarray:
    """sigma of a perturbed solve rescaled so that sum w0 sigma^2 matches the
    base solve, w0 being the base weights (nodes correspond one to one)."""
    w0 = eig0.curve.w
    s = eig.sigma
    return s * math.sqrt(np.sum(w0 * eig0.sigma**2) / np.sum(w0 * s**2))


def fd_audit(eig0: EigenResult, sd: ShapeDerivative, build, eps_list: Sequence[float]) -> list:
    """Relative errors of the shape derivatives against centered differences.

    ``build(e)`` returns the curve deformed by e V with the same panel layout.
    delta sigma and delta N are gauge-dependent; the perturbed densities are
    rescaled to the gauge <sigma, dsigma> = 0 used by the analytic route.
    """
    c0 = eig0.curve
    ref_sigma = max(math.sqrt(np.sum(c0.w * np.abs(sd.dsigma) ** 2)),
                    1e-3 * math.sqrt(np.sum(c0.w * eig0.sigma**2)))
    rows = []
    for e in eps_list:
        rp = objective(build(e), k_guess=eig0.k1, check_isolated=False)
        rm = objective(build(-e), k_guess=eig0.k1, check_isolated=False)
        sp, sm = _gauge_matched(eig0, rp), _gauge_matched(eig0, rm)
        Np = rellich_of(rp, sp)
        Nm = rellich_of(rm, sm)
        dk = (rp.k1 - rm.k1) / (2 * e)
        ds = (sp - sm) / (2 * e)
        dN = (Np - Nm) / (2 * e)
        dF = (rp.F - rm.F) / (2 * e)
        ds_err = math.sqrt(np.sum(c0.w * np.abs(ds - sd.dsigma.real) ** 2)) / ref_sigma
        rows.append(AuditRow(e, _rel(dk, sd.dk, eig0.k1), ds_err, _rel(dN, sd.dN, eig0.N), _rel(dF, sd.dF, eig0.F)))
    return rows


def rellich_of(eig: EigenResult, sigma: np.ndarray) -> float:
    c = eig.curve
    xn = np.real(np.conj(c.x) * c.normal)
    return float(np.sum(c.w * sigma**2 * xn) / (2 * eig.k1**2))


def _rel(fd, an, scale):
    """Relative error, measured against the value scale when the derivative
    itself vanishes."""
    return abs(fd - an) / max(abs(an), 1e-3 * abs(scale))
