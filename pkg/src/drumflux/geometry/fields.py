"""Boundary velocity fields V = alpha n + beta tau on a panelized curve."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class DeformationField:
    """Velocity V at the nodes (complex) and its arclength derivative dV/ds.

    ``nu``/``dnu`` are set for purely normal fields (V = nu n); they feed the
    normal-only shape-derivative kernel.
    """

    V: np.ndarray
    dV: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    kappa: np.ndarray
    p: int
    nu: Optional[np.ndarray] = None
    dnu: Optional[np.ndarray] = None

    @property
    def alpha(self) -> np.ndarray:
        """Normal component V . n."""
        return _dot(self.V, self.normal)

    @property
    def beta(self) -> np.ndarray:
        """Tangential component V . tau."""
        return _dot(self.V, self.tangent)

    @property
    def stretch(self) -> np.ndarray:
        """tau . dV/ds, the relative rate of change of the speed."""
        return _dot(self.dV, self.tangent)

    @property
    def dalpha(self) -> np.ndarray:
        # dn/ds = kappa tau
        return _dot(self.dV, self.normal) + self.kappa * self.beta

    @property
    def dbeta(self) -> np.ndarray:
        # dtau/ds = -kappa n
        return _dot(self.dV, self.tangent) - self.kappa * self.alpha

    @property
    def rotated_dV(self) -> np.ndarray:
        """R dV/ds with R the clockwise quarter turn."""
        return -1j * self.dV

    def support_panels(self) -> np.ndarray:
        nz = (np.abs(self.V) > 0) | (np.abs(self.dV) > 0)
        return np.nonzero(nz.reshape(-1, self.p).any(axis=1))[0]

    def scaled(self, c: float) -> "DeformationField":
        return DeformationField(c * self.V, c * self.dV, self.normal, self.tangent, self.kappa, self.p,
                                None if self.nu is None else c * self.nu,
                                None if self.dnu is None else c * self.dnu)

    def __add__(self, other: "DeformationField") -> "DeformationField":
        nu = dnu = None
        if self.nu is not None and other.nu is not None:
            nu, dnu = self.nu + other.nu, self.dnu + other.dnu
        return DeformationField(self.V + other.V, self.dV + other.dV, self.normal, self.tangent,
                                self.kappa, self.p, nu, dnu)


def _dot(a, b):
    return a.real * b.real + a.imag * b.imag


def normal_field(curve, nu, dnu) -> DeformationField:
    """V = nu n with dnu = d(nu)/ds; dV/ds = dnu n + nu kappa tau."""
    nu = np.asarray(nu, dtype=float)
    dnu = np.asarray(dnu, dtype=float)
    V = nu * curve.normal
    dV = dnu * curve.normal + nu * curve.kappa * curve.tau
    return DeformationField(V, dV, curve.normal, curve.tau, curve.kappa, curve.p, nu, dnu)


def general_field(curve, V, dV_du) -> DeformationField:
    """Field from node values V and derivative with respect to the panel parameter."""
    V = np.asarray(V, dtype=complex)
    dV = np.asarray(dV_du, dtype=complex) / curve.speed
    return DeformationField(V, dV, curve.normal, curve.tau, curve.kappa, curve.p)


def zero_field(curve) -> DeformationField:
    z = np.zeros(curve.n, dtype=complex)
    return DeformationField(z, z.copy(), curve.normal, curve.tau, curve.kappa, curve.p,
                            np.zeros(curve.n), np.zeros(curve.n))


def tangential_field(curve, beta, dbeta) -> DeformationField:
    """V = beta tau with dbeta = d(beta)/ds; dV/ds = dbeta tau - beta kappa n."""
    beta = np.asarray(beta, dtype=float)
    V = beta * curve.tau
    dV = np.asarray(dbeta) * curve.tau - beta * curve.kappa * curve.normal
    return DeformationField(V, dV, curve.normal, curve.tau, curve.kappa, curve.p)


def panel_derivative(curve, f) -> np.ndarray:
    """Arclength derivative of a node function by differentiating each panel's
    interpolant (spectral within a panel)."""
    from ..layerpot.quadrature import differentiation_matrix

    D = differentiation_matrix(curve.p)
    fp = np.asarray(f).reshape(curve.npanels, curve.p) @ D.T
    return fp.ravel() / curve.speed
