"""Detection of nearly singular target/panel pairs and their product weights."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quadrature import bernstein_radius, gauss_legendre, near_weights, preimages

# a panel is treated with product integration when the target lies inside
# this Bernstein ellipse of the panel's parametrization
BERNSTEIN_CUTOFF = 3.5
# prefilter: distance from the panel midpoint relative to panel length
CANDIDATE_RADIUS = 1.3


@dataclass
class NearField:
    target: np.ndarray  # target index (node index or external point index)
    panel: np.ndarray
    z0: np.ndarray
    WL: np.ndarray
    WC: np.ndarray
    WH: np.ndarray
    DD: np.ndarray  # (x - y_j) / (z0 - u_j)

    @property
    def count(self) -> int:
        return int(self.target.shape[0])


def empty_nearfield(p: int) -> NearField:
    z = np.zeros((0, p))
    return NearField(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, complex),
                     z, z.astype(complex), z.astype(complex), z.astype(complex))


def find_near(curve, targets, exclude_self: bool = True,
              cutoff: float = BERNSTEIN_CUTOFF) -> NearField:
    """Near-pair structure for complex ``targets`` against the curve's panels.

    For on-curve targets (``targets is curve.x``) the panel containing the
    target is excluded; it is handled by the self-panel rule.
    """
    p = curve.p
    targets = np.asarray(targets, dtype=complex)
    xp = curve.x.reshape(curve.npanels, p)
    center = xp.mean(axis=1)
    radius = CANDIDATE_RADIUS * curve.panel_length
    dist = np.abs(targets[:, None] - center[None, :])
    cand = dist < radius[None, :]
    if exclude_self:
        own = np.arange(targets.size) // p
        cand[np.arange(targets.size), own] = False
    ti, pi = np.nonzero(cand)
    if ti.size == 0:
        return empty_nearfield(p)
    coefs = curve.legendre_coefficients()
    z0, ok = preimages(targets[ti], pi, coefs)
    rb = np.where(ok, bernstein_radius(z0), np.inf)
    keep = rb < cutoff
    ti, pi, z0 = ti[keep], pi[keep], z0[keep]
    if ti.size == 0:
        return empty_nearfield(p)
    WL, WC, WH = near_weights(z0, p)
    glx, _ = gauss_legendre(p)
    yj = xp[pi]
    DD = (targets[ti][:, None] - yj) / (z0[:, None] - glx[None, :])
    order = np.lexsort((pi, ti))
    return NearField(ti[order].astype(np.int64), pi[order].astype(np.int64), z0[order],
                     np.ascontiguousarray(WL[order]), np.ascontiguousarray(WC[order]),
                     np.ascontiguousarray(WH[order]), np.ascontiguousarray(DD[order]))
