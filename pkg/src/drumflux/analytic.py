"""Closed-form reference values (disk, semidisk, rectangle, sector) and the
Fourier-Bessel verification that the semidisk is a critical point of F
under arc deformations fixing the diameter.

Conventions on the semidisk {r < 1, 0 < theta < pi}: k1 = j_{1,1},
u1 = -2 J1(k1 r) sin(theta) / (sqrt(pi) J1'(k1)) >= 0 with unit L2 norm.
The outward derivative on the arc is -(2 k1 / sqrt(pi)) sin(theta); the
inward derivative at the origin is -k1 / (sqrt(pi) J1'(k1)).
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import specfun

# upper bound on G over convex domains
THEOREM1_BOUND = 1.08676163613127


class AnalyticError(ValueError):
    pass


@dataclass(frozen=True)
class AnalyticDomainOracle:
    tag: str
    lambda1: float
    G: float
    peak: str


def semidisk_cstar() -> float:
    """1 / (sqrt(pi) j11 |J0(j11)|)."""
    k = specfun.j11()
    return 1.0 / (math.sqrt(math.pi) * k * abs(specfun.bessel_j(0, k)))


def disk_objective() -> float:
    """F of the disk: d_n u1 = j01 / sqrt(pi) uniformly and lambda1 = j01^2."""
    return 1.0 / (math.sqrt(math.pi) * specfun.j01())


def rectangle_objective(alpha: float) -> float:
    """F at the midpoint of a long side of an alpha:1 rectangle,
    (2/pi) alpha^{3/2} / (alpha^2 + 1)."""
    if alpha <= 0:
        raise AnalyticError("aspect ratio must be positive")
    if alpha < 1:
        alpha = 1.0 / alpha
    return 2.0 / math.pi * alpha**1.5 / (alpha**2 + 1.0)


def rectangle_objective_sides(a: float, b: float) -> float:
    """Same value from side lengths a >= b, without reducing to the ratio."""
    a, b = max(a, b), min(a, b)
    return 2.0 / math.pi / ((a**-2 + b**-2) * math.sqrt(a) * b**1.5)


def sector_flux_exponent(beta: float) -> float:
    """Exponent nu - 1 (nu = pi / beta) of the flux d_n u1 ~ r^(nu - 1) near
    the vertex of a sector of opening beta; negative iff beta > pi."""
    if not 0 < beta < 2 * math.pi:
        raise AnalyticError("opening angle must lie in (0, 2 pi)")
    return math.pi / beta - 1.0


def oracle(tag: str, alpha: float = math.sqrt(3.0)) -> AnalyticDomainOracle:
    if tag == "disk":
        k = specfun.j01()
        return AnalyticDomainOracle("disk", k * k, disk_objective(), "uniform")
    if tag == "semidisk":
        k = specfun.j11()
        return AnalyticDomainOracle("semidisk", k * k, semidisk_cstar(), "diameter center")
    if tag == "rectangle":
        a, b = max(alpha, 1.0), min(alpha, 1.0)
        lam = math.pi**2 * (a**-2 + b**-2)
        return AnalyticDomainOracle(f"rectangle({alpha:g})", lam, rectangle_objective(alpha), "long-side midpoint")
    raise AnalyticError(f"unknown domain {tag!r}")


# ---------------------------------------------------------------------------
# semidisk perturbation theory
# ---------------------------------------------------------------------------

_NQ = 2048


@lru_cache(maxsize=4)
def _quad(n: int = _NQ):
    x, w = np.polynomial.legendre.leggauss(n)
    th, wt = 0.5 * math.pi * (x + 1.0), 0.5 * math.pi * w
    th.flags.writeable = False
    wt.flags.writeable = False
    return th, wt


def semidisk_hadamard_rate(V: Callable, n: int = _NQ) -> float:
    """d(lambda1) = -(4 k1^2 / pi) int_0^pi V sin^2 dtheta."""
    k = specfun.j11()
    th, w = _quad(n)
    return float(-4 * k * k / math.pi * np.sum(w * V(th) * np.sin(th) ** 2))


@dataclass
class SemidiskPerturbation:
    V: Callable = field(repr=False)
    lambda_dot: float
    psi_amplitude: float  # coefficient of r J0(k1 r) sin(theta)
    c: np.ndarray  # c[l-1] multiplies J_l(k1 r) sin(l theta), l = 1..L
    g_hat: np.ndarray  # sine coefficients of the boundary data
    L: int

    @property
    def solvability(self) -> float:
        """|g_hat_1|: must vanish because J1(k1) = 0 leaves no l = 1 freedom."""
        return float(abs(self.g_hat[0]))

    @property
    def tail(self) -> float:
        """Size of the last retained coefficient, a truncation diagnostic."""
        return float(abs(self.c[-1] * specfun.bessel_j(self.L, specfun.j11())))

    def boundary_data(self, theta) -> np.ndarray:
        """-V d_n u1 - psi~ on the arc, the target values of w."""
        k = specfun.j11()
        dnu = -2 * k / math.sqrt(math.pi) * np.sin(theta)
        return -self.V(theta) * dnu - self.psi_amplitude * specfun.bessel_j(0, k) * np.sin(theta)

    def w_on_arc(self, theta) -> np.ndarray:
        k = specfun.j11()
        ell = np.arange(1, self.L + 1)
        Jl = np.array([specfun.bessel_j(int(l), k) for l in ell])
        return np.sin(np.outer(theta, ell)) @ (self.c * Jl)

    def boundary_residual(self, m: int = 1001) -> float:
        th = np.linspace(0, math.pi, m)
        return float(np.max(np.abs(self.w_on_arc(th) - self.boundary_data(th))))


def _check_endpoints(V: Callable, tol: float = 1e-12):
    ends = V(np.array([0.0, math.pi]))
    if np.any(np.abs(ends) > tol):
        raise AnalyticError("deformation must vanish at theta = 0 and pi")


def semidisk_solve_perturbation(V: Callable, L: int = 64, n: int = _NQ) -> SemidiskPerturbation:
    """Particular solution plus Fourier-Bessel series for the eigenfunction
    derivative of the semidisk under the arc deformation V(theta)."""
    if L < 2:
        raise AnalyticError("truncation L must be at least 2")
    _check_endpoints(V)
    k = specfun.j11()
    lam_dot = semidisk_hadamard_rate(V, n)
    A = -lam_dot / (math.sqrt(math.pi) * k * specfun.bessel_j_prime(1, k))
    pert = SemidiskPerturbation(V, lam_dot, A, np.zeros(L), np.zeros(L), L)
    th, w = _quad(n)
    g = pert.boundary_data(th)
    ell = np.arange(1, L + 1)
    S = np.sin(np.outer(ell, th))
    g_hat = 2.0 / math.pi * (S @ (w * g))
    Jl = np.array([specfun.bessel_j(int(l), k) for l in ell])
    c = np.zeros(L)
    c[1:] = g_hat[1:] / Jl[1:]
    pert.g_hat = g_hat
    pert.c = c  # c_1 = 0: fixed by orthogonality to u1
    return pert


def criticality_residual(pert: SemidiskPerturbation, c1: Optional[float] = None) -> float:
    """lambda1 d_n(u1_dot)(0) - lambda1_dot d_n u1(0) at the origin.

    d_n(u1_dot)(0) is the psi~ slope plus the series slope; only l = 1 has a
    nonzero slope at the origin (J1'(0) = 1/2), so the series adds c1 k1 / 2.
    ``c1`` overrides the coefficient for diagnostics.
    """
    k = specfun.j11()
    c = pert.c.copy()
    if c1 is not None:
        c[0] = c1
    ell = np.arange(1, pert.L + 1)
    slope_series = float(np.sum(c * np.where(ell == 1, 0.5 * k, 0.0)))
    dn_dot = pert.psi_amplitude + slope_series
    dn_u1 = -k / (math.sqrt(math.pi) * specfun.bessel_j_prime(1, k))
    return k * k * dn_dot - pert.lambda_dot * dn_u1


def random_arc_field(seed: int, modes: int = 6, scale: float = 0.3) -> Callable:
    """Seeded trigonometric field vanishing at theta = 0 and pi:
    sum a_m sin(m theta) + b_m sin(theta) cos(m theta)."""
    rng = np.random.default_rng(seed)
    a = scale * rng.standard_normal(modes)
    b = scale * rng.standard_normal(modes)
    m = np.arange(1, modes + 1)

    def V(theta):
        theta = np.asarray(theta, dtype=float)
        t = theta[..., None]
        return (np.sin(m * t) @ a) + np.sin(theta) * (np.cos(m * t) @ b)

    return V


def trig_field(sin_coeffs=(), sincos_coeffs=()) -> Callable:
    """V = sum a_m sin(m theta) + sin(theta) sum b_m cos(m theta) (m from 1)."""
    a = np.asarray(sin_coeffs, dtype=float)
    b = np.asarray(sincos_coeffs, dtype=float)

    def V(theta):
        theta = np.asarray(theta, dtype=float)
        t = theta[..., None]
        out = np.zeros_like(theta)
        if a.size:
            out = out + np.sin(np.arange(1, a.size + 1) * t) @ a
        if b.size:
            out = out + np.sin(theta) * (np.cos(np.arange(1, b.size + 1) * t) @ b)
        return out

    return V
