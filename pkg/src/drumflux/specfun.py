"""Bessel and Hankel functions used by the layer-potential kernels and oracles.

Values come from the Cephes/AMOS routines shipped with :mod:`scipy.special`;
this module adds argument validation, the derivative identity, root finding
and a tabulated evaluator for the pairwise kernel assembly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sp


class SpecialFunctionDomainError(ValueError):
    pass


def _check_finite(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise SpecialFunctionDomainError("Bessel argument must be finite")
    return arr


def bessel_j(n: int, x):
    """J_n(x) for integer order n >= 0."""
    if n < 0 or int(n) != n:
        raise SpecialFunctionDomainError(f"order must be a nonnegative integer, got {n}")
    arr = _check_finite(x)
    if n == 0:
        out = sp.j0(arr)
    elif n == 1:
        out = sp.j1(arr)
    else:
        out = sp.jv(int(n), arr)
    return out if np.ndim(x) else float(out)


def bessel_y(n: int, x):
    """Y_n(x) for integer order n >= 0 and x > 0."""
    if n < 0 or int(n) != n:
        raise SpecialFunctionDomainError(f"order must be a nonnegative integer, got {n}")
    arr = _check_finite(x)
    if np.any(arr <= 0):
        raise SpecialFunctionDomainError("Y_n requires a positive argument")
    if n == 0:
        out = sp.y0(arr)
    elif n == 1:
        out = sp.y1(arr)
    else:
        out = sp.yn(int(n), arr)
    return out if np.ndim(x) else float(out)


def bessel_j_prime(n: int, x):
    """J_n'(x) = (J_{n-1}(x) - J_{n+1}(x))/2, with J_0' = -J_1."""
    if n == 0:
        out = -np.asarray(bessel_j(1, x))
    else:
        out = 0.5 * (np.asarray(bessel_j(n - 1, x)) - np.asarray(bessel_j(n + 1, x)))
    return out if np.ndim(x) else float(out)


def hankel1(n: int, x):
    """H_n^(1)(x) = J_n(x) + i Y_n(x) for n in {0, 1} and x > 0."""
    if n not in (0, 1):
        raise SpecialFunctionDomainError("hankel1 supports orders 0 and 1 only")
    arr = _check_finite(x)
    if np.any(arr <= 0):
        raise SpecialFunctionDomainError("hankel1 has a logarithmic singularity at 0")
    if n == 0:
        out = sp.j0(arr) + 1j * sp.y0(arr)
    else:
        out = sp.j1(arr) + 1j * sp.y1(arr)
    return out if np.ndim(x) else complex(out)


def bessel_table(z: np.ndarray):
    """Return (J0, Y0, J1, Y1) evaluated elementwise on ``z``.

    Entries with z == 0 get Y0 = Y1 = 0 as placeholders; callers treat the
    coincident-point limits separately.
    """
    z = np.asarray(z, dtype=float)
    zero = z == 0
    zs = np.where(zero, 1.0, z)
    j0 = sp.j0(z)
    j1 = sp.j1(z)
    y0 = sp.y0(zs)
    y1 = sp.y1(zs)
    if zero.any():
        y0[zero] = 0.0
        y1[zero] = 0.0
    return j0, y0, j1, y1


def _bisect_root(f, a: float, b: float, fa: float, tol: float = 1e-15) -> float:
    for _ in range(200):
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0 or (b - a) < tol * max(1.0, abs(m)):
            return m
        if (fa < 0) == (fm < 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def bessel_root(n: int, i: int) -> float:
    """i-th positive root j_{n,i} of J_n.

    Sign changes of J_n are bracketed on unit steps starting near n, refined
    by bisection and polished with Newton steps using J_n' .
    """
    if n < 0 or i < 1:
        raise SpecialFunctionDomainError("bessel_root needs n >= 0 and i >= 1")
    f = lambda x: bessel_j(n, x)
    # J_n has no zeros below n (and none below ~n + 1.8 n^{1/3} for large n)
    x = max(float(n), 0.5)
    fx = f(x)
    found = 0
    step = 0.5
    while True:
        xn = x + step
        fn = f(xn)
        if fx == 0.0:
            found += 1
            if found == i:
                return x
        elif (fx < 0) != (fn < 0):
            found += 1
            if found == i:
                r = _bisect_root(f, x, xn, fx)
                for _ in range(3):
                    d = bessel_j_prime(n, r)
                    if d == 0.0:
                        break
                    r_new = r - f(r) / d
                    if not (x <= r_new <= xn):
                        break
                    r = r_new
                return r
        x, fx = xn, fn


@dataclass
class BesselRootTable:
    """Memoized table of positive Bessel roots keyed by (order, index)."""

    entries: dict = field(default_factory=dict)

    def get(self, n: int, i: int) -> float:
        key = (int(n), int(i))
        if key not in self.entries:
            self.entries[key] = bessel_root(n, i)
        return self.entries[key]

    def __getitem__(self, key):
        return self.get(*key)


ROOTS = BesselRootTable()


def j01() -> float:
    return ROOTS.get(0, 1)


def j11() -> float:
    return ROOTS.get(1, 1)


EULER_GAMMA = 0.57721566490153286061
TWO_OVER_PI = 2.0 / math.pi
