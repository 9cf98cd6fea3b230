"""Fundamental solutions of the linear operators, by subordination.

K(x, y) = int_0^inf e^{-t} H1(x, t) Hs(y, t) dt

with H1 the heat kernel of -d_xx (order ``full``) or the Poisson kernel of
|d_x| (order ``half``) and Hs the kernel of exp(-t (-d_yy)^s) (``full``) or
exp(-t (-d_yy)^(s/2)) (``half``).  In the 2 pi convention of :mod:`anls.grid`

    full:  H1 = (4 pi t)^(-1/2) exp(-x^2 / (4t))
    half:  H1 = t / (pi (t^2 + x^2))

and Hs(y, t) = t^(-1/a) G_a(y t^(-1/a)) with a = 2s (full) or s (half), where
G_a(z) = (1/pi) int_0^inf cos(k z) exp(-k^a) dk is one fixed profile.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate, special

from .errors import NonConvergenceError, ValidationError


class QuadratureError(NonConvergenceError):
    """Node doubling changed the kernel value by more than the tolerance."""


def _tail_series(z, a, rtol=1e-14, max_terms=60):
    """(1/pi) sum_n (-1)^(n+1) Gamma(n a + 1)/n! sin(n pi a/2) z^(-n a - 1).

    Convergent for a < 1, asymptotic for 1 <= a < 2.  Returns (value, ok).
    """
    total = 0.0
    prev = math.inf
    lz = math.log(z)
    for n in range(1, max_terms + 1):
        sn = math.sin(n * math.pi * a / 2.0)
        logmag = math.lgamma(n * a + 1.0) - math.lgamma(n + 1.0) - (n * a + 1.0) * lz
        mag = math.exp(logmag) if logmag > -700 else 0.0
        if mag > prev and n > 2:
            break
        term = (-1) ** (n + 1) * sn * mag
        total += term
        if mag <= rtol * abs(total) and n > 1:
            return total / math.pi, True
        prev = mag
    return total / math.pi, False


def stable_profile(z, a):
    """G_a(z) for scalar z (symmetric in z); a in (0, 2]."""
    z = abs(float(z))
    if a == 2.0:
        return math.exp(-z * z / 4.0) / (2.0 * math.sqrt(math.pi))
    if z == 0.0:
        return math.gamma(1.0 + 1.0 / a) / math.pi
    if z > 4.0:
        val, ok = _tail_series(z, a)
        if ok:
            return val
    # exp(-k^a) < 1e-17 beyond k = 40^(1/a); QAWO on the finite interval
    f = lambda k: math.exp(-k**a)  # noqa: E731
    val, _ = integrate.quad(f, 0.0, 40.0 ** (1.0 / a), weight="cos", wvar=z,
                            limit=2000, epsabs=1e-16, epsrel=1e-12)
    return val / math.pi


def _h1(x, t, order):
    if order == "full":
        return np.exp(-x * x / (4.0 * t)) / np.sqrt(4.0 * np.pi * t)
    return t / (np.pi * (t * t + x * x))


def _hs(y, t, s, order):
    a = 2.0 * s if order == "full" else s
    sc = t ** (-1.0 / a)
    return np.array([stable_profile(y * c, a) for c in sc]) * sc


def _kernel_nodes(x, y, s, order, t_max, n_nodes):
    # t = u^2 removes the t^(-1/2) endpoint behaviour of the heat kernel
    u, w = np.polynomial.legendre.leggauss(n_nodes)
    um = math.sqrt(t_max)
    u = 0.5 * um * (u + 1.0)
    w = 0.5 * um * w
    t = u * u
    vals = np.exp(-t) * _h1(x, t, order) * _hs(y, t, s, order) * 2.0 * u
    return float(np.sum(w * vals))


@dataclass(frozen=True)
class KernelQuadrature:
    t_max: float = 60.0
    n_nodes: int = 160
    rtol: float = 1e-6


def green_kernel(x, y, s, order="full", quadrature=None):
    """K(x, y) by Gauss-Legendre quadrature in sqrt(t), validated by node doubling."""
    q = quadrature or KernelQuadrature()
    if order not in ("full", "half"):
        raise ValidationError(f"order must be 'full' or 'half', got {order!r}")
    if not 0.0 < s <= 1.0:
        raise ValidationError(f"s must lie in (0, 1], got {s}")
    if x == 0 and y == 0:
        raise ValidationError("the kernel is singular at the origin")
    coarse = _kernel_nodes(x, y, s, order, q.t_max, q.n_nodes)
    fine = _kernel_nodes(x, y, s, order, q.t_max, 2 * q.n_nodes)
    tail = math.exp(-q.t_max)
    if abs(fine - coarse) > q.rtol * abs(fine) + tail:
        raise QuadratureError(
            f"green_kernel({x}, {y}, s={s}, {order}) changed by {abs(fine - coarse):.2e} "
            f"under node doubling", residual=abs(fine - coarse) / abs(fine))
    return fine


def kernel_decay_slope(s, order="full", ys=None, quadrature=None):
    """Least-squares slope of log K(0, y) against log y and its r^2."""
    ys = np.geomspace(5.0, 50.0, 10) if ys is None else np.asarray(ys, dtype=float)
    k = np.array([green_kernel(0.0, y, s, order, quadrature) for y in ys])
    A = np.vstack([np.log(ys), np.ones_like(ys)]).T
    coef, *_ = np.linalg.lstsq(A, np.log(k), rcond=None)
    pred = A @ coef
    lk = np.log(k)
    r2 = 1.0 - np.sum((lk - pred) ** 2) / np.sum((lk - lk.mean()) ** 2)
    return float(coef[0]), float(r2), ys, k


def helmholtz_kernel_s1(x, y):
    """Closed form at s = 1, full order: K0(r) / (2 pi)."""
    return special.k0(math.hypot(x, y)) / (2.0 * math.pi)
