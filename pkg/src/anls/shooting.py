"""Radial ground state of -Delta phi + phi = phi^(p-1) in the plane by shooting.

phi'' + phi'/r - phi + phi^(p-1) = 0, phi'(0) = 0, phi(0) = a.  For a too
large the orbit crosses zero, for a too small it turns back up before
decaying; bisection on a isolates the decaying solution.  Past the radius
where the bisected orbit is still trustworthy the profile is continued by
the linear tail c K0(r).
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import ANLSError


class OracleError(ANLSError):
    """Shooting failed to bracket or to meet its self-test."""
    exit_code = 4


def _rhs(p):
    def f(r, y):
        phi, dphi = y
        return [dphi, -dphi / r + phi - np.maximum(phi, 0.0) ** (p - 1.0)]
    return f


def _start(a, p, r0):
    # series phi = a + (a - a^(p-1)) r^2 / 4 + O(r^4)
    c2 = (a - a ** (p - 1.0)) / 4.0
    return [a + c2 * r0 * r0, 2.0 * c2 * r0]


def _shoot(a, p, r_end=40.0, r0=1e-6):
    """Classify the orbit: +1 crossed zero (a too big), -1 turned up (a too small)."""
    def crossed(r, y):
        return y[0]
    crossed.terminal = True
    crossed.direction = -1

    def turned(r, y):
        return y[1]
    turned.terminal = True
    turned.direction = 1

    sol = integrate.solve_ivp(_rhs(p), (r0, r_end), _start(a, p, r0), method="DOP853",
                              rtol=1e-13, atol=1e-15, events=(crossed, turned), dense_output=True)
    if sol.t_events[0].size:
        return 1, sol
    if sol.t_events[1].size:
        return -1, sol
    return 0, sol


@dataclass
class RadialProfile:
    p: float
    amplitude: float
    r_match: float
    tail_c: float
    _sol: object

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        inner = r <= self.r_match
        ri = np.maximum(r[inner], 1e-6)
        out[inner] = self._sol.sol(ri)[0]
        out[inner & (r < 1e-6)] = self.amplitude
        out[~inner] = self.tail_c * special.k0(r[~inner])
        return out

    def ode_residual(self, r_min=0.05, n=400):
        """max |phi'' + phi'/r - phi + phi^(p-1)| / phi(0) on [r_min, r_match].

        phi'' comes from a sixth-order central difference of the dense phi'.
        """
        r = np.linspace(r_min, self.r_match - 0.05, n)
        h = 1e-3
        d1 = lambda x: self._sol.sol(x)[1]  # noqa: E731
        d2 = (d1(r + 3 * h) - 9 * d1(r + 2 * h) + 45 * d1(r + h)
              - 45 * d1(r - h) + 9 * d1(r - 2 * h) - d1(r - 3 * h)) / (60 * h)
        phi, dphi = self._sol.sol(r)
        res = d2 + dphi / r - phi + phi ** (self.p - 1.0)
        return float(np.abs(res).max() / self.amplitude)


@lru_cache(maxsize=8)
def radial_ground_state(p, r_end=40.0, match_level=1e-6):
    """Positive decaying radial solution with omega = 1."""
    if not p > 2.0:
        raise OracleError("p must exceed 2")
    lo, hi = 1.0 + 1e-9, 2.0
    # a = 1 is the constant solution; the ground state lies above it
    while _shoot(hi, p, r_end)[0] != 1:
        hi *= 2.0
        if hi > 1e6:
            raise OracleError("shooting failed to bracket the ground state")
    if _shoot(lo, p, r_end)[0] != -1:
        raise OracleError("shooting failed to bracket the ground state from below")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        kind, _ = _shoot(mid, p, r_end)
        if kind == 1:
            hi = mid
        else:
            lo = mid
    a = lo
    _, sol = _shoot(a, p, r_end)
    # the orbit leaves the ground state once |phi| drops to the bisection noise
    r_grid = np.linspace(1e-3, sol.t[-1], 4000)
    phi = sol.sol(r_grid)[0]
    below = np.nonzero(phi < match_level * a)[0]
    if below.size == 0:
        raise OracleError("bisected orbit never reached the matching level")
    r_match = float(r_grid[below[0]])
    tail_c = float(sol.sol(r_match)[0] / special.k0(r_match))
    return RadialProfile(p, a, r_match, tail_c, sol)


def radial_on_grid(profile, grid, center=(0.0, 0.0)):
    """Sample the radial profile on a 2-D grid (x rows, y columns)."""
    X, Y = grid.mesh()
    return profile(np.hypot(X - center[0], Y - center[1]))
