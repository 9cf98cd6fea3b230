"""Pointwise kernels used inside the iteration loops.

Every kernel exists twice: a numba ``@njit`` version and a plain numpy
version with identical semantics.  The numba path is used when numba imports
and ``ANLS_NUMBA`` is not set to ``0``; the numpy path is always importable
as ``<name>_numpy`` so the two can be benchmarked and cross-checked.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("ANLS_NUMBA", "1") != "0"


# ---------------------------------------------------------------- numpy path

def clipped_power_numpy(u, q):
    """Return max(u, 0)**q and the most negative entry that was clipped."""
    vmin = float(u.min())
    return np.maximum(u, 0.0) ** q, min(vmin, 0.0)


def nonlinear_phase_numpy(u, p, tau):
    """In-place u <- exp(-i tau |u|^(p-2)) u."""
    u *= np.exp(-1j * tau * np.abs(u) ** (p - 2.0))
    return u


def rearrange_rows_numpy(a, order):
    """Symmetric decreasing rearrangement of every row of ``a``.

    ``order`` lists the column positions that receive the sorted values,
    largest first.
    """
    out = np.empty_like(a)
    out[:, order] = -np.sort(-a, axis=1)
    return out


def sort_rows_desc_numpy(a):
    return -np.sort(-a, axis=1)


# ---------------------------------------------------------------- numba path

if numba is not None:

    @numba.njit(cache=True)
    def _ipow(v, n):
        r = v
        for _ in range(n - 1):
            r *= v
        return r

    @numba.njit(cache=True)
    def clipped_power_numba(u, q):
        out = np.empty_like(u)
        flat_u = u.ravel()
        flat_o = out.ravel()
        # small integer powers by repeated products, as numpy does for q = 2
        n = int(q)
        small = n == q and 1 <= n <= 8
        vmin = 0.0
        for i in range(flat_u.size):
            v = flat_u[i]
            if v < vmin:
                vmin = v
            if v <= 0.0:
                flat_o[i] = 0.0
            elif small:
                flat_o[i] = _ipow(v, n)
            else:
                flat_o[i] = v ** q
        return out, vmin

    @numba.njit(cache=True)
    def nonlinear_phase_numba(u, p, tau):
        flat = u.ravel()
        e = p - 2.0
        # |z|^2 needs no square root
        half = e * 0.5
        n = int(half)
        even = n == half and 1 <= n <= 4
        for i in range(flat.size):
            z = flat[i]
            if even:
                w = _ipow(z.real * z.real + z.imag * z.imag, n)
            else:
                w = abs(z) ** e
            th = -tau * w
            flat[i] = z * complex(np.cos(th), np.sin(th))
        return u

    @numba.njit(cache=True)
    def rearrange_rows_numba(a, order):
        nr, nc = a.shape
        out = np.empty_like(a)
        for r in range(nr):
            srt = np.sort(a[r])
            for k in range(nc):
                out[r, order[k]] = srt[nc - 1 - k]
        return out

    @numba.njit(cache=True)
    def sort_rows_desc_numba(a):
        nr, nc = a.shape
        out = np.empty_like(a)
        for r in range(nr):
            srt = np.sort(a[r])
            for k in range(nc):
                out[r, k] = srt[nc - 1 - k]
        return out


if USE_NUMBA:
    clipped_power = clipped_power_numba
    nonlinear_phase = nonlinear_phase_numba
    rearrange_rows = rearrange_rows_numba
    sort_rows_desc = sort_rows_desc_numba
else:
    clipped_power = clipped_power_numpy
    nonlinear_phase = nonlinear_phase_numpy
    rearrange_rows = rearrange_rows_numpy
    sort_rows_desc = sort_rows_desc_numpy


def backend():
    return "numba" if USE_NUMBA else "numpy"
