"""Discrete function spaces the iterative solvers run in.

``FullSpace`` holds real samples on the whole grid and transforms with
rfft2.  ``EvenSpace`` holds the non-negative quadrant of an even-even field
(indices 0..n/2 from the centre) and transforms with the type-I DCT, which
is the exact restriction of the full FFT to even-even data at a quarter of
the storage.
"""
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from . import _kernels
from .grid import MultiplierSymbol, _symbol_half, _symbol_r
from .symmetry import rearrange_axis


def _mult(n):
    m = np.full(n // 2 + 1, 2.0)
    m[0] = m[-1] = 1.0
    return m


class FullSpace:
    even = False

    def __init__(self, grid):
        self.grid = grid
        self.shape = grid.shape

    def fwd(self, a):
        return sfft.rfft2(a)

    def inv(self, c):
        return sfft.irfft2(c, s=self.shape)

    def symbol(self, sym):
        return _symbol_r(self.grid, sym)

    def apply(self, a, sym):
        return self.inv(self.fwd(a) * self.symbol(sym))

    @cached_property
    def _spec_weight(self):
        g = self.grid
        m = np.full(g.ny // 2 + 1, 2.0)
        m[0] = m[-1] = 1.0
        return m[None, :] * (g.cell / (g.nx * g.ny))

    @cached_property
    def mask(self):
        g = self.grid
        kx = np.abs(sfft.fftfreq(g.nx, 1.0 / g.nx))
        ky = np.arange(g.ny // 2 + 1)
        return ((kx <= g.nx // 3)[:, None] & (ky <= g.ny // 3)[None, :]).astype(float)

    @cached_property
    def nyquist_mask(self):
        g = self.grid
        m = np.ones((g.nx, g.ny // 2 + 1))
        m[g.nx // 2, :] = 0.0
        m[:, -1] = 0.0
        return m

    def dot(self, a, b):
        return float(np.sum(a * b) * self.grid.cell)

    def spec_dot(self, ah, bh):
        return float(np.sum(self._spec_weight * (ah.real * bh.real + ah.imag * bh.imag)))

    def to_full(self, a):
        return a

    def from_full(self, a):
        return np.ascontiguousarray(a, dtype=float)

    def symmetrize(self, a):
        out = rearrange_axis(np.maximum(a, 0.0), 0)
        return rearrange_axis(out, 1)

    def boundary_ratios(self, a):
        """max |a| on the x = -lx/2 and y = -ly/2 lines relative to max |a|."""
        m = np.abs(a).max()
        return float(np.abs(a[0, :]).max() / m), float(np.abs(a[:, 0]).max() / m)

    def value_at_center_lines(self, a):
        cx, cy = self.grid.center
        return a[cx:, cy], a[cx, cy:]


class EvenSpace:
    even = True

    def __init__(self, grid):
        self.grid = grid
        self.shape = (grid.nx // 2 + 1, grid.ny // 2 + 1)

    def fwd(self, a):
        return sfft.dctn(a, type=1)

    def inv(self, c):
        return sfft.idctn(c, type=1)

    def symbol(self, sym):
        return _symbol_half(self.grid, sym)

    def apply(self, a, sym):
        return self.inv(self.fwd(a) * self.symbol(sym))

    @cached_property
    def weight(self):
        g = self.grid
        return _mult(g.nx)[:, None] * _mult(g.ny)[None, :] * g.cell

    @cached_property
    def _spec_weight(self):
        g = self.grid
        return _mult(g.nx)[:, None] * _mult(g.ny)[None, :] * (g.cell / (g.nx * g.ny))

    @cached_property
    def mask(self):
        g = self.grid
        kx = np.arange(g.nx // 2 + 1)
        ky = np.arange(g.ny // 2 + 1)
        return ((kx <= g.nx // 3)[:, None] & (ky <= g.ny // 3)[None, :]).astype(float)

    @cached_property
    def nyquist_mask(self):
        m = np.ones(self.shape)
        m[-1, :] = 0.0
        m[:, -1] = 0.0
        return m

    def dot(self, a, b):
        return float(np.sum(self.weight * a * b))

    def spec_dot(self, ah, bh):
        return float(np.sum(self._spec_weight * ah * bh))

    def to_full(self, a):
        g = self.grid
        cx, cy = g.center
        ix = np.abs(np.arange(g.nx) - cx)
        iy = np.abs(np.arange(g.ny) - cy)
        return np.ascontiguousarray(a[ix][:, iy])

    def from_full(self, a):
        g = self.grid
        cx, cy = g.center
        ix = np.r_[np.arange(cx, g.nx), 0]
        iy = np.r_[np.arange(cy, g.ny), 0]
        return np.ascontiguousarray(a[ix][:, iy], dtype=float)

    def symmetrize(self, a):
        # restricted to even lines the rearrangement is a descending sort of each half-line
        out = _kernels.sort_rows_desc(np.ascontiguousarray(np.maximum(a, 0.0).T)).T
        return _kernels.sort_rows_desc(np.ascontiguousarray(out))

    def boundary_ratios(self, a):
        m = np.abs(a).max()
        return float(np.abs(a[-1, :]).max() / m), float(np.abs(a[:, -1]).max() / m)

    def value_at_center_lines(self, a):
        return a[:, 0], a[0, :]


def space_for(grid, even):
    return EvenSpace(grid) if even else FullSpace(grid)


def full_symbol(s, omega):
    return MultiplierSymbol("full", s, omega)


def resolvent_symbol(s, omega):
    return MultiplierSymbol("resolvent", s, omega)
