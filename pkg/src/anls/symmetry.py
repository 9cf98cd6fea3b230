"""Steiner (axial) symmetrization of grid fields."""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .grid import RealField, reflect


@dataclass(frozen=True, eq=False)
class SymmetrizedField:
    field: RealField
    certified: bool
    clipped: float = 0.0  # magnitude of the most negative input sample

    @property
    def values(self):
        return self.field.values

    @property
    def grid(self):
        return self.field.grid


@lru_cache(maxsize=32)
def placement_order(n):
    """Positions filled by the sorted values, largest first: centre, then right/left."""
    c = n // 2
    order = [c]
    for k in range(1, n // 2 + 1):
        if c + k < n:
            order.append(c + k)
        order.append(c - k)
    out = np.array(order, dtype=np.int64)
    out.setflags(write=False)
    return out


def rearrange_axis(a, axis):
    """Symmetric decreasing rearrangement of every line of ``a`` along ``axis``."""
    a = np.ascontiguousarray(np.moveaxis(a, axis, -1))
    out = _kernels.rearrange_rows(a, placement_order(a.shape[-1]))
    return np.ascontiguousarray(np.moveaxis(out, -1, axis))


def is_bell_shaped(a, slack=1e-12):
    """Even in x and y and non-increasing away from the centre along both axes."""
    scale = max(float(np.abs(a).max()), 1e-300)
    tol = slack * scale
    if np.abs(a - reflect(a, 0)).max() > tol or np.abs(a - reflect(a, 1)).max() > tol:
        return False
    cx, cy = a.shape[0] // 2, a.shape[1] // 2
    right = a[cx:, :]
    up = a[:, cy:]
    return bool(np.all(np.diff(right, axis=0) <= tol) and np.all(np.diff(up, axis=1) <= tol))


def axial_symmetrize(f, slack=1e-12):
    """Rearrange along x for every y, then along y for every x.

    Negative samples are clipped to zero first.  Each pass only permutes the
    samples of a line, so every L^q norm of each line is preserved.
    """
    v = f.values
    vmin = float(v.min())
    clipped = -vmin if vmin < 0 else 0.0
    v = np.maximum(v, 0.0)
    if not np.any(v > 0):
        return SymmetrizedField(RealField(f.grid, v), False, clipped)
    out = rearrange_axis(v, 0)
    out = rearrange_axis(out, 1)
    return SymmetrizedField(RealField(f.grid, out), is_bell_shaped(out, slack), clipped)
