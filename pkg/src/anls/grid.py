"""Periodic-rectangle discretization and Fourier multipliers.

Conventions
-----------
Sample points are centred: ``x_j = (j - nx/2) * dx`` so the origin sits at
index ``nx//2`` and the left edge ``-lx/2`` at index 0.  Coefficients follow
the ``exp(-2 pi i x xi)`` convention with frequencies ``xi = kx/lx``; the
forward transform carries the ``1/(nx*ny)`` factor so the (0, 0) entry is the
mean of the samples.  The fractional symbol is ``(2 pi |eta|)**(2s)`` which
reduces to the symbol of ``-d_yy`` at ``s = 1``.
"""
from dataclasses import dataclass
from functools import lru_cache
import struct

import numpy as np
import scipy.fft as sfft


class GridError(ValueError):
    """Invalid grid or field data."""


class SymmetryError(RuntimeError):
    """A real operator produced a non-negligible imaginary part."""


def _is_pow2(n):
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self):
        if not (_is_pow2(int(self.nx)) and _is_pow2(int(self.ny))):
            raise GridError(f"nx, ny must be positive powers of two, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0 and np.isfinite(self.lx) and np.isfinite(self.ly)):
            raise GridError(f"lx, ly must be positive, got {self.lx}, {self.ly}")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "lx", float(self.lx))
        object.__setattr__(self, "ly", float(self.ly))

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def dx(self):
        return self.lx / self.nx

    @property
    def dy(self):
        return self.ly / self.ny

    @property
    def cell(self):
        return self.dx * self.dy

    @property
    def x(self):
        return (np.arange(self.nx) - self.nx // 2) * self.dx

    @property
    def y(self):
        return (np.arange(self.ny) - self.ny // 2) * self.dy

    @property
    def center(self):
        return (self.nx // 2, self.ny // 2)

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    @property
    def xi(self):
        """Frequencies kx/lx in FFT order."""
        return sfft.fftfreq(self.nx, self.dx)

    @property
    def eta(self):
        return sfft.fftfreq(self.ny, self.dy)

    def scaled(self, fx, fy):
        return GridSpec(self.nx, self.ny, self.lx * fx, self.ly * fy)


def reflect(a, axis):
    """Sample array of f(-x) (axis 0) or f(-y) (axis 1) on the centred grid."""
    return np.roll(np.flip(a, axis=axis), 1, axis=axis)


# ------------------------------------------------------------------- fields

def _check_values(grid, values, kind):
    if values.shape != grid.shape:
        raise GridError(f"{kind} shape {values.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(values)):
        raise GridError(f"{kind} contains non-finite samples")


@dataclass(frozen=True, eq=False)
class RealField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if np.iscomplexobj(v):
            raise GridError("RealField requires real samples")
        v = np.ascontiguousarray(v, dtype=float)
        _check_values(self.grid, v, "RealField")
        object.__setattr__(self, "values", v)

    def __mul__(self, c):
        return RealField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __add__(self, other):
        _same_grid(self, other)
        return RealField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return RealField(self.grid, self.values - other.values)

    def __neg__(self):
        return RealField(self.grid, -self.values)

    def norm(self, q=2):
        return lq_norm(self, q)


@dataclass(frozen=True, eq=False)
class ComplexField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values), dtype=complex)
        _check_values(self.grid, v, "ComplexField")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        _check_values(self.grid, c, "SpectralField")
        object.__setattr__(self, "coeffs", c)


def _same_grid(a, b):
    if a.grid != b.grid:
        raise GridError(f"grid mismatch: {a.grid} vs {b.grid}")


def inner(f, g):
    """Grid quadrature of f*g."""
    _same_grid(f, g)
    return float(np.sum(f.values * g.values) * f.grid.cell)


def lq_norm(f, q=2):
    a = np.abs(f.values)
    return float((np.sum(a**q) * f.grid.cell) ** (1.0 / q))


# ---------------------------------------------------------------- multipliers

_KINDS = (
    "second_x", "frac_y", "half_x", "half_frac_y", "full", "resolvent",
    "half_resolvent", "sobolev_weight", "linear_phase", "frac_y_log",
)


@dataclass(frozen=True)
class MultiplierSymbol:
    """Fourier symbol of a constant-coefficient operator.

    kind is one of ``second_x`` (2 pi xi)^2, ``frac_y`` (2 pi |eta|)^(2s),
    ``half_x`` |2 pi xi|, ``half_frac_y`` (2 pi |eta|)^s, ``full``
    (second_x + frac_y + omega), ``resolvent`` 1/full, ``half_resolvent``
    1/(half_x + half_frac_y + omega), ``sobolev_weight``
    (1 + (2 pi xi)^2 + (2 pi |eta|)^(2s))^order, ``linear_phase``
    exp(i dt ((2 pi xi)^2 + (2 pi |eta|)^(2s))) and ``frac_y_log``, the
    s-derivative of ``frac_y``.
    """
    kind: str
    s: float = 1.0
    omega: float = 0.0
    dt: float = 0.0
    order: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown multiplier kind {self.kind!r}")
        if not 0.0 < self.s <= 1.0:
            raise ValueError(f"fractional order must lie in (0, 1], got {self.s}")
        if self.kind in ("full", "resolvent", "half_resolvent") and not self.omega > 0:
            raise ValueError(f"{self.kind} requires omega > 0, got {self.omega}")

    def values(self, grid):
        return _symbol(grid, self)

    def half_values(self, grid):
        """Symbol on the non-negative integer frequencies 0..n/2 (cosine modes)."""
        return _symbol_half(grid, self)


def _evaluate(kind, sym, X, Y):
    # X = 2 pi xi, Y = 2 pi |eta|, both >= 0
    s = sym.s
    if kind == "second_x":
        return X**2
    if kind == "frac_y":
        return Y ** (2 * s)
    if kind == "half_x":
        return np.abs(X)
    if kind == "half_frac_y":
        return Y**s
    if kind == "full":
        return X**2 + Y ** (2 * s) + sym.omega
    if kind == "resolvent":
        return 1.0 / (X**2 + Y ** (2 * s) + sym.omega)
    if kind == "half_resolvent":
        return 1.0 / (np.abs(X) + Y**s + sym.omega)
    if kind == "sobolev_weight":
        return (1.0 + X**2 + Y ** (2 * s)) ** sym.order
    if kind == "linear_phase":
        return np.exp(1j * sym.dt * (X**2 + Y ** (2 * s)))
    if kind == "frac_y_log":
        with np.errstate(divide="ignore", invalid="ignore"):
            out = Y ** (2 * s) * 2.0 * np.log(Y)
        return np.where(Y > 0, out, 0.0)
    raise ValueError(kind)


def _freqs(grid, which):
    """Angular wavenumber magnitudes 2 pi |k|/l for the layout ``which``."""
    if which == "full":
        X = np.abs(2 * np.pi * grid.xi)
        Y = np.abs(2 * np.pi * grid.eta)
    elif which == "r":
        X = np.abs(2 * np.pi * grid.xi)
        Y = 2 * np.pi * np.arange(grid.ny // 2 + 1) / grid.ly
    else:
        X = 2 * np.pi * np.arange(grid.nx // 2 + 1) / grid.lx
        Y = 2 * np.pi * np.arange(grid.ny // 2 + 1) / grid.ly
    return X[:, None], Y[None, :]


def _build(grid, sym, which):
    X, Y = _freqs(grid, which)
    out = _evaluate(sym.kind, sym, X, Y)
    out = np.ascontiguousarray(np.broadcast_to(out, (X.shape[0], Y.shape[1])))
    out.setflags(write=False)
    return out


@lru_cache(maxsize=8)
def _symbol(grid, sym):
    return _build(grid, sym, "full")


@lru_cache(maxsize=8)
def _symbol_half(grid, sym):
    """Symbol on cosine modes 0..n/2 of each axis."""
    return _build(grid, sym, "half")


@lru_cache(maxsize=8)
def _symbol_r(grid, sym):
    """Symbol on the rfft2 half-plane (last axis truncated)."""
    return _build(grid, sym, "r")


@lru_cache(maxsize=16)
def _centering_phase(grid):
    # (-1)^(j+l) converts index-origin coefficients to the centred convention
    px = (-1.0) ** np.arange(grid.nx)
    py = (-1.0) ** np.arange(grid.ny)
    out = np.outer(px, py)
    out.setflags(write=False)
    return out


# -------------------------------------------------------------- transforms

def forward_transform(f):
    """Discrete Fourier coefficients of a Real/ComplexField (mean at (0, 0))."""
    if not np.all(np.isfinite(f.values)):
        raise GridError("non-finite samples cannot be transformed")
    g = f.grid
    coeffs = sfft.fft2(f.values) / (g.nx * g.ny) * _centering_phase(g)
    return SpectralField(g, coeffs)


def inverse_transform(S, real=False, tol=1e-10):
    g = S.grid
    vals = sfft.ifft2(S.coeffs * _centering_phase(g)) * (g.nx * g.ny)
    if real:
        scale = max(np.abs(vals).max(), 1e-300)
        if np.abs(vals.imag).max() > tol * scale:
            raise SymmetryError("inverse transform has a non-negligible imaginary part")
        return RealField(g, vals.real)
    return ComplexField(g, vals)


def apply_multiplier(S, m):
    return SpectralField(S.grid, S.coeffs * m.values(S.grid))


def apply_L(f, s, omega):
    """(-d_xx + (-d_yy)^s + omega) f for a real field."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    if not 0 < s <= 1:
        raise ValueError("s must lie in (0, 1]")
    g = f.grid
    vals = sfft.ifft2(sfft.fft2(f.values) * MultiplierSymbol("full", s, omega).values(g))
    nrm = np.sqrt(np.sum(f.values**2))
    if np.abs(vals.imag).max() > 1e-10 * max(nrm, 1e-300):
        raise SymmetryError("imaginary residue in apply_L exceeds 1e-10 |f|")
    return RealField(g, vals.real)


def sobolev_norm(f, space="H1s", s=1.0):
    """Anisotropic Sobolev norm; ``space`` is ``"H1s"`` or ``"H22s"``."""
    order = {"H1s": 1, "H22s": 2}[space]
    g = f.grid
    c = forward_transform(f).coeffs
    w = MultiplierSymbol("sobolev_weight", s, order=order).values(g)
    return float(np.sqrt(g.lx * g.ly * np.sum(w * np.abs(c) ** 2)))


def spectral_derivative(values, grid, axis):
    """d/dx (axis 0) or d/dy (axis 1) of real samples; Nyquist mode zeroed."""
    n = grid.shape[axis]
    L = grid.lx if axis == 0 else grid.ly
    if axis == 0:
        k = 2j * np.pi * sfft.fftfreq(n, L / n)
        k[n // 2] = 0.0
        return sfft.irfft2(sfft.rfft2(values) * k[:, None], s=grid.shape)
    k = 2j * np.pi * sfft.rfftfreq(n, L / n)
    k[-1] = 0.0
    return sfft.irfft2(sfft.rfft2(values) * k[None, :], s=grid.shape)


def _trig_basis(t, n):
    """Rows: samples of the n-point trigonometric basis at fractional positions t."""
    k = sfft.fftfreq(n, 1.0 / n)
    E = np.exp(2j * np.pi * np.outer(t, k))
    # Nyquist mode split evenly between +-n/2 keeps real data real
    E[:, n // 2] = np.cos(np.pi * n * t)
    return E


def interpolate(f, target):
    """Trigonometric interpolation of a periodic field onto another grid.

    Target points outside the source box are wrapped periodically.
    """
    g = f.grid
    c = sfft.fft2(f.values) / (g.nx * g.ny)
    Ex = _trig_basis((target.x + g.lx / 2) / g.lx, g.nx)
    ty = (target.y + g.ly / 2) / g.ly
    # y basis in row blocks keeps memory at O(chunk * ny)
    chunk = max(1, 2**22 // g.ny)
    out = np.empty(target.shape)
    for a in range(0, target.ny, chunk):
        Ey = _trig_basis(ty[a:a + chunk], g.ny)
        out[:, a:a + chunk] = (Ex @ (c @ Ey.T)).real
    return RealField(target, out)


# ---------------------------------------------------------------- field dumps

MAGIC = b"ANLS"
DUMP_VERSION = 1
_HEADER = struct.Struct("<4sIIIdd")


def write_field(path, f):
    """Binary dump: 32-byte header then little-endian f64 samples, x slow."""
    g = f.grid
    header = _HEADER.pack(MAGIC, DUMP_VERSION, g.nx, g.ny, g.lx, g.ly)
    if isinstance(f, ComplexField):
        data = np.ascontiguousarray(f.values, dtype="<c16")
    else:
        data = np.ascontiguousarray(f.values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes(order="C"))


def read_field(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise GridError(f"{path}: truncated header")
    magic, version, nx, ny, lx, ly = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise GridError(f"{path}: bad magic {magic!r}")
    if version != DUMP_VERSION:
        raise GridError(f"{path}: unsupported dump version {version}")
    g = GridSpec(nx, ny, lx, ly)
    body = raw[_HEADER.size:]
    if len(body) == nx * ny * 8:
        return RealField(g, np.frombuffer(body, dtype="<f8").reshape(nx, ny).astype(float))
    if len(body) == nx * ny * 16:
        return ComplexField(g, np.frombuffer(body, dtype="<c16").reshape(nx, ny).astype(complex))
    raise GridError(f"{path}: payload of {len(body)} bytes does not match {nx}x{ny}")
