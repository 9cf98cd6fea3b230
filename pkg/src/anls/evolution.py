"""Split-step Fourier propagation of i u_t - u_xx + (-d_yy)^s u = |u|^(p-2) u.

Writing H = -d_xx + (-d_yy)^s, the flow splits into the linear part
u_t = i H u, exact in Fourier space, and the nonlinear part
u_t = -i |u|^(p-2) u, which leaves |u| unchanged and is therefore an exact
pointwise phase rotation.  Strang composition of the two is second order
and each sub-step is an L2 isometry.
"""
from dataclasses import dataclass, field
import json
import logging
import math
import os

import numpy as np
import scipy.fft as sfft

from . import _kernels
from .errors import BlowUpError, ValidationError
from .grid import ComplexField, MultiplierSymbol, RealField, _symbol, reflect, write_field

log = logging.getLogger(__name__)


@dataclass
class EvolutionState:
    u: ComplexField
    t: float = 0.0
    mass: float = math.nan
    energy: float = math.nan

    @property
    def grid(self):
        return self.u.grid

    @property
    def values(self):
        return self.u.values


@dataclass(frozen=True)
class PropagatorConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    dealias: bool = False
    record_every: int = 0  # 0 disables snapshots

    def __post_init__(self):
        if not (0.0 < self.dt <= self.t_end):
            raise ValidationError(f"need 0 < dt <= t_end, got dt={self.dt}, t_end={self.t_end}")
        if self.record_every < 0:
            raise ValidationError("record_every must be non-negative")

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))


def _mask(grid):
    kx = np.abs(sfft.fftfreq(grid.nx, 1.0 / grid.nx))
    ky = np.abs(sfft.fftfreq(grid.ny, 1.0 / grid.ny))
    return ((kx <= grid.nx // 3)[:, None] & (ky <= grid.ny // 3)[None, :])


def linear_phase(grid, s, dt):
    return _symbol(grid, MultiplierSymbol("linear_phase", s, dt=dt))


def phase_wrap_ratio(grid, s, dt):
    """dt times the largest linear symbol over 2 pi (values >= 1 wrap the phase)."""
    kx = math.pi / grid.dx
    ky = math.pi / grid.dy
    return abs(dt) * (kx**2 + ky ** (2 * s)) / (2 * math.pi)


class _Stepper:
    """Strang stepper on raw arrays; the fields are wrapped only at the end."""

    def __init__(self, grid, params, dt, dealias=False, nonlinear=True):
        self.grid = grid
        self.p = params.p
        self.dt = dt
        self.E = linear_phase(grid, params.s, dt)
        self.mask = _mask(grid) if dealias else None
        self.nonlinear = nonlinear
        wrap = phase_wrap_ratio(grid, params.s, dt)
        if wrap >= 1.0:
            log.info("linear phase wraps per step (ratio %.2f)", wrap)

    def _half_nonlinear(self, u):
        if not self.nonlinear:
            return u
        _kernels.nonlinear_phase(u, self.p, 0.5 * self.dt)
        if self.mask is not None:
            u = sfft.ifft2(sfft.fft2(u) * self.mask)
        return u

    def step(self, u):
        u = self._half_nonlinear(u)
        u = sfft.ifft2(sfft.fft2(u) * self.E)
        return self._half_nonlinear(u)


def _as_complex(u):
    if isinstance(u, EvolutionState):
        return u.grid, u.values, u.t
    if isinstance(u, (ComplexField, RealField)):
        return u.grid, np.asarray(u.values, dtype=complex), 0.0
    raise ValidationError("expected an EvolutionState, ComplexField or RealField")


def split_step(state, params, dt, dealias=False, nonlinear=True):
    """One Strang step N(dt/2) L(dt) N(dt/2); negative dt runs backwards."""
    grid, u, t = _as_complex(state)
    u = _Stepper(grid, params, dt, dealias, nonlinear).step(u.copy())
    if not np.all(np.isfinite(u)):
        raise BlowUpError(f"non-finite values at t = {t + dt:.6g}", last=state)
    return conserved_quantities(EvolutionState(ComplexField(grid, u), t + dt), params)


def _mass(values, grid):
    return float(np.sum(np.abs(values) ** 2) * grid.cell)


def _energy(values, grid, s, p):
    c = sfft.fft2(values)
    w = np.abs(c) ** 2 * (grid.cell / (grid.nx * grid.ny))
    kin = _symbol(grid, MultiplierSymbol("second_x")) + _symbol(grid, MultiplierSymbol("frac_y", s))
    t = float(np.sum(kin * w))
    v = float(np.sum(np.abs(values) ** p) * grid.cell)
    return 0.5 * t - v / p


def conserved_quantities(state, params):
    """Fill and return (mass, energy) of ``state``; energy = T/2 - (1/p) int |u|^p."""
    vals, g = state.values, state.grid
    state.mass = _mass(vals, g)
    state.energy = _energy(vals, g, params.s, params.p)
    return state


# ---------------------------------------------------------------- propagate

@dataclass
class Trajectory:
    final: EvolutionState
    times: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    deviation: np.ndarray | None = None
    snapshots: list = field(default_factory=list)


def propagate(u0, params, cfg, monitor=None, nonlinear=True, sample_every=None):
    """Integrate to cfg.t_end with fixed steps.

    ``monitor(u)`` is evaluated on the raw samples every ``sample_every``
    steps (default ``record_every`` or every step) and its values returned
    as ``deviation``; snapshots are kept every ``record_every`` steps.
    """
    grid, u, t0 = _as_complex(u0)
    u = u.copy()
    st = _Stepper(grid, params, cfg.dt, cfg.dealias, nonlinear)
    every = sample_every or cfg.record_every or 1
    times, mass, energy, dev, snaps = [], [], [], [], []

    def sample(t, u):
        times.append(t)
        mass.append(_mass(u, grid))
        energy.append(_energy(u, grid, params.s, params.p))
        if monitor is not None:
            dev.append(monitor(u))

    sample(t0, u)
    last = u.copy()
    for n in range(1, cfg.n_steps + 1):
        u = st.step(u)
        t = t0 + n * cfg.dt
        if n % every == 0 or n == cfg.n_steps:
            if not np.all(np.isfinite(u)):
                raise BlowUpError(f"non-finite values at t = {t:.6g}",
                                  last=EvolutionState(ComplexField(grid, last), t - cfg.dt))
            last = u.copy()
            sample(t, u)
        if cfg.record_every and n % cfg.record_every == 0:
            snaps.append((t, u.copy()))
    if not np.all(np.isfinite(u)):
        raise BlowUpError("non-finite values at the final time",
                          last=EvolutionState(ComplexField(grid, last), times[-1]))
    final = conserved_quantities(EvolutionState(ComplexField(grid, u), t0 + cfg.n_steps * cfg.dt), params)
    return Trajectory(final, np.array(times), np.array(mass), np.array(energy),
                      np.array(dev) if monitor is not None else None, snaps)


def write_snapshots(traj, directory, params):
    """Binary dumps of |u|-bearing complex snapshots (real and imaginary parts) plus index.json."""
    os.makedirs(directory, exist_ok=True)
    index = []
    for k, (t, u) in enumerate(traj.snapshots):
        grid = traj.final.grid
        re = f"snap_{k:05d}_re.anls"
        im = f"snap_{k:05d}_im.anls"
        write_field(os.path.join(directory, re), RealField(grid, u.real))
        write_field(os.path.join(directory, im), RealField(grid, u.imag))
        index.append({"t": float(f"{t:.17g}"), "mass": _mass(u, grid),
                      "energy": _energy(u, grid, params.s, params.p), "re": re, "im": im})
    with open(os.path.join(directory, "index.json"), "w") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)
    return index


# ------------------------------------------------------------- growth rate

def gauge_deviation(u, phi, cell):
    """min over theta of ||u e^{i theta} - phi||_2."""
    nu = np.sum(np.abs(u) ** 2)
    nphi = np.sum(phi**2)
    ov = abs(np.sum(u * phi))
    return math.sqrt(max(nu + nphi - 2.0 * ov, 0.0) * cell)


def _shift_to_peak(u):
    # integer translation aligning the modulus peak with the grid centre
    g = np.abs(u)
    i, j = np.unravel_index(np.argmax(g), g.shape)
    return np.roll(u, (u.shape[0] // 2 - i, u.shape[1] // 2 - j), axis=(0, 1))


@dataclass
class GrowthReport:
    lambda_est: float
    window: tuple | None
    fit_r2: float
    grew: bool
    times: np.ndarray
    deviation: np.ndarray
    amplitude: float

    def fitted(self):
        """Fitted deviation curve on the window (NaN outside it)."""
        out = np.full_like(self.deviation, np.nan)
        if self.window is None:
            return out
        t0, t1, c = self.window
        sel = (self.times >= t0) & (self.times <= t1)
        out[sel] = np.exp(c + self.lambda_est * self.times[sel])
        return out


def perturbation_field(sol, mode="random", seed=0, even=True):
    """Unit-L2 complex perturbation.

    ``mode`` is "random" (smooth random field under the soliton envelope,
    even-even when ``even``), an UnstableMode (z1 + i z2, the growing
    direction) or an array of samples.
    """
    g = sol.grid
    if isinstance(mode, str):
        if mode != "random":
            raise ValidationError(f"unknown perturbation mode {mode!r}")
        rng = np.random.default_rng(seed)
        a = rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)
        # smooth by the resolvent so the perturbation is resolved on the grid
        res = _symbol(g, MultiplierSymbol("resolvent", sol.params.s, sol.params.omega))
        a = sfft.ifft2(sfft.fft2(a) * res**2)
        a *= np.sqrt(sol.values / sol.values.max())
        if even:
            a = 0.25 * (a + reflect(a, 0) + reflect(a, 1) + reflect(reflect(a, 0), 1))
        w = a
    elif hasattr(mode, "z1"):
        w = mode.z1.values + 1j * mode.z2.values
    else:
        w = np.asarray(getattr(mode, "values", mode), dtype=complex)
        if w.shape != g.shape:
            raise ValidationError("perturbation shape does not match the grid")
    nrm = math.sqrt(np.sum(np.abs(w) ** 2) * g.cell)
    if not nrm > 0:
        raise ValidationError("perturbation is zero")
    return w / nrm


def measure_growth_rate(sol, mode="random", amplitude=None, dt=1e-3, t_end=20.0,
                        sample_every=10, align_translation=False, seed=0, upper=1e-2):
    """Exponential growth rate of the gauge-aligned deviation from the soliton.

    Evolves u0 = phi + amplitude w and fits log d(t) on the window
    10 amplitude <= d <= upper ||phi||_2.  Stops once d leaves the window
    from above.  When the window is never reached, lambda_est = 0 and
    ``grew`` is False.
    """
    phi = sol.values
    g = sol.grid
    nphi = math.sqrt(np.sum(phi**2) * g.cell)
    if amplitude is None:
        amplitude = 1e-5 * nphi
    if amplitude > 1e-3 * nphi:
        raise ValidationError("amplitude must not exceed 1e-3 ||phi||_2 (linear regime)")
    w = perturbation_field(sol, mode, seed)
    u = phi + amplitude * w
    st = _Stepper(g, sol.params, dt)
    hi = upper * nphi
    lo = 10.0 * amplitude

    def dev(v):
        if align_translation:
            v = _shift_to_peak(v)
        return gauge_deviation(v, phi, g.cell)

    times, d = [0.0], [dev(u)]
    n_steps = int(round(t_end / dt))
    for n in range(1, n_steps + 1):
        u = st.step(u)
        if n % sample_every:
            continue
        if not np.all(np.isfinite(u)):
            raise BlowUpError(f"non-finite values at t = {n * dt:.6g}")
        times.append(n * dt)
        d.append(dev(u))
        if d[-1] > hi:
            break
    times, d = np.array(times), np.array(d)
    sel = (d >= lo) & (d <= hi)
    # the window must be a contiguous run that ends by leaving through the top
    if d.max() <= hi or sel.sum() < 5:
        return GrowthReport(0.0, None, 0.0, False, times, d, amplitude)
    first = int(np.argmax(sel))
    last = len(sel) - 1 - int(np.argmax(sel[::-1]))
    tt, ld = times[first:last + 1], np.log(d[first:last + 1])
    A = np.vstack([tt, np.ones_like(tt)]).T
    (lam, c), *_ = np.linalg.lstsq(A, ld, rcond=None)
    pred = A @ np.array([lam, c])
    r2 = 1.0 - np.sum((ld - pred) ** 2) / max(np.sum((ld - ld.mean()) ** 2), 1e-300)
    return GrowthReport(float(lam), (float(tt[0]), float(tt[-1]), float(c)), float(r2), True,
                        times, d, amplitude)


def shape_error(u, phi):
    """|| |u| - phi ||_2 / ||phi||_2 on raw samples."""
    return float(np.linalg.norm(np.abs(u) - phi) / np.linalg.norm(phi))


def soliton_run(sol, t_end=5.0, dt=1e-3, dealias=False):
    """Propagate the ground state; returns (shape error, relative mass drift, trajectory)."""
    cfg = PropagatorConfig(dt, t_end, dealias)
    traj = propagate(sol.field, sol.params, cfg, sample_every=max(1, cfg.n_steps // 50))
    err = shape_error(traj.final.values, sol.values)
    drift = float(np.max(np.abs(traj.mass - traj.mass[0])) / traj.mass[0])
    return err, drift, traj


def time_reversal_error(u0, params, dt, n_steps):
    """Relative L2 distance after n steps forward then n steps with -dt."""
    grid, u, _ = _as_complex(u0)
    fwd = _Stepper(grid, params, dt)
    bwd = _Stepper(grid, params, -dt)
    v = u.copy()
    for _ in range(n_steps):
        v = fwd.step(v)
    for _ in range(n_steps):
        v = bwd.step(v)
    return float(np.linalg.norm(v - u) / np.linalg.norm(u))


def strang_order(u0, params, t_end, dts):
    """Observed order from self-convergence: errors against the finest dt.

    Returns (orders, errors) where errors[k] compares dts[k] with dts[k+1]
    and orders are log2 ratios of consecutive errors (dts halving).
    """
    grid, u, _ = _as_complex(u0)
    finals = []
    for dt in dts:
        st = _Stepper(grid, params, dt)
        v = u.copy()
        for _ in range(int(round(t_end / dt))):
            v = st.step(v)
        finals.append(v)
    errs = np.array([np.linalg.norm(finals[k] - finals[k + 1]) for k in range(len(dts) - 1)])
    ratios = np.log(errs[:-1] / errs[1:]) / np.log(np.asarray(dts[:-2]) / np.asarray(dts[1:-1]))
    return ratios, errs


__all__ = [
    "EvolutionState", "PropagatorConfig", "split_step", "conserved_quantities", "propagate",
    "measure_growth_rate", "GrowthReport", "perturbation_field", "gauge_deviation",
    "shape_error", "soliton_run", "time_reversal_error", "strang_order", "write_snapshots",
    "Trajectory", "linear_phase", "phase_wrap_ratio",
]
