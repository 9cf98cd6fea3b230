"""Ground states of -u_xx + (-d_yy)^s u + omega u = u^(p-1) on the periodic box."""
from dataclasses import dataclass, field, asdict
from enum import Enum
import json
import logging
import math
import time

import numpy as np
import scipy.fft as sfft

from . import _kernels
from ._spaces import EvenSpace, FullSpace, full_symbol
from .errors import (CollapseError, NonConvergenceError, ResolutionError,
                     SolverTimeout, ValidationError)
from .grid import (GridSpec, MultiplierSymbol, RealField, _symbol_r,
                   interpolate, read_field, reflect, write_field)
from .symmetry import SymmetrizedField, is_bell_shaped

log = logging.getLogger(__name__)


# ----------------------------------------------------------------- exponents

def critical_exponent(s):
    """p_s = 2(1+s)/(1-s); infinite at s = 1."""
    return math.inf if s >= 1 else 2.0 * (1.0 + s) / (1.0 - s)


def mass_critical_exponent(s):
    """p_m = (6s+2)/(s+1)."""
    return (6.0 * s + 2.0) / (s + 1.0)


def mass_exponent(s, p):
    """e with ||phi_omega||_2^2 = omega^e ||phi_1||_2^2."""
    return 2.0 / (p - 2.0) - 0.5 - 0.5 / s


class Regime(str, Enum):
    SUBCRITICAL = "Subcritical"
    CRITICAL = "Critical"
    SUPERCRITICAL = "Supercritical"
    NO_SOLITONS = "NoSolitons"


def classify_exponents(s, p, rtol=1e-12):
    pm = mass_critical_exponent(s)
    if p >= critical_exponent(s):
        return Regime.NO_SOLITONS
    if math.isclose(p, pm, rel_tol=rtol, abs_tol=0.0):
        return Regime.CRITICAL
    return Regime.SUBCRITICAL if p < pm else Regime.SUPERCRITICAL


@dataclass(frozen=True)
class ProblemParams:
    s: float
    p: float
    omega: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.s <= 1.0:
            raise ValidationError(f"s must lie in (0, 1], got {self.s}")
        if not self.p > 2.0:
            raise ValidationError(f"p must exceed 2, got {self.p}")
        if not self.omega > 0.0:
            raise ValidationError(f"omega must be positive, got {self.omega}")

    @property
    def regime(self):
        return classify_exponents(self.s, self.p)

    def require_solitons(self):
        if self.regime is Regime.NO_SOLITONS:
            raise ValidationError(
                f"no solitary waves for p={self.p} >= p_s({self.s})={critical_exponent(self.s):.6g}")

    def with_omega(self, omega):
        return ProblemParams(self.s, self.p, omega)


# ----------------------------------------------------------- integral pieces

def quadratic_parts(values, grid, s):
    """(int |u_x|^2, int |D_y^s u|^2, int u^2) by Parseval on the rfft half-plane."""
    c = sfft.rfft2(values)
    w = np.abs(c) ** 2
    w[:, 1:grid.ny // 2] *= 2.0
    scale = grid.cell / (grid.nx * grid.ny)
    tx = np.sum(_symbol_r(grid, MultiplierSymbol("second_x")) * w) * scale
    ty = np.sum(_symbol_r(grid, MultiplierSymbol("frac_y", s)) * w) * scale
    m = np.sum(values**2) * grid.cell
    return float(tx), float(ty), float(m)


def _lp_power(values, grid, q):
    return float(np.sum(np.abs(values) ** q) * grid.cell)


@dataclass
class PohozaevReport:
    r_scale: float
    r_energy: float
    r_mass: float
    m: float
    t_kin: float
    v: float
    t_x: float = 0.0
    t_y: float = 0.0

    @property
    def max_residual(self):
        return max(self.r_scale, self.r_energy, self.r_mass)


def pohozaev_residuals(u, params):
    """Relative residuals of the scaling, energy and mass identities."""
    s, p, om = params.s, params.p, params.omega
    tx, ty, m = quadratic_parts(u.values, u.grid, s)
    v = _lp_power(u.values, u.grid, p)
    t = tx + ty
    k = (s + 1.0) * (p - 2.0) / (2.0 * p)
    r_scale = abs(s * t - k * v) / (s * t) if t > 0 else math.inf
    r_energy = abs(t + om * m - v) / v if v > 0 else math.inf
    r_mass = abs(om * m - (1.0 - k / s) * v) / (om * m) if m > 0 else math.inf
    return PohozaevReport(r_scale, r_energy, r_mass, m, t, v, tx, ty)


def weinstein_J(u, params):
    tx, ty, m = quadratic_parts(u.values, u.grid, params.s)
    lp = _lp_power(u.values, u.grid, params.p)
    if not lp > 0:
        raise ValidationError("Weinstein functional undefined for zero field")
    return (tx + ty + params.omega * m) / lp ** (2.0 / params.p)


def lagrange_constant(capital_phi, params, check=True):
    tx, ty, m = quadratic_parts(capital_phi.values, capital_phi.grid, params.s)
    lp = _lp_power(capital_phi.values, capital_phi.grid, params.p)
    if check and abs(lp ** (1.0 / params.p) - 1.0) > 1e-10:
        raise ValidationError("lagrange_constant expects ||Phi||_p = 1")
    return (tx + ty + params.omega * m) / lp


def gn_quotient(u, q, s):
    """int |u|^q over the anisotropic Gagliardo-Nirenberg denominator."""
    if not 2.0 < q <= critical_exponent(s):
        raise ValidationError(f"q={q} outside (2, p_s({s})]")
    tx, ty, m = quadratic_parts(u.values, u.grid, s)
    if min(tx, ty, m) <= 0:
        raise ValidationError("a denominator factor of the GN quotient vanishes")
    a = q / 2.0 - (q - 2.0) * (s + 1.0) / (4.0 * s)
    return _lp_power(u.values, u.grid, q) / (
        m**a * tx ** ((q - 2.0) / 4.0) * ty ** ((q - 2.0) / (4.0 * s)))


# --------------------------------------------------------------- decay fits

@dataclass
class DecayFitReport:
    theta_x: float
    alpha_y: float
    fit_windows: tuple
    fit_r2: tuple


def _linfit(t, v):
    A = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((v - pred) ** 2))
    ss_tot = float(np.sum((v - v.mean()) ** 2))
    return float(coef[0]), 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


def default_decay_windows(grid, omega=1.0):
    """x: [8, 0.8 * lx/2] in units of 1/sqrt(omega); y: [0.1, 0.4] * ly/2."""
    hx = grid.lx / 2
    hy = grid.ly / 2
    r = 1.0 / math.sqrt(omega)
    xw = (min(8.0 * r, 0.3 * hx), min(20.0 * r, 0.8 * hx))
    yw = (0.1 * hy, 0.4 * hy)
    return xw, yw


def decay_fit(phi, params, x_window=None, y_window=None, min_samples=8):
    """Exponential x-rate and algebraic y-exponent of phi along the centre lines."""
    g = phi.grid
    vals = phi.values
    cx, cy = g.center
    if x_window is None or y_window is None:
        dxw, dyw = default_decay_windows(g, params.omega)
        x_window = x_window or dxw
        y_window = y_window or dyw
    floor = 1e-12 * float(vals.max())
    xs = g.x[cx:]
    ys = g.y[cy:]
    line_x = vals[cx:, cy]
    line_y = vals[cx, cy:]
    for (lo, hi), half, name in ((x_window, g.lx / 2, "x"), (y_window, g.ly / 2, "y")):
        if not 0 <= lo < hi:
            raise ValidationError(f"bad {name} window {lo, hi}")
        if hi > 0.9 * half:
            raise ResolutionError(f"{name} window reaches within 10% of the periodic boundary")
    sx = (xs >= x_window[0]) & (xs <= x_window[1])
    sy = (ys >= y_window[0]) & (ys <= y_window[1])
    if sx.sum() < min_samples or sy.sum() < min_samples:
        raise ValidationError("decay window holds fewer than 8 samples")
    if np.any(line_x[sx] <= floor) or np.any(line_y[sy] <= floor):
        raise ResolutionError("decay window extends below the 1e-12 floor")
    slope_x, r2x = _linfit(xs[sx], np.log(line_x[sx]))
    slope_y, r2y = _linfit(np.log(ys[sy]), np.log(line_y[sy]))
    return DecayFitReport(-slope_x, slope_y, (tuple(x_window), tuple(y_window)), (r2x, r2y))


# --------------------------------------------------------- Petviashvili solve

@dataclass
class SolverConfig:
    gamma: float | None = None  # defaults to (p-1)/(p-2)
    tol: float = 1e-10
    max_iter: int = 3000
    symmetrize_every: int = 10
    symmetrize_until: float = 1e-6  # rearrange only while the residual exceeds this
    certify_slack: float = 1e-8  # bell-shape tolerance of the final field, relative to max
    dealias: bool = False  # 2/3-rule mask on the nonlinearity
    filter_nyquist: bool = False  # drop only the Nyquist modes of the nonlinearity
    tail_tol: float = 1e-3  # y-boundary value / max
    x_tail_tol: float = 1e-10  # x-boundary value / max
    auto_grow: bool = True
    max_grow: int = 3
    even: bool | None = None  # None: quadrant solver when the initial guess is even-even
    max_wall_time: float | None = None


@dataclass(eq=False)
class GroundStateSolution:
    params: ProblemParams
    phi: SymmetrizedField
    capital_phi: RealField
    j_value: float
    lagrange_c: float
    residuals: PohozaevReport
    decay: DecayFitReport | None = None
    iterations: int = 0
    tol: float = 0.0
    fixed_point_residual: float = 0.0
    stabilizer: float = 1.0
    history: list = field(default_factory=list)

    @property
    def grid(self):
        return self.phi.grid

    @property
    def field(self):
        return self.phi.field

    @property
    def values(self):
        return self.phi.values

    def summary(self):
        return {
            "s": self.params.s, "p": self.params.p, "omega": self.params.omega,
            "grid": asdict(self.grid),
            "j_value": self.j_value, "lagrange_c": self.lagrange_c,
            "residuals": asdict(self.residuals),
            "decay": None if self.decay is None else asdict(self.decay),
            "iterations": self.iterations, "tol": self.tol,
            "fixed_point_residual": self.fixed_point_residual,
            "certified": self.phi.certified,
        }


def auto_guess(grid, params):
    """Anisotropic Gaussian with amplitude chosen so the stabilizer starts at 1."""
    X, Y = grid.mesh()
    g = np.exp(-params.omega * X**2 - params.omega ** (1.0 / params.s) * Y**2)
    tx, ty, m = quadratic_parts(g, grid, params.s)
    lp = _lp_power(g, grid, params.p)
    amp = ((tx + ty + params.omega * m) / lp) ** (1.0 / (params.p - 2.0))
    return RealField(grid, amp * g)


def _is_even_even(a, tol=1e-12):
    scale = max(float(np.abs(a).max()), 1e-300)
    return (np.abs(a - reflect(a, 0)).max() <= tol * scale
            and np.abs(a - reflect(a, 1)).max() <= tol * scale)


def _iterate(space, params, u, cfg):
    s, p, om = params.s, params.p, params.omega
    sym = space.symbol(full_symbol(s, om))
    mask = space.mask if cfg.dealias else (space.nyquist_mask if cfg.filter_nyquist else None)
    gamma = cfg.gamma if cfg.gamma is not None else (p - 1.0) / (p - 2.0)
    n0 = math.sqrt(space.dot(u, u))
    t0 = time.monotonic()
    history = []
    res = change = math.inf
    M = math.nan
    for it in range(1, cfg.max_iter + 1):
        uh = space.fwd(u)
        N, _ = _kernels.clipped_power(u, p - 1.0)
        Nh = space.fwd(N)
        if mask is not None:
            Nh *= mask
        Luh = sym * uh
        nu = space.spec_dot(Nh, uh)
        uu = space.spec_dot(uh, uh)
        if not (nu > 0 and math.isfinite(nu)):
            raise CollapseError("iterate lost positivity of <u^(p-1), u>", residual=res,
                                history=history, last=u)
        M = space.spec_dot(Luh, uh) / nu
        r = Luh - Nh
        res = math.sqrt(space.spec_dot(r, r) / uu)
        # the nonlinearity sees max(u, 0); aliasing undershoots of the iterate
        # itself are left alone (clipping them would create a spurious fixed point)
        un = space.inv((M**gamma) * Nh / sym)
        if cfg.symmetrize_every and it % cfg.symmetrize_every == 0 and res > cfg.symmetrize_until:
            un = space.symmetrize(un)
        nn = math.sqrt(space.dot(un, un))
        if not math.isfinite(nn):
            raise NonConvergenceError("iterate became non-finite", residual=res, history=history)
        if nn < 1e-12 * n0:
            raise CollapseError("iterate collapsed to zero", residual=res, history=history, last=u)
        d = un - u
        change = math.sqrt(space.dot(d, d)) / nn
        history.append((it, M, res, change))
        u = un
        if change < cfg.tol and res < cfg.tol:
            break
        if cfg.max_wall_time is not None and time.monotonic() - t0 > cfg.max_wall_time:
            raise SolverTimeout(f"wall-time budget {cfg.max_wall_time}s exceeded at iteration {it}",
                                residual=res, history=history, last=u)
    else:
        raise NonConvergenceError(
            f"Petviashvili did not converge in {cfg.max_iter} iterations "
            f"(residual {res:.3e}, change {change:.3e})", residual=res, history=history, last=u)
    return np.maximum(u, 0.0), it, M, history


def _fixed_point_residual(values, grid, params, dealias=False, filter_nyquist=False):
    sym = _symbol_r(grid, full_symbol(params.s, params.omega))
    uh = sfft.rfft2(values)
    Nh = sfft.rfft2(np.maximum(values, 0.0) ** (params.p - 1.0))
    if dealias:
        Nh *= FullSpace(grid).mask
    elif filter_nyquist:
        Nh *= FullSpace(grid).nyquist_mask
    r = sfft.irfft2(sym * uh - Nh, s=grid.shape)
    return float(np.sqrt(np.sum(r**2) / np.sum(values**2)))


def petviashvili_solve(params, grid=None, init=None, cfg=None):
    """Positive axially symmetric ground state by Petviashvili iteration.

    ``init`` is a RealField (non-negative) or None for the automatic
    anisotropic Gaussian.  Raises ValidationError when p >= p_s(s).
    """
    params.require_solitons()
    cfg = cfg or SolverConfig()
    if grid is None:
        grid = init.grid if init is not None else GridSpec(128, 512, 48.0, 256.0)
    for attempt in range(cfg.max_grow + 1):
        u0 = auto_guess(grid, params) if init is None else init
        if u0.grid != grid:
            raise ValidationError("initial guess lives on a different grid")
        if np.any(u0.values < 0):
            raise ValidationError("initial guess must be non-negative")
        even = cfg.even
        if even is None:
            even = _is_even_even(u0.values)
        space = EvenSpace(grid) if even else FullSpace(grid)
        u, it, M, history = _iterate(space, params, space.from_full(u0.values), cfg)
        bx, by = space.boundary_ratios(u)
        if bx <= cfg.x_tail_tol and by <= cfg.tail_tol:
            break
        if not cfg.auto_grow or attempt == cfg.max_grow:
            raise ResolutionError(
                f"profile reaches the box edge (x ratio {bx:.2e}, y ratio {by:.2e}) on {grid}")
        fx = 2 if bx > cfg.x_tail_tol else 1
        fy = 2 if by > cfg.tail_tol else 1
        log.info("growing box by (%d, %d): boundary ratios %.2e, %.2e", fx, fy, bx, by)
        grid = GridSpec(grid.nx * fx, grid.ny * fy, grid.lx * fx, grid.ly * fy)
        init = None
    values = space.to_full(u)
    return _finish(params, grid, values, cfg, it, M, history)


def _finish(params, grid, values, cfg, iterations=0, M=1.0, history=()):
    p = params.p
    lp = _lp_power(values, grid, p) ** (1.0 / p)
    cap = RealField(grid, values / lp)
    C = lagrange_constant(cap, params)
    phi_vals = C ** (1.0 / (p - 2.0)) * cap.values
    phi = SymmetrizedField(RealField(grid, phi_vals), is_bell_shaped(phi_vals, cfg.certify_slack))
    decay = None
    try:
        decay = decay_fit(phi.field, params)
    except (ValidationError, ResolutionError):
        pass
    return GroundStateSolution(
        params=params, phi=phi, capital_phi=cap, j_value=weinstein_J(cap, params),
        lagrange_c=C, residuals=pohozaev_residuals(phi.field, params), decay=decay,
        iterations=iterations, tol=cfg.tol,
        fixed_point_residual=_fixed_point_residual(phi_vals, grid, params, cfg.dealias,
                                                  cfg.filter_nyquist),
        stabilizer=M, history=list(history))


def solution_from_field(params, f, cfg=None):
    """Wrap an already converged field (e.g. a Newton iterate) as a GroundStateSolution."""
    return _finish(params, f.grid, np.maximum(f.values, 0.0), cfg or SolverConfig())


# ------------------------------------------------------------------ scaling

def scale_soliton(sol, omega_target, target_grid=None, tail_tol=None):
    """phi_omega(x, y) = r^(1/(p-2)) phi(r^(1/2) x, r^(1/(2s)) y), r = omega_target/omega.

    The samples are reused on the box shrunk by r^(-1/2), r^(-1/(2s)); with
    ``target_grid`` the result is interpolated spectrally onto that grid.
    """
    if not omega_target > 0:
        raise ValidationError("omega_target must be positive")
    s, p = sol.params.s, sol.params.p
    r = omega_target / sol.params.omega
    params = sol.params.with_omega(omega_target)
    g = sol.grid.scaled(r**-0.5, r ** (-0.5 / s))
    f = RealField(g, r ** (1.0 / (p - 2.0)) * sol.values)
    if target_grid is not None and target_grid != g:
        if target_grid.lx > g.lx * (1 + 1e-12) or target_grid.ly > g.ly * (1 + 1e-12):
            raise ResolutionError("target box exceeds the rescaled source box")
        f = interpolate(f, target_grid)
        m = float(np.abs(f.values).max())
        bx = np.abs(f.values[0, :]).max() / m
        by = np.abs(f.values[:, 0]).max() / m
        tt = SolverConfig().tail_tol if tail_tol is None else tail_tol
        if by > tt or bx > 1e-8:
            raise ResolutionError(f"target grid truncates the rescaled profile ({bx:.2e}, {by:.2e})")
    out = _finish(params, f.grid, f.values, SolverConfig(tol=sol.tol))
    out.iterations = 0
    return out


# ------------------------------------------------------------- persistence

def save_solution(sol, prefix):
    """Write ``prefix.anls`` (field dump of phi) and ``prefix.json`` sidecar."""
    write_field(f"{prefix}.anls", sol.field)
    with open(f"{prefix}.json", "w") as fh:
        json.dump(_round_trip(sol.summary()), fh, indent=2, sort_keys=True)


def load_solution(prefix):
    f = read_field(f"{prefix}.anls")
    with open(f"{prefix}.json") as fh:
        meta = json.load(fh)
    params = ProblemParams(meta["s"], meta["p"], meta["omega"])
    sol = _finish(params, f.grid, f.values, SolverConfig(tol=meta.get("tol", 1e-10)))
    sol.iterations = meta.get("iterations", 0)
    return sol


def _round_trip(obj):
    """Floats rendered with 17 significant digits (exact double round trip)."""
    if isinstance(obj, float):
        return float(f"{obj:.17g}")
    if isinstance(obj, dict):
        return {k: _round_trip(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_trip(v) for v in obj]
    return obj
