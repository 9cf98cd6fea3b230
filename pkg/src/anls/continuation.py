"""Ground-state branch in the fractional order s at fixed p and omega.

Zeros of F(u) = u - R_s[u^(p-1)], R_s = (-d_xx + (-d_yy)^s + omega)^(-1),
are corrected by Newton's method with Jacobian v - R_s[(p-1) u^(p-2) v]
solved by GMRES.  Everything runs in the even-even sector (quadrant
storage), where the linearization has no translation kernel.
"""
from dataclasses import asdict, dataclass, field
import json
import logging
import math

import numpy as np
from scipy import optimize
from scipy.sparse.linalg import LinearOperator, gmres

from . import __version__
from ._spaces import EvenSpace, full_symbol
from .errors import NonConvergenceError, ValidationError
from .grid import RealField
from .groundstate import (ProblemParams, Regime, classify_exponents, pohozaev_residuals,
                          solution_from_field)
from .linearization import EVEN_EVEN, LinearizedPair, lowest_eigs
from .shooting import radial_ground_state, radial_on_grid

log = logging.getLogger(__name__)


@dataclass
class BranchPoint:
    s: float
    field: RealField
    xp_norm: float
    apriori: object  # PohozaevReport
    kernel_min: float
    newton_residual: float
    newton_steps: int = 0
    omega: float = 1.0
    min_value: float = 0.0

    def summary(self):
        return {
            "s": self.s, "omega": self.omega, "xp_norm": self.xp_norm,
            "kernel_min": self.kernel_min, "newton_residual": self.newton_residual,
            "newton_steps": self.newton_steps, "apriori": asdict(self.apriori),
            "min_value": self.min_value,
        }


@dataclass
class BranchTrace:
    p: float
    points: list = field(default_factory=list)
    terminated_reason: str = "ReachedTarget"
    steps: list = field(default_factory=list)  # (s_from, ds, accepted)

    @property
    def s_values(self):
        return [pt.s for pt in self.points]

    @property
    def endpoint(self):
        return self.points[-1]

    def to_jsonl(self, path):
        from .groundstate import _round_trip
        with open(path, "w") as fh:
            for pt in self.points:
                rec = dict(pt.summary(), p=self.p, anls_version=__version__)
                fh.write(json.dumps(_round_trip(rec), sort_keys=True) + "\n")


@dataclass(frozen=True)
class ContinuationConfig:
    ds_init: float = 0.02
    ds_min: float = 1e-4
    ds_max: float = 0.05
    tol: float = 1e-10
    max_newton: int = 12
    monitor_kernel: bool = True


# ------------------------------------------------------------------- Newton

class _NewtonSystem:
    def __init__(self, grid, s, p, omega):
        self.space = EvenSpace(grid)
        self.sym = self.space.symbol(full_symbol(s, omega))
        self.p = p

    def norm(self, a):
        return math.sqrt(self.space.dot(a, a))

    def F(self, u):
        N = np.maximum(u, 0.0) ** (self.p - 1.0)
        return u - self.space.inv(self.space.fwd(N) / self.sym)

    def jacobian(self, u):
        sp, shape = self.space, self.space.shape
        V = (self.p - 1.0) * np.maximum(u, 0.0) ** (self.p - 2.0)
        n = u.size

        def mv(x):
            v = x.reshape(shape)
            return (v - sp.inv(sp.fwd(V * v) / self.sym)).ravel()
        return LinearOperator((n, n), matvec=mv, dtype=float)


def newton_correct(guess, s, p, tol=1e-10, omega=1.0, max_steps=12, monitor_kernel=False):
    """Newton-Krylov correction of ``guess`` onto a zero of F at order s.

    Converged when ||F(u)||_2 <= tol ||u||_2.  Three consecutive residual
    increases count as divergence.
    """
    if classify_exponents(s, p) is Regime.NO_SOLITONS:
        raise ValidationError(f"no solitary waves for p={p} at s={s}")
    vals = guess.values
    if np.any(vals < 0):
        raise ValidationError("guess must be non-negative")
    sysm = _NewtonSystem(guess.grid, s, p, omega)
    sp = sysm.space
    u = sp.from_full(vals)
    if np.abs(sp.to_full(u) - vals).max() > 1e-10 * np.abs(vals).max():
        raise ValidationError("guess must be even-even")
    F = sysm.F(u)
    res = sysm.norm(F) / sysm.norm(u)
    history = [res]
    growth = 0
    steps = 0
    while res > tol:
        if steps >= max_steps:
            raise NonConvergenceError(f"Newton did not reach {tol:g} in {max_steps} steps "
                                      f"(residual {res:.2e})", residual=res, history=history,
                                      last=RealField(guess.grid, sp.to_full(u)))
        J = sysm.jacobian(u)
        rtol = max(1e-3 * min(res, 1.0), 1e-13)
        du, info = gmres(J, -F.ravel(), rtol=rtol, atol=0.0, restart=60, maxiter=20)
        u = u + du.reshape(sp.shape)
        steps += 1
        F = sysm.F(u)
        new = sysm.norm(F) / sysm.norm(u)
        growth = growth + 1 if new > res else 0
        res = new
        history.append(res)
        log.debug("newton s=%.4f step %d residual %.3e", s, steps, res)
        if not math.isfinite(res) or growth >= 3:
            raise NonConvergenceError(f"Newton diverged at s={s} (residual {res:.2e})",
                                      residual=res, history=history,
                                      last=RealField(guess.grid, sp.to_full(u)))
    full = sp.to_full(u)
    fld = RealField(guess.grid, np.maximum(full, 0.0))
    params = ProblemParams(s, p, omega)
    pt = BranchPoint(
        s=s, field=fld,
        xp_norm=fld.norm(2) + fld.norm(p),
        apriori=pohozaev_residuals(fld, params),
        kernel_min=math.nan, newton_residual=res, newton_steps=steps, omega=omega,
        min_value=float(full.min()))
    if monitor_kernel:
        pt.kernel_min = kernel_monitor(pt, p)
    return pt


# ------------------------------------------------------------- monitoring

def apriori_ratios(point, p):
    """M, T, V and the residuals of T + omega M = V and s T = (1+s)(p-2)/(2p) V."""
    a = point.apriori
    return {"m": a.m, "t": a.t_kin, "v": a.v,
            "ratio_scale": a.r_scale, "ratio_energy": a.r_energy}


def trace_bounds(trace):
    """max/min of M, T, V along a trace."""
    out = {}
    for key in ("m", "t", "v"):
        vals = np.array([apriori_ratios(pt, trace.p)[key] for pt in trace.points])
        out[key] = float(vals.max() / vals.min())
    return out


def kernel_monitor(point, p, tol=1e-8):
    """Smallest even-even eigenvalue of L+ above the single negative one.

    Meaningful only for points whose Newton residual met its tolerance.
    """
    sol = solution_from_field(ProblemParams(point.s, p, point.omega), point.field)
    eigs = lowest_eigs(LinearizedPair(sol), "plus", EVEN_EVEN, k=2, tol=tol)
    return float(eigs[1].value)


# ----------------------------------------------------------- continuation

def continue_branch(start, s_target, p=None, cfg=None):
    """March s upward from ``start`` with a secant predictor and Newton corrector.

    ``start`` is a GroundStateSolution (or BranchPoint).  On corrector
    failure ds is halved; below ds_min the trace ends with SolverFailure.
    """
    cfg = cfg or ContinuationConfig()
    if isinstance(start, BranchPoint):
        s0, omega, fld = start.s, start.omega, start.field
    else:
        s0, omega, fld = start.params.s, start.params.omega, start.field
        p = start.params.p if p is None else p
    if p is None:
        raise ValidationError("p is required when starting from a BranchPoint")
    if not s0 < s_target <= 1.0:
        raise ValidationError(f"need s0 < s_target <= 1, got {s0}, {s_target}")
    first = newton_correct(fld, s0, p, cfg.tol, omega, cfg.max_newton, cfg.monitor_kernel)
    trace = BranchTrace(p, [first])
    ds = cfg.ds_init
    while trace.points[-1].s < s_target:
        cur = trace.points[-1]
        s_new = min(cur.s + ds, s_target)
        if s_target - s_new < 0.25 * cfg.ds_min:
            s_new = s_target
        if len(trace.points) >= 2:
            prev = trace.points[-2]
            slope = (s_new - cur.s) / (cur.s - prev.s)
            pred = cur.field.values + slope * (cur.field.values - prev.field.values)
        else:
            pred = cur.field.values
        guess = RealField(cur.field.grid, np.maximum(pred, 0.0))
        try:
            pt = newton_correct(guess, s_new, p, cfg.tol, omega, cfg.max_newton, cfg.monitor_kernel)
        except NonConvergenceError as exc:
            trace.steps.append((cur.s, s_new - cur.s, False))
            ds *= 0.5
            log.info("corrector failed at s=%.5f (%s); ds -> %.2e", s_new, exc, ds)
            if ds < cfg.ds_min:
                trace.terminated_reason = "SolverFailure"
                return trace
            continue
        trace.steps.append((cur.s, s_new - cur.s, True))
        if cfg.monitor_kernel and not pt.kernel_min > 0:
            trace.points.append(pt)
            trace.terminated_reason = "KernelCollapse"
            return trace
        trace.points.append(pt)
        if pt.newton_steps <= 3:
            ds = min(1.5 * ds, cfg.ds_max)
    trace.terminated_reason = "ReachedTarget"
    return trace


# ----------------------------------------------------------- isotropic limit

def compare_isotropic_limit(endpoint, p, align=True):
    """Distances between the endpoint and the radial s = 1 ground state.

    The radial profile (omega = 1, rescaled to the endpoint's omega) is
    sampled on the endpoint grid at the centre that minimises the L2
    distance.
    """
    if endpoint.s < 0.99:
        raise ValidationError("compare_isotropic_limit needs an endpoint with s >= 0.99")
    prof = radial_ground_state(p)
    g = endpoint.field.grid
    om = endpoint.omega
    u = endpoint.field.values
    amp = om ** (1.0 / (p - 2.0))
    X, Y = g.mesh()
    sq = math.sqrt(om)

    def sample(c):
        return amp * prof(sq * np.hypot(X - c[0], Y - c[1]))

    def dist(c):
        return float(np.sqrt(np.sum((u - sample(c)) ** 2) * g.cell))

    c = np.zeros(2)
    if align:
        c = optimize.minimize(dist, c, method="Nelder-Mead",
                              options={"xatol": 1e-6, "fatol": 1e-14}).x
    ref = sample(c)
    nrm = float(np.sqrt(np.sum(u**2) * g.cell))
    return {"l2_distance": dist(c), "linf_distance": float(np.abs(u - ref).max()),
            "relative_l2": dist(c) / nrm, "center": (float(c[0]), float(c[1])),
            "oracle_amplitude": amp * prof.amplitude, "oracle_ode_residual": prof.ode_residual()}


__all__ = [
    "BranchPoint", "BranchTrace", "ContinuationConfig", "newton_correct", "continue_branch",
    "apriori_ratios", "trace_bounds", "kernel_monitor", "compare_isotropic_limit",
    "radial_on_grid",
]
