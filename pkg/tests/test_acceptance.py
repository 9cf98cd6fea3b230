"""Acceptance criteria 1-10.

Every test prints one ``criterion N: PASS|FAIL ...`` line to the terminal
(outside pytest's capture) and then asserts.  The full module takes on the
order of an hour on one core; ``-m "not slow"`` skips it.
"""
import math
import time

import numpy as np
import pytest
from scipy import linalg

from anls import GridSpec, ProblemParams, RealField, SolverConfig, petviashvili_solve, scale_soliton
from anls.continuation import compare_isotropic_limit, continue_branch, trace_bounds
from anls.evolution import measure_growth_rate, soliton_run, strang_order, time_reversal_error
from anls.green import kernel_decay_slope
from anls.grid import spectral_derivative
from anls.groundstate import critical_exponent, mass_critical_exponent
from anls.linearization import (EVEN_EVEN, ODD_EVEN, EVEN_ODD, ODD_ODD, LinearizedPair,
                                apply_Lminus, apply_Lplus, lowest_eigs, morse_index, solve_Lplus,
                                unstable_eigenvalue, vk_report)
from anls.shooting import radial_ground_state
from anls.sweep import auto_grid, frontier, run_sweep

from conftest import TINY_CFG, TINY_GRID
from oracles import dense_operator, sector_basis, sector_eigs

pytestmark = pytest.mark.slow


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail, t0):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}  [{time.time() - t0:.0f} s]")
        return ok
    return emit


def _rel(a, b):
    return float(np.linalg.norm(a) / np.linalg.norm(b))


# ----------------------------------------------------------------- 1

# (s, p) -> (ny, ly); nx = 256, lx = 48.  The y box must hold the algebraic
# tail |y|^-(1+2s) down to the 1e-6 level of the integral identities.
POHOZAEV_GRIDS = {
    (0.4, 2.5): (131072, 32768.0), (0.4, 3.0): (131072, 8192.0),
    (0.5, 2.5): (65536, 8192.0), (0.5, 3.0): (65536, 4096.0),
    (0.6, 2.5): (32768, 4096.0), (0.6, 3.0): (32768, 4096.0),
    (0.8, 2.5): (8192, 1024.0), (0.8, 3.0): (8192, 1024.0),
}


@pytest.mark.parametrize("s,p", sorted(POHOZAEV_GRIDS))
def test_criterion_1_pohozaev(s, p, report):
    t0 = time.time()
    ny, ly = POHOZAEV_GRIDS[(s, p)]
    # the p = 2.5 profile is wider in x and needs lx = 56 for the x tail check
    lx = 56.0 if p == 2.5 else 48.0
    sol = petviashvili_solve(ProblemParams(s, p), GridSpec(256, ny, lx, ly),
                             cfg=SolverConfig(tol=1e-9, auto_grow=False))
    r = sol.residuals
    ok = max(r.r_scale, r.r_energy, r.r_mass) <= 1e-6
    report(1, ok, f"(s,p)=({s},{p}) r_scale={r.r_scale:.2e} r_energy={r.r_energy:.2e} "
                  f"r_mass={r.r_mass:.2e} on {sol.grid.nx}x{sol.grid.ny}", t0)
    assert ok


# ----------------------------------------------------------------- 2

def test_criterion_2_scaling(report):
    t0 = time.time()
    ny, ly = 16384, 1024.0
    g1 = GridSpec(256, ny, 48.0, ly)
    # the omega = 2 box, mapped back to omega = 1, has the same spacing and twice the y extent
    g2 = GridSpec(256, 2 * ny, 48.0 / math.sqrt(2.0), ly)
    s1 = petviashvili_solve(ProblemParams(0.5, 3.0, 1.0), g1)
    s2 = petviashvili_solve(ProblemParams(0.5, 3.0, 2.0), g2)
    ratio = s2.residuals.m / s1.residuals.m
    r_err = abs(ratio / math.sqrt(2.0) - 1.0)
    scaled = scale_soliton(s1, 2.0)
    centre = s2.values[:, ny // 2: ny // 2 + ny]
    l2 = _rel(scaled.values - centre, centre)
    ok = r_err <= 1e-3 and l2 <= 1e-4
    report(2, ok, f"mass ratio {ratio:.8f} (rel err {r_err:.1e}), scale_soliton vs direct L2 {l2:.1e}", t0)
    assert ok


# ----------------------------------------------------------------- 3

# the p = 4 profile needs nx = 512 in x and dy = 1/64 for the y translation mode
SPECTRAL_GRIDS = {3.0: GridSpec(256, 4096, 48.0, 128.0), 4.0: GridSpec(512, 4096, 48.0, 64.0)}


@pytest.mark.parametrize("p", [3.0, 4.0])
def test_criterion_3_spectral_structure(p, report):
    t0 = time.time()
    sol = petviashvili_solve(ProblemParams(0.5, p), SPECTRAL_GRIDS[p])
    pair = LinearizedPair(sol)
    g, phi = sol.grid, sol.values
    kern = _rel(apply_Lminus(pair, sol.field).values, phi)
    trans = []
    for ax in (0, 1):
        d = spectral_derivative(phi, g, ax)
        trans.append(_rel(apply_Lplus(pair, RealField(g, d)).values, d))
    n_plus = morse_index(pair, "plus")
    n_minus = morse_index(pair, "minus")
    gap = lowest_eigs(pair, "minus", None, 2)[1].value
    ok = (n_plus == 1 and n_minus == 0 and kern <= 1e-6 and max(trans) <= 1e-4 and gap > 0)
    report(3, ok, f"p={p} n(L+)={n_plus} n(L-)={n_minus} |L-phi|={kern:.1e} "
                  f"|L+phi_x|={trans[0]:.1e} |L+phi_y|={trans[1]:.1e} gap_minus={gap:.3g}", t0)
    assert ok


# ----------------------------------------------------------------- 4

def _d11(p):
    sol = petviashvili_solve(ProblemParams(0.5, p), auto_grid(0.5, p))
    return vk_report(LinearizedPair(sol), with_lambda=False, with_morse=False)


def test_criterion_4_vk_threshold(report):
    t0 = time.time()
    pc = 10.0 / 3.0
    ps = [round(2.6 + 0.2 * k, 10) for k in range(8)]
    reps = {p: _d11(p) for p in ps}
    sign_ok = all(np.sign(reps[p].d11_solve) == np.sign(p - pc) for p in ps if abs(p - pc) >= 0.1)
    pair_ok = all(len({np.sign(r.d11_closed), np.sign(r.d11_scaling), np.sign(r.d11_solve)}) == 1
                  for r in reps.values())
    # refine between the coarse points around the threshold
    for p in (3.25, 3.3, 3.35):
        reps[p] = _d11(p)
    fine = sorted(reps)
    bracket = None
    for a, b in zip(fine, fine[1:]):
        if np.sign(reps[a].d11_solve) != np.sign(reps[b].d11_solve):
            bracket = (a, b)
            break
    br_ok = bracket is not None and 3.23 <= bracket[0] and bracket[1] <= 3.43
    ok = sign_ok and pair_ok and br_ok
    report(4, ok, f"signs {'ok' if sign_ok else 'WRONG'}, pairwise {'ok' if pair_ok else 'DISAGREE'}, "
                  f"sign change in {bracket}", t0)
    assert ok


# ----------------------------------------------------------------- 5

def test_criterion_5_unstable_mode(report):
    t0 = time.time()
    sol4 = petviashvili_solve(ProblemParams(0.5, 4.0), GridSpec(256, 1024, 48.0, 64.0))
    mode = unstable_eigenvalue(LinearizedPair(sol4))
    lam = None if mode is None else mode.value
    g4 = measure_growth_rate(sol4, "random", dt=1e-3, t_end=10.0, sample_every=5)
    ok4 = (lam is not None and lam > 0 and mode.residual <= 1e-6 and g4.grew
           and abs(g4.lambda_est - lam) <= 0.1 * lam)
    sol3 = petviashvili_solve(ProblemParams(0.5, 3.0), GridSpec(256, 512, 48.0, 128.0))
    none3 = unstable_eigenvalue(LinearizedPair(sol3)) is None
    g3 = measure_growth_rate(sol3, "random", dt=1e-3, t_end=20.0, sample_every=20)
    bound = float(g3.deviation.max() / g3.amplitude)
    ok3 = none3 and not g3.grew and bound <= 10.0
    ok = ok4 and ok3
    lam_txt = "none" if lam is None else f"{lam:.4f} (residual {mode.residual:.1e})"
    report(5, ok, f"p=4: lambda {lam_txt}, growth fit {g4.lambda_est:.4f}; "
                  f"p=3: eigenvalue {'none' if none3 else 'FOUND'}, max deviation {bound:.2f}x", t0)
    assert ok


# ----------------------------------------------------------------- 6

def test_criterion_6_evolution(report):
    t0 = time.time()
    sol = petviashvili_solve(ProblemParams(0.5, 3.0), GridSpec(256, 512, 48.0, 128.0))
    err, drift, _ = soliton_run(sol, 5.0, 1e-3)
    rev = time_reversal_error(sol.field, sol.params, 1e-3, 200)
    breather = RealField(sol.grid, 1.1 * sol.values)
    orders, _ = strang_order(breather, sol.params, 0.5, [0.02, 0.01, 0.005, 0.0025])
    ok = err <= 1e-4 and drift <= 1e-10 and rev <= 1e-11 and np.all(np.abs(orders - 2.0) <= 0.1)
    report(6, ok, f"shape error {err:.1e}, mass drift {drift:.1e}, reversal {rev:.1e}, "
                  f"orders {np.round(orders, 4).tolist()}", t0)
    assert ok


# ----------------------------------------------------------------- 7

def test_criterion_7_decay(report):
    t0 = time.time()
    s = 0.5
    sol = petviashvili_solve(ProblemParams(s, 3.0), GridSpec(256, 1024, 48.0, 200.0))
    d = sol.decay
    a = 1.0 + 2.0 * s
    slope, r2, _, _ = kernel_decay_slope(s)
    ok = (d is not None and 0.9 <= d.theta_x <= 1.1 and -1.1 * a <= d.alpha_y <= -0.9 * a
          and abs(slope + a) <= 0.1 * a)
    report(7, ok, f"theta_x={d.theta_x:.4f} alpha_y={d.alpha_y:.4f} (target {-a}), "
                  f"kernel slope {slope:.4f} (r2 {r2:.5f})", t0)
    assert ok


# ----------------------------------------------------------------- 8

def _dense_checks(p):
    sol = petviashvili_solve(ProblemParams(0.5, p), TINY_GRID, cfg=TINY_CFG)
    pair = LinearizedPair(sol)
    g = sol.grid
    n = g.nx * g.ny
    worst_apply, worst_eig = 0.0, 0.0
    dense = {}
    for which, apply in (("plus", apply_Lplus), ("minus", apply_Lminus)):
        A = dense_operator(g, 0.5, 1.0, pair.coef(which) * pair.potential.values)
        dense[which] = A
        E = np.eye(n)
        cols = np.column_stack([apply(pair, E[:, j].reshape(g.shape)).values.ravel() for j in range(n)])
        worst_apply = max(worst_apply, float(np.abs(cols - A).max()))
        ref = np.linalg.eigvalsh(A)[:3]
        got = [e.value for e in lowest_eigs(pair, which, None, 3, tol=1e-9)]
        worst_eig = max(worst_eig, float(np.abs(np.array(got) - ref).max()))
        for sec in (EVEN_EVEN, ODD_EVEN, EVEN_ODD, ODD_ODD):
            ref = sector_eigs(A, sector_basis(g, sec.x_parity, sec.y_parity))[:2]
            got = [e.value for e in lowest_eigs(pair, which, sec, 2, tol=1e-9)]
            worst_eig = max(worst_eig, float(np.abs(np.array(got) - ref).max()))
    morse_ok = (morse_index(pair, "plus") == int(np.sum(np.linalg.eigvalsh(dense["plus"]) < -1e-6))
                and morse_index(pair, "minus") == int(np.sum(np.linalg.eigvalsh(dense["minus"]) < -1e-6)))
    v = solve_Lplus(pair, sol.field, tol=1e-11)
    ref = np.linalg.solve(dense["plus"], sol.values.ravel())
    worst_solve = float(np.abs(v.values.ravel() - ref).max() / np.abs(ref).max())
    Q = sector_basis(g, "even", "even")
    Z = np.zeros((Q.shape[1],) * 2)
    ev = linalg.eigvals(np.block([[Z, -Q.T @ dense["minus"] @ Q], [Q.T @ dense["plus"] @ Q, Z]]))
    real = ev[np.abs(ev.imag) < 1e-8 * np.abs(ev).max()].real
    lam_ref = real.max() if real.max() > 1e-6 else None
    mode = unstable_eigenvalue(pair, tol=1e-8)
    if lam_ref is None:
        worst_lam = 0.0 if mode is None else math.inf
    else:
        worst_lam = math.inf if mode is None else abs(mode.value - lam_ref)
    return worst_apply, max(worst_eig, worst_solve, worst_lam), morse_ok


def test_criterion_8_dense_oracle(report):
    t0 = time.time()
    res = {p: _dense_checks(p) for p in (3.0, 4.0)}
    apply_err = max(r[0] for r in res.values())
    iter_err = max(r[1] for r in res.values())
    morse_ok = all(r[2] for r in res.values())
    ok = apply_err <= 1e-12 and iter_err <= 1e-8 and morse_ok
    report(8, ok, f"32x64: apply {apply_err:.1e}, eigen/solve/lambda {iter_err:.1e}, "
                  f"Morse {'match' if morse_ok else 'MISMATCH'}", t0)
    assert ok


# ----------------------------------------------------------------- 9

def test_criterion_9_isotropic_limit(report):
    t0 = time.time()
    start = petviashvili_solve(ProblemParams(0.8, 4.0), GridSpec(128, 256, 32.0, 64.0))
    trace = continue_branch(start, 0.999)
    kmin = min(pt.kernel_min for pt in trace.points)
    cmp = compare_isotropic_limit(trace.endpoint, 4.0)
    ode = radial_ground_state(4.0).ode_residual()
    bounds = trace_bounds(trace)
    ok = (trace.terminated_reason == "ReachedTarget" and kmin > 0 and cmp["relative_l2"] <= 1e-2
          and ode <= 1e-8)
    report(9, ok, f"{trace.terminated_reason} with {len(trace.points)} points, min kernel {kmin:.4f}, "
                  f"endpoint rel L2 {cmp['relative_l2']:.1e}, oracle ODE residual {ode:.1e}, "
                  f"max/min M {bounds['m']:.3f}", t0)
    assert ok


# ----------------------------------------------------------------- 10

def test_criterion_10_sweep(report):
    t0 = time.time()
    h = 0.25
    s_vals = [round(0.3 + 0.1 * k, 10) for k in range(7)]
    p_vals = [round(2.5 + h * k, 10) for k in range(14)]
    res = run_sweep(s_vals, p_vals, tol=1e-9)
    front = frontier(res)
    track = []
    for s, (last_stable, first_unstable) in front.items():
        pm = mass_critical_exponent(s)
        track.append(last_stable is not None and first_unstable is not None
                     and last_stable <= pm + h and first_unstable >= pm - h
                     and first_unstable - last_stable <= h + 1e-9)
    ns = [r for r in res.rows if r.p >= critical_exponent(r.s)]
    ns_ok = all(r.verdict == "NoSolitons" and not r.solver_launched for r in ns)
    failed = [r for r in res.rows if r.verdict == "Failed"]
    ok = all(track) and ns_ok and not failed
    txt = ", ".join(f"{s}: ({a}, {b}) vs {mass_critical_exponent(s):.3f}" for s, (a, b) in front.items())
    report(10, ok, f"frontier {txt}; {len(ns)} NoSolitons cells skipped; {len(failed)} failed", t0)
    assert ok
