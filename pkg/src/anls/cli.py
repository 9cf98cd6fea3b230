"""Command-line front end: ``anls <command> [--config FILE] [--key value ...]``.

Configuration is a flat ``key = value`` text file; command-line flags
override it.  Unknown keys are rejected.  The merged configuration is
written to ``<output_dir>/effective_config.txt``.  Environment:
``ANLS_VERBOSE`` (0-2) sets the log level, ``ANLS_THREADS`` the FFT worker
count and ``ANLS_NUMBA=0`` selects the pure-numpy kernels.
"""
import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import ANLSError, ValidationError
from .grid import GridSpec, write_field

log = logging.getLogger("anls")

COMMANDS = ("solve", "stability", "evolve", "continue", "sweep", "kernel", "plotdata")

# key -> (type, default, help)
KEYS = {
    "s": (str, "0.5", "fractional order (sweep: range a:b:step)"),
    "p": (str, "3", "nonlinearity exponent (sweep: range a:b:step)"),
    "omega": (str, "1", "frequency (sweep: range)"),
    "nx": (int, 0, "grid points in x (0 = automatic grid)"),
    "ny": (int, 0, "grid points in y"),
    "lx": (float, 0.0, "box length in x"),
    "ly": (float, 0.0, "box length in y"),
    "grid_target": (str, "verdict", "automatic grid target: verdict or pohozaev"),
    "tol": (float, 1e-10, "solver tolerance"),
    "max_iter": (int, 3000, "Petviashvili iteration cap"),
    "output_dir": (str, "anls_out", "directory for results"),
    "seed": (int, 0, "seed for random perturbations"),
    "workers": (int, 1, "sweep worker processes"),
    "timeout": (float, 0.0, "per-solve wall-time budget in seconds (0 = none)"),
    "dump_fields": (bool, False, "write eigenvector / snapshot field dumps"),
    "with_lambda": (bool, True, "compute the unstable eigenvalue when unstable"),
    "with_morse": (bool, True, "compute Morse indices"),
    "dt": (float, 1e-3, "time step"),
    "t_end": (float, 5.0, "final time"),
    "record_every": (int, 0, "steps between snapshots (0 = none)"),
    "dealias": (bool, False, "2/3-rule mask after nonlinear steps"),
    "perturbation": (str, "none", "none, random or unstable"),
    "amplitude": (float, 0.0, "perturbation amplitude relative to ||phi||_2 (0 = 1e-5)"),
    "s_target": (float, 0.999, "continuation target order"),
    "ds_init": (float, 0.02, "initial continuation step"),
    "ds_min": (float, 1e-4, "smallest continuation step"),
    "dump_every": (int, 0, "keep a field dump every k-th branch point (0 = none)"),
    "order": (str, "full", "kernel order: full or half"),
    "y_min": (float, 5.0, "smallest y of the kernel decay fit"),
    "y_max": (float, 50.0, "largest y of the kernel decay fit"),
    "n_y": (int, 10, "number of kernel samples"),
    "kind": (str, "stability_map", "plot-data kind"),
    "inputs": (str, "", "comma-separated result files for plotdata"),
    "output": (str, "", "plot-data CSV path"),
}


def _to_bool(v):
    if isinstance(v, bool):
        return v
    t = str(v).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"not a boolean: {v!r}")


def _coerce(key, value):
    typ = KEYS[key][0]
    try:
        return _to_bool(value) if typ is bool else typ(value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad value for {key}: {value!r}") from exc


def read_config_file(path):
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{n}: expected key = value")
            k, v = (t.strip() for t in line.split("=", 1))
            if k not in KEYS:
                raise ValidationError(f"{path}:{n}: unknown key {k!r}")
            out[k] = v
    return out


def build_config(command, file_values=None, overrides=None):
    cfg = {k: spec[1] for k, spec in KEYS.items()}
    for src in (file_values or {}, overrides or {}):
        for k, v in src.items():
            if k not in KEYS:
                raise ValidationError(f"unknown key {k!r}")
            cfg[k] = _coerce(k, v)
    cfg["command"] = command
    return cfg


def write_effective_config(cfg):
    os.makedirs(cfg["output_dir"], exist_ok=True)
    with open(os.path.join(cfg["output_dir"], "effective_config.txt"), "w") as fh:
        for k in sorted(cfg):
            v = cfg[k]
            fh.write(f"{k} = {f'{v:.17g}' if isinstance(v, float) else v}\n")


def _dump(obj, path):
    from .groundstate import _round_trip
    obj = dict(obj, anls_version=__version__)
    with open(path, "w") as fh:
        json.dump(_round_trip(_plain(obj)), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


# ------------------------------------------------------------------ commands

def _single(cfg, key):
    from .sweep import parse_range
    vals = parse_range(cfg[key])
    if len(vals) != 1:
        raise ValidationError(f"{key} must be a single value for {cfg['command']}")
    return vals[0]


def _params(cfg):
    from .groundstate import ProblemParams
    prm = ProblemParams(_single(cfg, "s"), _single(cfg, "p"), _single(cfg, "omega"))
    prm.require_solitons()
    return prm


def _grid(cfg, prm):
    from .sweep import auto_grid
    if cfg["nx"] and cfg["ny"] and cfg["lx"] and cfg["ly"]:
        return GridSpec(cfg["nx"], cfg["ny"], cfg["lx"], cfg["ly"])
    if any((cfg["nx"], cfg["ny"], cfg["lx"], cfg["ly"])):
        raise ValidationError("give all of nx, ny, lx, ly or none of them")
    return auto_grid(prm.s, prm.p, prm.omega, cfg["grid_target"])


def _solve(cfg):
    from .groundstate import SolverConfig, petviashvili_solve
    prm = _params(cfg)
    scfg = SolverConfig(tol=cfg["tol"], max_iter=cfg["max_iter"],
                        max_wall_time=cfg["timeout"] or None)
    return petviashvili_solve(prm, _grid(cfg, prm), cfg=scfg)


def cmd_solve(cfg):
    from .groundstate import save_solution
    sol = _solve(cfg)
    out = cfg["output_dir"]
    save_solution(sol, os.path.join(out, "ground_state"))
    summary = sol.summary()
    summary["field"] = "ground_state.anls"
    _dump(summary, os.path.join(out, "ground_state.json"))
    return 0


def cmd_stability(cfg):
    from .linearization import LinearizedPair, unstable_eigenvalue, vk_report
    sol = _solve(cfg)
    pair = LinearizedPair(sol)
    rep = vk_report(pair, with_lambda=False, with_morse=cfg["with_morse"])
    out = cfg["output_dir"]
    d = rep.to_dict()
    if cfg["with_lambda"] and rep.verdict == "Unstable":
        mode = unstable_eigenvalue(pair)
        if mode is not None:
            d["lambda_unstable"] = mode.value
            d["block_residual"] = mode.residual
            if cfg["dump_fields"]:
                write_field(os.path.join(out, "unstable_z1.anls"), mode.z1)
                write_field(os.path.join(out, "unstable_z2.anls"), mode.z2)
    _dump(d, os.path.join(out, "stability.json"))
    return 0


def cmd_evolve(cfg):
    from .evolution import (PropagatorConfig, measure_growth_rate, propagate, shape_error,
                            write_snapshots)
    sol = _solve(cfg)
    out = cfg["output_dir"]
    nphi = sol.field.norm(2)
    kind = cfg["perturbation"]
    if kind == "none":
        pcfg = PropagatorConfig(cfg["dt"], cfg["t_end"], cfg["dealias"], cfg["record_every"])
        traj = propagate(sol.field, sol.params, pcfg,
                         sample_every=max(1, pcfg.n_steps // 200))
        res = {"kind": "soliton", "shape_error": shape_error(traj.final.values, sol.values),
               "times": traj.times, "mass": traj.mass, "energy": traj.energy,
               "mass_drift": float(np.max(np.abs(traj.mass - traj.mass[0])) / traj.mass[0])}
        if pcfg.record_every and cfg["dump_fields"]:
            write_snapshots(traj, os.path.join(out, "snapshots"), sol.params)
    elif kind in ("random", "unstable"):
        mode = "random"
        lam = None
        if kind == "unstable":
            from .linearization import LinearizedPair, unstable_eigenvalue
            um = unstable_eigenvalue(LinearizedPair(sol))
            if um is None:
                raise ValidationError("no unstable mode at these parameters")
            mode, lam = um, um.value
        amp = (cfg["amplitude"] or 1e-5) * nphi
        rep = measure_growth_rate(sol, mode, amp, dt=cfg["dt"], t_end=cfg["t_end"],
                                  seed=cfg["seed"])
        res = {"kind": "growth", "lambda_est": rep.lambda_est, "grew": rep.grew,
               "fit_r2": rep.fit_r2, "window": rep.window, "amplitude": rep.amplitude,
               "lambda_eigensolver": lam, "times": rep.times, "deviation": rep.deviation,
               "fitted": rep.fitted()}
    else:
        raise ValidationError(f"perturbation must be none, random or unstable, got {kind!r}")
    _dump(res, os.path.join(out, "evolution.json"))
    return 0


def cmd_continue(cfg):
    from .continuation import ContinuationConfig, compare_isotropic_limit, continue_branch
    sol = _solve(cfg)
    ccfg = ContinuationConfig(ds_init=cfg["ds_init"], ds_min=cfg["ds_min"], tol=cfg["tol"])
    trace = continue_branch(sol, cfg["s_target"], cfg=ccfg)
    out = cfg["output_dir"]
    trace.to_jsonl(os.path.join(out, "branch.jsonl"))
    if cfg["dump_every"]:
        for k, pt in enumerate(trace.points):
            if k % cfg["dump_every"] == 0:
                write_field(os.path.join(out, f"branch_{k:04d}.anls"), pt.field)
    summary = {"p": trace.p, "terminated_reason": trace.terminated_reason,
               "s_values": trace.s_values,
               "kernel_min": [pt.kernel_min for pt in trace.points]}
    if trace.endpoint.s >= 0.99:
        summary["isotropic_limit"] = compare_isotropic_limit(trace.endpoint, trace.p)
    _dump(summary, os.path.join(out, "branch.json"))
    return 0 if trace.terminated_reason == "ReachedTarget" else 3


def cmd_sweep(cfg):
    from .sweep import parse_range, run_sweep
    grid = None
    if cfg["nx"]:
        grid = GridSpec(cfg["nx"], cfg["ny"], cfg["lx"], cfg["ly"])
    res = run_sweep(parse_range(cfg["s"]), parse_range(cfg["p"]), parse_range(cfg["omega"]),
                    workers=cfg["workers"], tol=cfg["tol"], with_lambda=False,
                    timeout=cfg["timeout"] or None, grid=grid)
    out = cfg["output_dir"]
    res.to_csv(os.path.join(out, "sweep.csv"))
    res.to_json(os.path.join(out, "sweep.json"))
    # wall times vary run to run; kept apart so the tables stay byte-identical
    with open(os.path.join(out, "sweep_timing.json"), "w") as fh:
        json.dump(res.timings(), fh, indent=2, sort_keys=True)
    return 0


def cmd_kernel(cfg):
    from .green import kernel_decay_slope
    s = _single(cfg, "s")
    ys = np.geomspace(cfg["y_min"], cfg["y_max"], cfg["n_y"])
    slope, r2, ys, k = kernel_decay_slope(s, cfg["order"], ys)
    out = cfg["output_dir"]
    target = -(1.0 + 2.0 * s) if cfg["order"] == "full" else -(1.0 + s)
    _dump({"s": s, "order": cfg["order"], "slope": slope, "r2": r2, "expected": target,
           "y": ys, "kernel": k}, os.path.join(out, "kernel.json"))
    from .sweep import _write_rows
    _write_rows(os.path.join(out, "kernel.csv"), ("y", "kernel"), zip(ys, k))
    return 0


def cmd_plotdata(cfg):
    from .sweep import emit_plotdata
    if not cfg["inputs"]:
        raise ValidationError("plotdata needs inputs")
    out = cfg["output"] or os.path.join(cfg["output_dir"], f"{cfg['kind']}.csv")
    emit_plotdata(cfg["inputs"].split(","), cfg["kind"], out)
    return 0


HANDLERS = {"solve": cmd_solve, "stability": cmd_stability, "evolve": cmd_evolve,
            "continue": cmd_continue, "sweep": cmd_sweep, "kernel": cmd_kernel,
            "plotdata": cmd_plotdata}


def run(cfg):
    """Dispatch a merged configuration; returns the exit code."""
    write_effective_config(cfg)
    try:
        return HANDLERS[cfg["command"]](cfg)
    except ANLSError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code


def _parser():
    ap = argparse.ArgumentParser(prog="anls", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for c in COMMANDS:
        sp = sub.add_parser(c, argument_default=argparse.SUPPRESS)
        sp.add_argument("--config", help="flat key = value file")
        sp.add_argument("-v", "--verbose", action="count", default=0)
        for k, (typ, default, hlp) in KEYS.items():
            sp.add_argument(f"--{k}", dest=k, metavar=k.upper(), help=f"{hlp} [{default}]")
    return ap


def main(argv=None):
    args = vars(_parser().parse_args(argv))
    command = args.pop("command")
    verbose = args.pop("verbose", 0) or int(os.environ.get("ANLS_VERBOSE", "0") or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    path = args.pop("config", None)
    try:
        file_values = read_config_file(path) if path else {}
        cfg = build_config(command, file_values, args)
    except ANLSError as exc:
        print(f"anls: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"anls: {exc}", file=sys.stderr)
        return ValidationError.exit_code
    threads = int(os.environ.get("ANLS_THREADS", "0") or 0)
    if threads > 0:
        import scipy.fft
        with scipy.fft.set_workers(threads):
            return run(cfg)
    return run(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
