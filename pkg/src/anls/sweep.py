"""Stability-map sweeps over (s, p, omega) and tidy CSV plot data."""
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, field
import itertools
import json
import math
import os
import time

import numpy as np

from . import __version__
from .errors import ANLSError, ValidationError
from .grid import GridSpec, read_field
from .groundstate import (ProblemParams, Regime, SolverConfig, _round_trip, classify_exponents,
                          petviashvili_solve)
from .linearization import LinearizedPair, vk_report

ROW_FIELDS = ("s", "p", "omega", "verdict", "d11_solve", "lambda_unstable",
              "pohozaev_max_residual", "iterations", "error_code", "error")


def parse_range(text):
    """``a:b:step`` (inclusive of b up to rounding), ``a,b,c`` or a single value."""
    text = str(text).strip()
    if ":" in text:
        parts = [float(t) for t in text.split(":")]
        if len(parts) != 3 or not parts[2] > 0 or parts[1] < parts[0]:
            raise ValidationError(f"bad range {text!r}; expected start:stop:step with step > 0")
        a, b, h = parts
        n = int(math.floor((b - a) / h + 1e-9)) + 1
        return [float(f"{a + k * h:.12g}") for k in range(n)]
    vals = [float(t) for t in text.split(",") if t.strip()]
    if not vals:
        raise ValidationError(f"empty range {text!r}")
    return vals


def auto_grid(s, p, omega=1.0, target="verdict"):
    """Heuristic box for (s, p, omega).

    ``verdict`` keeps the y tail near 1e-3 of the peak, enough for the sign
    of D11.  ``pohozaev`` grows the y box until truncation of the algebraic
    tail stops limiting the integral identities near 1e-6.
    """
    sx = 1.0 / math.sqrt(omega)
    sy = omega ** (-0.5 / s)
    nx, lx = 256, 48.0 * sx
    if target == "verdict":
        half = 1.5 * 1e3 ** (1.0 / (1.0 + 2.0 * s))
        ly = 2.0 ** math.ceil(math.log2(2.0 * half))
        dy = 1.0 / 16.0
    elif target == "pohozaev":
        e = 16.0 - 7.5 * s + 4.0 * max(3.0 - p, 0.0)
        ly = 2.0 ** min(math.ceil(e), 15)
        dy = 1.0 / 16.0 if s < 0.5 else 1.0 / 8.0
    else:
        raise ValidationError(f"unknown grid target {target!r}")
    ny = int(min(2 ** round(math.log2(ly / dy)), 2**17))
    return GridSpec(nx, ny, lx, ly * sy)


@dataclass
class SweepRow:
    s: float
    p: float
    omega: float
    verdict: str
    d11_solve: float | None = None
    lambda_unstable: float | None = None
    pohozaev_max_residual: float | None = None
    iterations: int | None = None
    error_code: int = 0
    error: str = ""
    wall_time: float = 0.0
    solver_launched: bool = False


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
            w.writerow(ROW_FIELDS)
            for r in self.rows:
                w.writerow([_fmt(getattr(r, k)) for k in ROW_FIELDS])

    def to_json(self, path):
        rows = [{k: getattr(r, k) for k in ROW_FIELDS + ("solver_launched",)} for r in self.rows]
        _dump_json({"kind": "sweep", "rows": rows}, path)

    def timings(self):
        return {f"{r.s:.17g},{r.p:.17g},{r.omega:.17g}": r.wall_time for r in self.rows}


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _dump_json(obj, path):
    obj = dict(obj, anls_version=__version__)
    with open(path, "w") as fh:
        json.dump(_round_trip(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def sweep_cell(s, p, omega=1.0, grid=None, tol=1e-9, with_lambda=False, timeout=None):
    """One row of the stability map; NoSolitons cells never reach a solver."""
    t0 = time.monotonic()
    if classify_exponents(s, p) is Regime.NO_SOLITONS:
        return SweepRow(s, p, omega, "NoSolitons")
    row = SweepRow(s, p, omega, "Failed", solver_launched=True)
    try:
        params = ProblemParams(s, p, omega)
        g = grid or auto_grid(s, p, omega)
        sol = petviashvili_solve(params, g, cfg=SolverConfig(tol=tol, max_wall_time=timeout))
        rep = vk_report(LinearizedPair(sol), with_lambda=with_lambda, with_morse=False)
        row.verdict = rep.verdict
        row.d11_solve = rep.d11_solve
        row.lambda_unstable = rep.lambda_unstable
        row.pohozaev_max_residual = sol.residuals.max_residual
        row.iterations = sol.iterations
    except ANLSError as exc:
        row.error_code = exc.exit_code
        row.error = f"{type(exc).__name__}: {exc}"
    row.wall_time = time.monotonic() - t0
    return row


def _cell_job(args):
    return sweep_cell(*args)


def run_sweep(s_values, p_values, omegas=(1.0,), workers=1, tol=1e-9, with_lambda=False,
              timeout=None, grid=None):
    """Rows in (s, p, omega) lexicographic order, whatever the completion order."""
    jobs = [(s, p, om, grid, tol, with_lambda, timeout)
            for s, p, om in itertools.product(s_values, p_values, omegas)]
    if not jobs:
        raise ValidationError("empty sweep")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_cell_job, jobs))
    else:
        rows = [_cell_job(j) for j in jobs]
    return SweepResult(rows)


def frontier(result):
    """Per s: (last Stable p, first Unstable p) over the solved cells."""
    out = {}
    for s in sorted({r.s for r in result.rows}):
        rows = sorted((r for r in result.rows if r.s == s), key=lambda r: r.p)
        stable = [r.p for r in rows if r.verdict == "Stable"]
        unstable = [r.p for r in rows if r.verdict == "Unstable"]
        out[s] = (max(stable) if stable else None, min(unstable) if unstable else None)
    return out


# --------------------------------------------------------------- plot data

PLOT_KINDS = ("stability_map", "decay_profiles", "growth_curves", "branch_trace")


def _load_json(path):
    with open(path) as fh:
        obj = json.load(fh)
    _check_version(obj, path)
    return obj


def _check_version(obj, path):
    if obj.get("anls_version") != __version__:
        raise ValidationError(
            f"{path} was written by version {obj.get('anls_version')!r}, expected {__version__!r}")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def emit_plotdata(paths, kind, out_path):
    """Tidy CSV (header, one observation per row) from stored results."""
    if kind not in PLOT_KINDS:
        raise ValidationError(f"kind must be one of {PLOT_KINDS}")
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    rows = []
    if kind == "stability_map":
        header = ("s", "p", "verdict", "d11_solve")
        for pth in paths:
            obj = _load_json(pth)
            rows += [(r["s"], r["p"], r["verdict"], r["d11_solve"]) for r in obj["rows"]]
    elif kind == "decay_profiles":
        header = ("axis", "coordinate", "value", "log_value")
        for pth in paths:
            meta = _load_json(pth)
            f = read_field(meta["field"] if os.path.isabs(meta["field"])
                           else os.path.join(os.path.dirname(pth), meta["field"]))
            g = f.grid
            cx, cy = g.center
            for axis, coords, line in (("x", g.x[cx:], f.values[cx:, cy]),
                                       ("y", g.y[cy:], f.values[cx, cy:])):
                for c, v in zip(coords, line):
                    rows.append((axis, float(c), float(v),
                                 float(np.log(v)) if v > 0 else None))
    elif kind == "growth_curves":
        header = ("t", "deviation", "fitted", "in_window")
        for pth in paths:
            obj = _load_json(pth)
            w = obj.get("window")
            for t, d, fv in zip(obj["times"], obj["deviation"], obj["fitted"]):
                inside = w is not None and w[0] <= t <= w[1]
                rows.append((t, d, fv, int(inside)))
    else:
        header = ("s", "xp_norm", "kernel_min", "newton_residual", "m", "t", "v")
        for pth in paths:
            with open(pth) as fh:
                for line in fh:
                    rec = json.loads(line)
                    _check_version(rec, pth)
                    a = rec["apriori"]
                    rows.append((rec["s"], rec["xp_norm"], rec["kernel_min"],
                                 rec["newton_residual"], a["m"], a["t_kin"], a["v"]))
    _write_rows(out_path, header, rows)
    return out_path


__all__ = ["parse_range", "auto_grid", "SweepRow", "SweepResult", "sweep_cell", "run_sweep",
           "frontier", "emit_plotdata", "PLOT_KINDS"]
