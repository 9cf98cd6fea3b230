"""Timing of the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat N] [--sizes 256x512,512x1024]

Each kernel is called once before timing so that JIT compilation is not
counted.  Prints one line per (kernel, size) with the median time of both
backends and the speed-up.
"""
import argparse
import statistics
import time

import numpy as np

from anls import _kernels
from anls.symmetry import placement_order


def _median_time(fn, repeat):
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return statistics.median(ts)


def cases(shape, rng):
    a = rng.standard_normal(shape)
    z = a + 1j * rng.standard_normal(shape)
    order = placement_order(shape[1])
    return {
        "clipped_power q=2": (lambda k: lambda: k(a, 2.0), "clipped_power"),
        "clipped_power q=2.5": (lambda k: lambda: k(a, 2.5), "clipped_power"),
        "nonlinear_phase p=4": (lambda k: lambda: k(z.copy(), 4.0, 5e-4), "nonlinear_phase"),
        "nonlinear_phase p=3.5": (lambda k: lambda: k(z.copy(), 3.5, 5e-4), "nonlinear_phase"),
        "rearrange_rows": (lambda k: lambda: k(a, order), "rearrange_rows"),
        "sort_rows_desc": (lambda k: lambda: k(a), "sort_rows_desc"),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--sizes", default="256x512,512x1024")
    args = ap.parse_args(argv)
    if _kernels.numba is None:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24}{'shape':>12}{'numpy [ms]':>13}{'numba [ms]':>13}{'speed-up':>10}")
    for spec in args.sizes.split(","):
        shape = tuple(int(t) for t in spec.split("x"))
        for name, (make, attr) in cases(shape, rng).items():
            f_np = make(getattr(_kernels, f"{attr}_numpy"))
            f_nb = make(getattr(_kernels, f"{attr}_numba"))
            f_nb()  # compile
            t_np = _median_time(f_np, args.repeat)
            t_nb = _median_time(f_nb, args.repeat)
            print(f"{name:<24}{spec:>12}{1e3 * t_np:>13.3f}{1e3 * t_nb:>13.3f}{t_np / t_nb:>10.2f}")


if __name__ == "__main__":
    main()
