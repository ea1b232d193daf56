"""Timing comparison of the jitted kernels against the numpy fallback.

Runs the tridiagonal solve, one IMEX step, and a 200-step advance chunk on a
few grid sizes, each through both backends, and prints a small table with the
speedups.  The first jitted call is excluded from timing (compilation).

Usage:
    python3 benchmarks/bench_kernels.py [--sizes 256,1024,4096] [--repeats 5]
"""

import argparse
import time

import numpy as np

from arcsim.geometry import RadialGrid
from arcsim.kernels import (
    NUMBA_ENABLED,
    grid_arrays,
    make_workspace,
    thomas_solve_numpy,
    step_transformed_numpy,
    advance_transformed_numpy,
)

try:
    from arcsim.kernels import (
        thomas_solve_numba,
        step_transformed_numba,
        advance_transformed_numba,
    )
    import numba  # noqa: F401
    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

PARAMS = (4.0, 6.0, 1.0, 0.6)
ADVANCE_STEPS = 200


def smooth_state(grid):
    r = grid.centers
    w = 2.0 + np.exp(-r ** 2 / (2 * 0.3 ** 2))
    z = 0.5 * np.exp(-r ** 2 / (2 * 0.4 ** 2))
    v = 0.05 + 0.5 * np.exp(-r ** 2 / (2 * 0.4 ** 2))
    return w, z, v


def time_call(fn, repeats):
    """Best-of-repeats wall time in seconds for one call of fn()."""
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_thomas(N, rng, repeats):
    lo = -rng.uniform(0.1, 1.0, N)
    up = -rng.uniform(0.1, 1.0, N)
    lo[0] = up[-1] = 0.0
    di = 1.0 + np.abs(lo) + np.abs(up) + rng.uniform(0.5, 1.0, N)
    rhs = rng.standard_normal(N)
    rows = {"numpy": time_call(lambda: thomas_solve_numpy(lo, di, up, rhs),
                               repeats)}
    if HAS_NUMBA:
        thomas_solve_numba(lo, di, up, rhs)
        rows["numba"] = time_call(lambda: thomas_solve_numba(lo, di, up, rhs),
                                  repeats)
    return rows


def bench_step(grid, repeats):
    ga = grid_arrays(grid)
    w, z, v = smooth_state(grid)
    dt = 1e-6
    args = (w, z, v) + PARAMS + (dt, ga)
    rows = {"numpy": time_call(lambda: step_transformed_numpy(*args),
                               repeats)}
    if HAS_NUMBA:
        step_transformed_numba(*args)
        rows["numba"] = time_call(lambda: step_transformed_numba(*args),
                                  repeats)
    return rows


def bench_advance(grid, repeats):
    ga = grid_arrays(grid)

    def chunk(advance):
        w, z, v = smooth_state(grid)
        ws = make_workspace(grid.N)
        # dt_max well under the CFL limit, t_target far away: the call does
        # exactly ADVANCE_STEPS accepted steps
        advance(w, z, v, PARAMS, 0.0, 1.0, 0, ADVANCE_STEPS,
                1e-7, 1e-12, 1e-7, 0.9, 1e6, False, ga, ws, 0)

    rows = {"numpy": time_call(lambda: chunk(advance_transformed_numpy),
                               repeats)}
    if HAS_NUMBA:
        chunk(advance_transformed_numba)
        rows["numba"] = time_call(lambda: chunk(advance_transformed_numba),
                                  repeats)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="256,1024,4096",
                    help="comma-separated grid sizes")
    ap.add_argument("--repeats", type=int, default=5,
                    help="timing repeats (best is reported)")
    args = ap.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(0)

    print(f"active backend: {'numba' if NUMBA_ENABLED else 'numpy'}"
          f" (numba importable: {HAS_NUMBA})")
    header = (f"{'kernel':<22}{'N':>6}{'numpy':>12}{'numba':>12}"
              f"{'speedup':>9}")
    print(header)
    print("-" * len(header))
    for N in sizes:
        grid = RadialGrid.make(1.0, N)
        cases = (
            ("thomas_solve", bench_thomas(N, rng, args.repeats)),
            ("imex_step", bench_step(grid, args.repeats)),
            (f"advance[{ADVANCE_STEPS}]", bench_advance(grid, args.repeats)),
        )
        for label, rows in cases:
            np_ms = rows["numpy"] * 1e3
            if "numba" in rows:
                nb_ms = rows["numba"] * 1e3
                print(f"{label:<22}{N:>6}{np_ms:>10.3f}ms{nb_ms:>10.3f}ms"
                      f"{np_ms / nb_ms:>8.1f}x")
            else:
                print(f"{label:<22}{N:>6}{np_ms:>10.3f}ms{'-':>12}{'-':>9}")


if __name__ == "__main__":
    main()
