#!/usr/bin/env python3
"""Timing comparison: dual coordinate descent vs the direct solvers.

The dual solver handles every penalty; the direct solvers exist for the
three classic shapes.  This prints per-instance wall times and the max-abs
fit difference so regressions in either route show up immediately.
"""

import argparse
import time

import numpy as np

from solarpen.dual import SolveOptions, solve_min_norm
from solarpen.fast import pava, soft_threshold, taut_string
from solarpen.penalty import PenaltySpec, build_penalty, chain_edges


def bench(seed: int, sizes, lams) -> None:
    rng = np.random.default_rng(seed)
    opts = SolveOptions(tol=1e-19, max_sweeps=5_000_000)

    # Warm the compiled kernel outside the timings.
    warm = build_penalty(PenaltySpec("fused-graph", 4, (0.5,), edges=chain_edges(4)))
    solve_min_norm(np.zeros(4), warm, SolveOptions(tol=1e-12, max_sweeps=8))

    print(f"{'penalty':<10} {'n':>6} {'lam':>6} {'cd time':>9} {'direct':>9} "
          f"{'sweeps':>8} {'max diff':>10}")
    for n in sizes:
        x = rng.standard_normal(n)
        for lam in lams:
            spec = PenaltySpec("fused-graph", n, (lam,), edges=chain_edges(n))
            base = build_penalty(spec)
            t0 = time.perf_counter()
            res = solve_min_norm(x, base, opts)
            t_cd = time.perf_counter() - t0
            t0 = time.perf_counter()
            direct = taut_string(x, lam)
            t_fast = time.perf_counter() - t0
            diff = float(np.max(np.abs(res.y - direct)))
            print(f"{'fused':<10} {n:>6} {lam:>6.2f} {t_cd:>8.3f}s {t_fast:>8.4f}s "
                  f"{res.sweeps:>8} {diff:>10.2e}")

        spec = PenaltySpec("isotonic-graph", n, edges=chain_edges(n))
        base = build_penalty(spec)
        t0 = time.perf_counter()
        res = solve_min_norm(x, base, opts)
        t_cd = time.perf_counter() - t0
        t0 = time.perf_counter()
        direct = pava(x)
        t_fast = time.perf_counter() - t0
        diff = float(np.max(np.abs(res.y - direct)))
        print(f"{'isotonic':<10} {n:>6} {'':>6} {t_cd:>8.3f}s {t_fast:>8.4f}s "
              f"{res.sweeps:>8} {diff:>10.2e}")

        spec = PenaltySpec("lasso", n, (0.7,))
        base = build_penalty(spec)
        t0 = time.perf_counter()
        res = solve_min_norm(x, base, opts)
        t_cd = time.perf_counter() - t0
        t0 = time.perf_counter()
        direct = soft_threshold(x, 0.7)
        t_fast = time.perf_counter() - t0
        diff = float(np.max(np.abs(res.y - direct)))
        print(f"{'lasso':<10} {n:>6} {0.7:>6.2f} {t_cd:>8.3f}s {t_fast:>8.4f}s "
              f"{res.sweeps:>8} {diff:>10.2e}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--sizes", type=int, nargs="+", default=[100, 1000])
    parser.add_argument("--lams", type=float, nargs="+", default=[0.1, 1.0, 10.0])
    args = parser.parse_args()
    bench(args.seed, args.sizes, args.lams)
