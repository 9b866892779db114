#!/usr/bin/env python3
"""Benchmark the solver hot loop: numba kernels vs the pure-numpy fallback.

Runs the full proximal gradient solve on ordinary-least-squares contrasts at
a few problem sizes and reports per-solve wall time for both backends.

    python benchmarks/bench_solver.py [--repeats 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from clair._kernels import get_kernels
from clair.contrast import build_contrast
from clair.simulation import SimConfig, gen_scenario, ols_fit, substream


def make_contrast(p, q, n, n_clients, seed=0):
    cfg = SimConfig(p=p, q=q, n=n, n_clients=n_clients, replicates=1,
                    base_seed=seed)
    scenario = gen_scenario(cfg, substream(seed, 0))
    w_hat = [ols_fit(x, y) for x, y in zip(scenario.x, scenario.y)]
    return build_contrast(w_hat)


def time_solve(kernels, d, lam_l, lam_s, repeats):
    omega = np.full(d.n_pairs, 1.0 / d.n_clients)
    step = 1.0 / (2.0 * omega.max())
    args = (d.data, d.n_pairs, d.block_rows, lam_l, lam_s, omega, step, 2000, 1e-9)
    kernels.solve_loop(*args)  # warmup (JIT compile / cache load)
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        out = kernels.solve_loop(*args)
        times.append(time.perf_counter() - start)
    return min(times), out[3]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    sizes = [
        (10, 10, 100, 10),
        (10, 10, 100, 20),
        (20, 20, 150, 10),
    ]
    backends = ["numpy"]
    try:
        get_kernels("numba")
        backends.append("numba")
    except Exception as exc:  # numba missing or broken
        print(f"numba backend unavailable ({exc}); benchmarking numpy only")

    print(f"{'size (p,q,n,K)':>20} {'backend':>8} {'best solve':>12} {'iters':>6}")
    for p, q, n, n_clients in sizes:
        d = make_contrast(p, q, n, n_clients)
        lam_l = 1.0 / np.sqrt(n_clients)
        lam_s = 5.0 * n_clients**-1.5
        baseline = None
        for name in backends:
            best, iters = time_solve(get_kernels(name), d, lam_l, lam_s,
                                     args.repeats)
            speedup = "" if baseline is None else f"  ({baseline / best:.2f}x)"
            if baseline is None:
                baseline = best
            print(f"{str((p, q, n, n_clients)):>20} {name:>8} "
                  f"{best * 1e3:>9.2f} ms {iters:>6}{speedup}")


if __name__ == "__main__":
    main()
