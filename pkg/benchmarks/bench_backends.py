#!/usr/bin/env python3
"""Throughput comparison of the numba and numpy kernel backends.

Runs each hot kernel on representative sizes and prints a table of
wall-clock times plus the speedup.  The first numba call includes JIT
compilation; a warmup pass keeps it out of the timings.

Usage: python benchmarks/bench_backends.py [--n 200 400] [--repeats 5]
"""

import argparse
import time

import numpy as np

from nclab import backend as be
from nclab.grid import make_grid
from nclab.kernels import KernelSpec, build_kernel_matrix
from nclab.operators import assemble_operator


def build_problem(n):
    grid = make_grid(0.0, 1.0, n)
    kern = build_kernel_matrix(KernelSpec.gaussian(0.1), grid)
    op = assemble_operator("N", 1.0, kern, grid)
    x = grid.nodes
    m = 1.0 + 0.5 * np.cos(2.0 * np.pi * x)
    u0 = np.full(n, 1.2)
    v0 = np.full(n, 0.4)
    rng = np.random.default_rng(7)
    u = 1.0 + rng.random(n)
    us = u * (0.7 + 0.2 * rng.random(n))
    sigma = float(np.max(op.absorption - m)) + 1.0
    M = op.matrix + np.diag(m) + sigma * np.eye(n)
    ones = np.ones(n)
    half = np.full(n, 0.5)
    cases = {
        "rk4_competition(2000 steps)": lambda bk: be.rk4_competition(
            op.matrix, op.matrix, m, m, half, half, ones, ones, u0, v0,
            0.05, 2000, 0.0, 1e-6, backend=bk),
        "rk4_single(2000 steps)": lambda bk: be.rk4_single(
            op.matrix, m, ones, u0, 0.05, 2000, 0.0, 0, np.inf, backend=bk),
        "power_iteration": lambda bk: be.power_iteration(
            M, ones, 1e-9, 50_000, backend=bk),
        "symmetrization_double_sum": lambda bk: be.symmetrization_double_sum(
            kern.entries, grid.weights, u, us, backend=bk),
        "kernel_diff_form": lambda bk: be.kernel_diff_form(
            kern.entries, grid.weights, u, backend=bk),
    }
    return cases


def _best_time(fn, bk, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(bk)
        best = min(best, time.perf_counter() - t0)
    return best


def run(sizes, repeats):
    print(f"backends: {', '.join(be.BACKENDS)}")
    for n in sizes:
        cases = build_problem(n)
        print(f"\nn = {n}")
        print(f"{'kernel':34s}" + "".join(f"{bk:>12s}" for bk in be.BACKENDS)
              + ("     speedup" if len(be.BACKENDS) > 1 else ""))
        for name, fn in cases.items():
            times = {}
            for bk in be.BACKENDS:
                fn(bk)  # warmup (and JIT compile for numba)
                times[bk] = _best_time(fn, bk, repeats)
            row = f"{name:34s}" + "".join(
                f"{times[bk] * 1e3:10.2f}ms" for bk in be.BACKENDS)
            if len(be.BACKENDS) > 1:
                row += f"{times['numpy'] / times['numba']:11.2f}x"
            print(row)


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, nargs="+", default=[200, 400])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    run(args.n, args.repeats)
