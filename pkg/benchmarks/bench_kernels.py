#!/usr/bin/env python3
"""Benchmark the hot kernels: numba-compiled vs pure-numpy implementations.

The kernels module binds its public names to @njit compilations when numba is
available (and FEJSOLVE_NO_NUMBA is unset); the uncompiled originals stay in
PY_IMPLS.  This script times both on the same inputs, plus one end-to-end
always-accept solver run, and prints a speedup table.

Usage:
    python benchmarks/bench_kernels.py [--dim 40] [--repeat 2000]
"""

import argparse
import time

import numpy as np

from fejsolve import _kernels
from fejsolve.driver import SolverConfig, run_algorithm2
from fejsolve.metric import MetricPolicy
from fejsolve.problems import get_problem


def _time(fn, args, repeat):
    fn(*args)  # warmup (triggers compilation on the jitted path)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def bench_kernels(dim, repeat):
    rng = np.random.default_rng(0)
    g = rng.normal(size=dim)
    V, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    evals = rng.uniform(0.5, 5.0, dim)
    Q = (V * evals) @ V.T
    Q = 0.5 * (Q + Q.T)
    s = rng.normal(size=dim)
    cases = {
        "model_terms": (g, Q, 1.5, 3.0, s),
        "model_grad": (g, Q, 1.5, 3.0, s),
        "secular_root": (np.sort(evals), V.T @ g, 1.5, 3.0, 200),
        "descent_inner": (g, Q, 1.5, 3.0, 0.05, 20000),
    }
    rows = []
    for name, args in cases.items():
        t_py = _time(_kernels.PY_IMPLS[name], args, repeat)
        if _kernels.NUMBA_ENABLED:
            t_jit = _time(_kernels.JIT_IMPLS[name], args, repeat)
            rows.append((name, t_py, t_jit, t_py / t_jit))
        else:
            rows.append((name, t_py, None, None))
    return rows


def bench_solver():
    problem = get_problem("quad-d10-k100")
    a = 2 * 0.01 + problem.lipschitz_L / 0.5
    cfg = SolverConfig(tau=0.01, eta=0.5, sigma_max=1.0, sigma_rule="constant",
                       sigma_bar=1.0, acceptance="always", grad_tol=1e-8)
    pol = MetricPolicy(kind="constant", Q0=a * np.eye(10), a=a)
    x0 = np.random.default_rng(21).uniform(-2, 2, 10)
    run_algorithm2(problem, cfg, pol, x0)  # warmup
    t0 = time.perf_counter()
    trace = run_algorithm2(problem, cfg, pol, x0)
    return time.perf_counter() - t0, len(trace)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=40)
    ap.add_argument("--repeat", type=int, default=2000)
    args = ap.parse_args()

    print(f"numba path active: {_kernels.NUMBA_ENABLED} "
          f"(set FEJSOLVE_NO_NUMBA=1 for the pure-numpy path)")
    print(f"kernel inputs: dim={args.dim}, repeat={args.repeat}\n")
    rows = bench_kernels(args.dim, args.repeat)
    print(f"{'kernel':16s} {'numpy [us]':>12s} {'numba [us]':>12s} {'speedup':>9s}")
    for name, t_py, t_jit, speedup in rows:
        if t_jit is None:
            print(f"{name:16s} {t_py * 1e6:12.2f} {'-':>12s} {'-':>9s}")
        else:
            print(f"{name:16s} {t_py * 1e6:12.2f} {t_jit * 1e6:12.2f} {speedup:9.1f}x")

    wall, iters = bench_solver()
    print(f"\nend-to-end always-accept run (quad-d10-k100, {iters} iterations): "
          f"{wall:.3f} s on the active path")


if __name__ == "__main__":
    main()
