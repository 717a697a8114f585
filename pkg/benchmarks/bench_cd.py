#!/usr/bin/env python3
"""Benchmark the compiled coordinate-descent kernel against its pure-numpy twin.

Times raw kernel solves on representative Gram problems (correlated lag-style
features, the regime the forecasting pipeline produces) and one full
cross-validated penalty selection with each kernel patched in. Also verifies
both backends land on the same coefficients.

Run from the repo root:  python benchmarks/bench_cd.py
"""

from __future__ import annotations

import time

import numpy as np

from epifuse.lasso import _cd_py
from epifuse.lasso import solver as solver_mod
from epifuse.lasso.solver import _CDProblem, lambda_grid, select_lambda_cv

try:
    from epifuse.lasso import _cd_fast
except ImportError:
    _cd_fast = None


def make_problem(n, p, rho, seed):
    """Correlated-feature regression instance (rho ~ lag-column correlation)."""
    rng = np.random.default_rng(seed)
    base = rng.normal(size=(n, 1))
    X = rho * base + (1 - rho) * rng.normal(size=(n, p))
    y = X @ (rng.normal(size=p) * (rng.random(p) < 0.7)) + 0.1 * rng.normal(size=n)
    return _CDProblem(X, y)


def bench_kernel(kernel, problem, n_lambda=30, repeats=20):
    grid = lambda_grid(problem.lambda_max, n_lambda, 1e-3)
    total_sweeps = 0
    t0 = time.perf_counter()
    for _ in range(repeats):
        w = np.zeros(problem.n_features)
        obj = np.empty(0)
        sweeps = 0
        for lam in grid:
            n_iter, _, _ = kernel(
                problem.G, problem.c, problem.y_sq, float(lam), 1e-7, 10000, w, obj
            )
            sweeps += n_iter
        total_sweeps += sweeps
    elapsed = time.perf_counter() - t0
    final_w = w
    return elapsed / repeats, total_sweeps // repeats, final_w


def bench_cv(kernel, n=8000, p=12, seed=3):
    rng = np.random.default_rng(seed)
    base = rng.normal(size=(n, 1))
    X = 0.9 * base + 0.1 * rng.normal(size=(n, p))
    y = X @ rng.normal(size=p) + 0.05 * rng.normal(size=n)
    original = solver_mod.solve_cd
    solver_mod.solve_cd = kernel
    try:
        t0 = time.perf_counter()
        select_lambda_cv(X, y, folds=5, seed=0, n_lambda=30)
        return time.perf_counter() - t0
    finally:
        solver_mod.solve_cd = original


def main():
    kernels = [("python", _cd_py.solve_cd)]
    if _cd_fast is not None:
        kernels.insert(0, ("cython", _cd_fast.solve_cd))
    else:
        print("compiled kernel not built; benchmarking the pure kernel only\n")

    print(f"{'problem':<26}{'kernel':<9}{'path time':>12}{'sweeps':>9}{'us/sweep':>10}")
    for n, p, rho in ((2000, 6, 0.5), (8000, 12, 0.9), (16000, 12, 0.95), (8000, 24, 0.8)):
        problem = make_problem(n, p, rho, seed=11)
        results = {}
        for name, kernel in kernels:
            elapsed, sweeps, w = bench_kernel(kernel, problem)
            results[name] = (elapsed, sweeps, w)
            print(
                f"n={n:<6} p={p:<3} rho={rho:<5}  {name:<9}"
                f"{elapsed * 1e3:>10.2f}ms{sweeps:>9}{elapsed / sweeps * 1e6:>10.2f}"
            )
        if len(results) == 2:
            diff = float(np.max(np.abs(results["cython"][2] - results["python"][2])))
            speedup = results["python"][0] / results["cython"][0]
            print(f"{'':26}agreement max|dw|={diff:.2e}  speedup x{speedup:.1f}")

    print("\nfull 5-fold CV penalty selection (n=8000, p=12, 30-point grid):")
    for name, kernel in kernels:
        elapsed = bench_cv(kernel)
        print(f"  {name:<8} {elapsed:.2f}s")


if __name__ == "__main__":
    main()
