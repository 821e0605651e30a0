"""Optimize a two-term drift for reflected Brownian motion with a quadratic holding cost.

Run with ``python3 demos/optimize_drift.py [--paths 4000] [--steps 400]``.
Prints the mirror-descent trace every few iterations and compares the
averaged drift with zero drift on a fresh evaluation batch.
"""
import argparse

import numpy as np

from driftopt import (BasisSpec, FeasibleSetSpec, MirrorDescentConfig, PathBatchSpec,
                      generate_paths, make_grid, mirror_descent, quadratic, saa_objective)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=4000)
    ap.add_argument("--steps", type=int, default=400)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    grid = make_grid(1.0, 1 / 32)
    train = generate_paths(PathBatchSpec(args.paths, initial_x=0.5, seed=args.seed), grid)
    basis = BasisSpec("integrated_legendre", 2, 1.0)
    feas = FeasibleSetSpec.ball(1.5)
    cost = quadratic(a1=1.0, a2=0.5)

    trace = mirror_descent(train, cost, basis, feas,
                           MirrorDescentConfig(args.steps, eta0=0.9, kbar_mode="gradient_norms"))
    print(f"step size {trace.step_size:.4g}  R {trace.radius:.3f}  Kbar {trace.kbar:.3f}")
    print(f"{'iter':>6} {'objective':>12} {'|grad|':>10}  coefficients")
    every = max(1, args.steps // 10)
    for r in trace.records[::every]:
        print(f"{r.iteration:6d} {r.objective:12.6f} {r.grad_norm:10.4f}  {np.round(r.coefficients, 4)}")

    # out-of-sample check on an independent batch
    test = generate_paths(PathBatchSpec(args.paths, initial_x=0.5, seed=args.seed + 1), grid)
    j0, se0 = saa_objective(test, None, cost)
    j1, se1 = saa_objective(test, trace.averaged_solution, cost)
    print(f"\naveraged coefficients {np.round(trace.averaged_coefficients, 4)}")
    print(f"zero drift     J = {j0:.5f} +- {se0:.5f}")
    print(f"averaged drift J = {j1:.5f} +- {se1:.5f}")


if __name__ == "__main__":
    main()
