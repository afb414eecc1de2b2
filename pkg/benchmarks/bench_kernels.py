"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--n 30] [--nv 10] [--repeat 3]

Prints one line per kernel with the best-of-``repeat`` time for each
backend and the ratio, then the same for a whole solver step.
"""
import argparse
import time

import numpy as np

from alebgk import kernels
from alebgk.solver import RunConfig, Solver


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_calls(solver, impl):
    """Zero-argument closures running each kernel once over all particles."""
    c = solver.cloud
    ops = solver.ops
    rows = np.arange(c.n, dtype=np.int64)
    out = np.empty_like(c.f)
    rate = np.zeros(c.n)
    rho, U, e3 = np.zeros(c.n), np.zeros_like(c.U), np.zeros(c.n)
    tau = np.full(c.n, 3.7e-10)
    nodes, dv = solver.nodes, solver.grid.cell_volume
    lists = ops.lists
    dt = solver.config.dt
    R = solver.gas.R
    return {
        "advect": lambda: impl.advect(rows, 0, c.n, lists.ptr, lists.nbr, ops.frame, ops.rot,
                                      nodes, c.U, c.f, out, dt, rate),
        "moments": lambda: impl.moments(rows, 0, c.n, nodes, c.f, dv, rho, U, e3),
        "relax": lambda: impl.relax(rows, 0, c.n * len(nodes), nodes, c.rho, c.U, c.T, tau, R, dt,
                                    c.f, out),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=30, help="particles per axis")
    ap.add_argument("--nv", type=int, default=10, help="velocity intervals per axis")
    ap.add_argument("--steps", type=int, default=3, help="solver steps per timing")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    try:
        compiled = kernels.get("compiled")
    except ImportError:
        raise SystemExit("compiled extension not built; nothing to compare")
    python = kernels.get("python")

    cfg = RunConfig(L=1e-6, n_per_axis=args.n, N_v=args.nv, dt=1e-11, n_steps=args.steps,
                    lid_velocity=(1.0, 0.0), workers=1)
    solver = Solver(cfg)
    solver.step()
    print(f"{solver.cloud.n} particles, {len(solver.nodes)} velocity nodes, 1 worker")
    print(f"{'kernel':<10} {'compiled s':>11} {'python s':>11} {'ratio':>7}")
    calls_c, calls_p = kernel_calls(solver, compiled), kernel_calls(solver, python)
    for name in calls_c:
        tc, tp = best_of(calls_c[name], args.repeat), best_of(calls_p[name], args.repeat)
        print(f"{name:<10} {tc:11.4f} {tp:11.4f} {tp / tc:7.1f}")
    solver.close()

    def steps(impl):
        s = Solver(cfg, impl=impl)
        try:
            return best_of(lambda: [s.step() for _ in range(args.steps)], 1) / args.steps
        finally:
            s.close()

    tc = min(steps(compiled) for _ in range(args.repeat))
    tp = min(steps(python) for _ in range(args.repeat))
    print(f"{'step':<10} {tc:11.4f} {tp:11.4f} {tp / tc:7.1f}")


if __name__ == "__main__":
    main()
