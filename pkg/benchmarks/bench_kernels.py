"""Timing of the compiled kernels against the numpy path.

Run with ``python3 benchmarks/bench_kernels.py [--sizes 1000 30000]``.
Both paths live in the same module, so no environment flag is needed here;
numba compilation happens once before timing starts.
"""
import argparse
import timeit

import numpy as np

from batsfit import kernels
from batsfit._accel import USE_NUMBA
from batsfit.estimation.likelihood import t_constants


def make_inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    phi0 = rng.normal(10, 3, n)
    phi1 = phi0 + rng.uniform(0, 4, n)
    lt0 = rng.normal(0.3, 0.2, n)
    lt1 = rng.normal(0.3, 0.2, n)
    x = rng.normal(0.5 * (phi0 + phi1), 3, n)
    nu = 8.0
    c, dc = t_constants(nu)
    return (x, phi0, phi1, lt0, lt1, 0.1, -0.1, nu, c, dc, True,
            kernels.PENALTY_BASE, kernels.PENALTY_QUAD)


def best_of(fn, args, repeat=5):
    fn(*args)  # warm-up, includes JIT compilation
    t = timeit.Timer(lambda: fn(*args))
    number, _ = t.autorange()
    return min(t.repeat(repeat, number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1_000, 10_000, 100_000])
    ap.add_argument("--repeat", type=int, default=5)
    a = ap.parse_args(argv)
    if not USE_NUMBA:
        print("numba disabled; only the numpy path is timed")
    print(f"{'n':>8} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for n in a.sizes:
        args = make_inputs(n)
        t_np = best_of(kernels.loglik_grad_numpy, args, a.repeat)
        if USE_NUMBA:
            t_nb = best_of(kernels.loglik_grad_numba, args, a.repeat)
            print(f"{n:>8} {1e3 * t_np:>10.3f} {1e3 * t_nb:>10.3f} {t_np / t_nb:>8.2f}")
        else:
            print(f"{n:>8} {1e3 * t_np:>10.3f} {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
