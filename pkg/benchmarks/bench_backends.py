"""Compare the compiled kernel backend against the pure-Python fallback.

Times the likelihood evaluation, the gradient, and full CMLE fits on a
simulated series, then prints one table. Run:

    python benchmarks/bench_backends.py [--n 100] [--repeat 200]
"""

import argparse
import math
import time
import warnings

import numpy as np

from barma import _kernels_py
from barma._rng import stream
from barma.model import FitOptions, ModelSpec, TimeSeries, _kernel_inputs
from barma.montecarlo import built_in_scenarios, simulate_barma

try:
    from barma import _kernels_cy
except ImportError:
    _kernels_cy = None


def time_call(fn, repeat):
    best = math.inf
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(repeat):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeat)
    return best


def bench_backend(kernels, series, spec, repeat):
    x, ly, l1y, ar, ma, lo, hi = _kernel_inputs(series, spec)
    vec = np.array([-0.3, -0.4, 0.3, math.log(120.0)])
    args_ll = (x, ly, l1y, -0.3, np.array([-0.4]), ar, np.array([0.3]), ma,
               120.0, spec.m, spec.link.code, lo, hi)
    t_ll = time_call(lambda: kernels.loglik(*args_ll), repeat * 5)
    t_grad = time_call(
        lambda: kernels.nll_grad(vec, x, ly, l1y, ar, ma, spec.m,
                                 spec.link.code, lo, hi, True),
        repeat,
    )
    v0 = np.array([0.0, 0.0, 0.0, math.log(100.0)])
    t_fit = time_call(
        lambda: kernels.bfgs_fit(v0.copy(), x, ly, l1y, ar, ma, spec.m,
                                 spec.link.code, lo, hi, True, 1e-6, 500, -10.0, 20.0),
        max(repeat // 10, 3),
    )
    return t_ll, t_grad, t_fit


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, default=100)
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()

    warnings.filterwarnings("ignore")
    sc = built_in_scenarios()[0]
    series = TimeSeries(simulate_barma(sc, args.n, stream(0, 0, 0)).values)
    spec = sc.spec

    rows = [("python", bench_backend(_kernels_py, series, spec, max(args.repeat // 20, 2)))]
    if _kernels_cy is not None:
        rows.append(("cython", bench_backend(_kernels_cy, series, spec, args.repeat)))
    else:
        print("compiled backend not built; showing pure-Python only")

    print(f"\nn = {args.n} observations, ARMA(1,1) likelihood")
    print(f"{'backend':<10}{'loglik':>12}{'nll+grad':>12}{'full fit':>12}")
    for name, (t_ll, t_grad, t_fit) in rows:
        print(f"{name:<10}{t_ll * 1e6:>10.1f}us{t_grad * 1e6:>10.1f}us{t_fit * 1e3:>10.2f}ms")
    if len(rows) == 2:
        base = rows[0][1]
        fast = rows[1][1]
        print(
            f"{'speedup':<10}{base[0] / fast[0]:>11.1f}x{base[1] / fast[1]:>11.1f}x"
            f"{base[2] / fast[2]:>11.1f}x"
        )

    # cross-check: both backends agree on the objective
    x, ly, l1y, ar, ma, lo, hi = _kernel_inputs(series, spec)
    args_ll = (x, ly, l1y, -0.3, np.array([-0.4]), ar, np.array([0.3]), ma,
               120.0, spec.m, spec.link.code, lo, hi)
    if _kernels_cy is not None:
        a = _kernels_cy.loglik(*args_ll)
        b = _kernels_py.loglik(*args_ll)
        print(f"\nloglik agreement: |cython - python| = {abs(a - b):.3e}")


if __name__ == "__main__":
    main()
