"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both variants are called directly, so HSPEC_DISABLE_JIT does not matter
here. The first jit call (compile or cache load) is reported separately.
"""

import argparse
import time

import numpy as np

from hspec import _kernels
from hspec._accel import numba
from hspec.spectra import make_circulant, make_toeplitz, measure_of
from hspec.theory import compute_theory, edge_measures


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--resolution", type=int, default=2000)
    args = ap.parse_args()

    xi = measure_of(make_toeplitz(4000, 0.9), args.resolution)
    sg = measure_of(make_circulant(2000, 0.0077, 300), args.resolution)
    delta = 2.0
    th = compute_theory(xi, sg, delta, 1.2 * 0.2068, edge=False)
    lam = th.lam
    a_snr, snr = lam * lam / delta, lam * lam
    fp_args = (xi.values, xi.weights, sg.values, sg.weights, a_snr, snr, 10.0, 1e-12, 100_000)
    xs, ss = edge_measures(xi, sg, th)
    alphas = xs.sup * np.logspace(1e-6, 2, 2000)
    ec_args = (alphas, xs.values, xs.weights, ss.values, ss.weights, delta, 1e-14, 200)

    cases = [
        ("fixed_point_qv", _kernels._fixed_point_qv_numpy, _kernels._fixed_point_qv_jit, fp_args),
        ("edge_curve", _kernels._edge_curve_numpy, _kernels._edge_curve_jit, ec_args),
    ]
    print(f"resolution={args.resolution} repeat={args.repeat} numba={'yes' if numba else 'no'}")
    for name, np_fn, jit_fn, fargs in cases:
        t_np = best_of(lambda: np_fn(*fargs), args.repeat)
        line = f"{name:<16} numpy {t_np * 1e3:9.2f} ms"
        if numba is not None:
            t0 = time.perf_counter()
            jit_fn(*fargs)
            first = time.perf_counter() - t0
            t_jit = best_of(lambda: jit_fn(*fargs), args.repeat)
            line += f"   numba {t_jit * 1e3:9.2f} ms (first call {first:.2f} s)   speedup {t_np / t_jit:6.1f}x"
        print(line)


if __name__ == "__main__":
    main()
