"""Compare the compiled filter kernel against the NumPy fallback.

Times raw filter passes at several state dimensions and a full seasonal
model fit with each backend. Run from the repository root:

    python benchmarks/bench_kalman.py
    python benchmarks/bench_kalman.py --reps 50 --n 800
"""

import argparse
import statistics
import time

import numpy as np

import consent_audit.sarima.model as model
from consent_audit.sarima import SarimaParams, SarimaSpec, fit, simulate
from consent_audit.sarima._filter_py import kalman_filter_parts as py_kernel

try:
    from consent_audit.sarima._filter_cy import kalman_filter_parts as cy_kernel
except ImportError:
    cy_kernel = None


def time_call(fn, reps):
    samples = []
    for _ in range(reps):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return min(samples), statistics.median(samples)


def bench_kernel(reps: int, n: int):
    rng = np.random.default_rng(0)
    print(f"filter pass over n={n} observations ({reps} reps, best/median ms)")
    print(f"{'state dim':>10} {'numpy':>16} {'cython':>16} {'speedup':>8}")
    for r in (2, 4, 8, 15):
        tcol = rng.uniform(-0.3, 0.3, r)
        rvec = np.concatenate([[1.0], rng.uniform(-0.4, 0.4, r - 1)])
        y = rng.normal(size=n)
        p0 = np.eye(r)
        args = (tcol, rvec, y, p0, 1.0)
        py_best, py_med = time_call(lambda: py_kernel(*args), reps)
        if cy_kernel is None:
            print(f"{r:>10} {py_best * 1e3:>7.2f}/{py_med * 1e3:<8.2f} {'n/a':>16}")
            continue
        cy_best, cy_med = time_call(lambda: cy_kernel(*args), reps)
        print(
            f"{r:>10} {py_best * 1e3:>7.2f}/{py_med * 1e3:<8.2f} "
            f"{cy_best * 1e3:>7.2f}/{cy_med * 1e3:<8.2f} {py_best / cy_best:>7.1f}x"
        )


def bench_fit(n: int):
    spec = SarimaSpec(p=1, d=1, q=1, P=0, D=1, Q=1, s=6)
    truth = SarimaParams(ar=(-0.598,), ma=(0.752,), sma=(-0.479,), sigma2=1.9e-05)
    series = simulate(spec, truth, n, seed=0)
    print(f"\nfull fit of (1,1,1)(0,1,1,6) on n={n} (one run each)")
    results = {}
    backends = [("numpy", py_kernel)]
    if cy_kernel is not None:
        backends.append(("cython", cy_kernel))
    original = model.kalman_filter_parts
    try:
        for name, kernel in backends:
            model.kalman_filter_parts = kernel
            start = time.perf_counter()
            fitted = fit(spec, series)
            elapsed = time.perf_counter() - start
            results[name] = (elapsed, fitted.loglik)
            print(f"{name:>10}: {elapsed:7.2f}s  loglik={fitted.loglik:.6f}")
    finally:
        model.kalman_filter_parts = original
    if len(results) == 2:
        print(f"{'speedup':>10}: {results['numpy'][0] / results['cython'][0]:7.1f}x")
        drift = abs(results["numpy"][1] - results["cython"][1])
        print(f"{'|dll|':>10}: {drift:.2e} (backends must agree)")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--reps", type=int, default=20)
    parser.add_argument("--n", type=int, default=400)
    parser.add_argument("--skip-fit", action="store_true")
    args = parser.parse_args()
    if cy_kernel is None:
        print("compiled kernel not built; showing numpy numbers only\n")
    bench_kernel(args.reps, args.n)
    if not args.skip_fit:
        bench_fit(args.n)


if __name__ == "__main__":
    main()
