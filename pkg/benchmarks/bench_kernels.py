"""Benchmark the compiled kernels against the pure-NumPy fallback.

Covers the two hot paths: the censored log-likelihood evaluation that drives
the Metropolis sampler, and the exhaustive segmented least-squares knot scan.
Run as `python benchmarks/bench_kernels.py`; the native column is skipped if
the extension is not built.

Usage note: end-to-end effects are easiest to see via
`LLAFT_PURE_KERNELS=1 llaft approx-check` versus the default.
"""
import time

import numpy as np

from llaft._kernels import pure

try:
    from llaft._kernels import _native
except ImportError:
    _native = None

from llaft.simulate import SimulationScenario, generate_dataset


def time_call(fn, repeats, *args):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_loglik(backend, n_calls=2000):
    data = generate_dataset(
        SimulationScenario(n=300, censor_bound=17.0, n_replicates=1, seed=0), 0)
    beta = np.array([0.5, 0.2, 0.8])

    def run():
        for _ in range(n_calls):
            backend.log_likelihood_sum(data.log_time, data.event,
                                       data.covariates, beta, -0.22)

    return time_call(run, 3) / n_calls


def bench_scan(backend, k=3):
    x = np.linspace(-5.0, 5.0, 10_000)
    y = np.logaddexp(0.0, x)
    cand = np.round(np.arange(-4.95, 4.951, 0.05), 10)
    return time_call(lambda: backend.best_segmented_fit(x, y, cand, k), 1)


def main():
    rows = []
    backends = [("pure", pure)] + ([("native", _native)] if _native else [])
    results = {}
    for name, mod in backends:
        results[name] = {
            "log-likelihood (n=300), per call": bench_loglik(mod),
            "3-knot scan (199 candidates)": bench_scan(mod, 3),
            "2-knot scan": bench_scan(mod, 2),
        }
    tasks = list(next(iter(results.values())))
    width = max(len(t) for t in tasks)
    header = f"{'task'.ljust(width)}  " + "  ".join(f"{n:>12}" for n in results)
    if len(results) == 2:
        header += f"  {'speedup':>8}"
    print(header)
    for task in tasks:
        line = task.ljust(width)
        vals = [results[n][task] for n in results]
        for v in vals:
            line += f"  {v * 1e3:>10.3f}ms"
        if len(vals) == 2 and vals[1] > 0:
            line += f"  {vals[0] / vals[1]:>7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
