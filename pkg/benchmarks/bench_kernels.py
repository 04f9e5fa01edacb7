"""Benchmark the recurrence-walk kernel backends (pure Python vs compiled).

The walk is the sequential inner loop of series solving and q-spiral grid
continuation; everything else in the package is vectorized numpy.  Build the
extension first to compare both:

    python setup.py build_ext --inplace
    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from qborel import _kernels
from qborel._kernels import _walk_py


def make_case(T, I, seed=0):
    rng = np.random.default_rng(seed)
    coeffs = rng.normal(size=(T, I + 1)) + 1j * rng.normal(size=(T, I + 1))
    coeffs[:, 0] += 3.0
    rhs = np.zeros(T, dtype=complex)
    rhs[1] = 1.0
    seeds = rng.normal(size=I) + 1j * rng.normal(size=I)
    return coeffs, rhs, seeds


def bench(fn, args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    backends = [("python", _walk_py.windowed_walk)]
    if _kernels.BACKEND == "cython":
        backends.append(("cython", _kernels.windowed_walk))
        print("compiled extension available")
    else:
        print("compiled extension NOT built; benchmarking the fallback only")
    print(f"selected backend: {_kernels.BACKEND}\n")
    print(f"{'T':>8} {'order':>6}" + "".join(f" {name:>12}" for name, _ in backends)
          + ("   speedup" if len(backends) == 2 else ""))
    for T, I in ((2000, 1), (2000, 3), (20000, 1), (20000, 3), (200000, 2)):
        args = make_case(T, I)
        times = [bench(fn, args) for _, fn in backends]
        row = f"{T:>8} {I:>6}" + "".join(f" {t * 1e3:>10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"   {times[0] / times[1]:>6.1f}x"
        print(row)


if __name__ == "__main__":
    main()
