"""Benchmark the compiled distance/gradient kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Times `pairwise_distances` and `distance_grads` at a few problem sizes and
prints a table with the speedup of the active compiled extension over the
pure-numpy implementation. Exits with a note instead of timings when the
extension is not built.
"""

import argparse
import time

import numpy as np

from somspike import _kernels
from somspike._kernels import numpy_backend

SIZES = [
    (64, 32, 64),       # (batch, prototypes, dim)
    (256, 128, 256),
    (512, 128, 2048),
]


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print(f"active backend: {_kernels.BACKEND}")
    if _kernels.BACKEND != "compiled":
        print("compiled extension not available; nothing to compare")
        return

    from somspike._kernels import _core

    rng = np.random.default_rng(0)
    header = f"{'size (n,k,d)':<20}{'kernel':<20}{'compiled':>12}{'numpy':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for n, k, d in SIZES:
        x = rng.normal(size=(n, d))
        p = rng.normal(size=(k, d))
        dist = numpy_backend.pairwise_distances(x, p, 1e-8)
        dldd = rng.normal(size=(n, k))

        pairs = [
            ("pairwise_distances",
             lambda: _core.pairwise_distances(x, p, 1e-8),
             lambda: numpy_backend.pairwise_distances(x, p, 1e-8)),
            ("distance_grads",
             lambda: _core.distance_grads(dldd, x, p, dist, 1e-12),
             lambda: numpy_backend.distance_grads(dldd, x, p, dist, 1e-12)),
        ]
        for name, compiled, fallback in pairs:
            t_c = timeit(compiled, args.repeats)
            t_n = timeit(fallback, args.repeats)
            print(f"{str((n, k, d)):<20}{name:<20}{t_c * 1e3:>10.2f}ms{t_n * 1e3:>10.2f}ms"
                  f"{t_n / t_c:>9.2f}x")


if __name__ == "__main__":
    main()
