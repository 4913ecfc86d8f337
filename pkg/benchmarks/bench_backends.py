"""Benchmark the compiled hot kernels against the pure-Python fallback.

Run from the repository root:

    python3 benchmarks/bench_backends.py [--n-max N] [--repeat R]

Both backends are imported directly (bypassing the selection logic), timed
on the sieve and on the exact Delta-coefficient convolution, and checked
for agreement before any number is reported.
"""

import argparse
import time

import numpy as np

from apvar._core import pure

try:
    from apvar._core import _kernels as compiled
except ImportError:
    compiled = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return min(times), result


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-max", type=int, default=20_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    if compiled is None:
        print("compiled extension not available; nothing to compare")
        return 1

    n = args.n_max
    jobs = [
        ("sieve_tables(n_max=%d)" % n,
         lambda: compiled.sieve_tables(n),
         lambda: pure.sieve_tables(n)),
        ("delta_tau_parts(n_max=%d)" % n,
         lambda: compiled.delta_tau_parts(n),
         lambda: pure.delta_tau_parts(n)),
    ]
    print("%-34s %12s %12s %9s" % ("kernel", "compiled", "pure", "speedup"))
    for name, fast, slow in jobs:
        t_fast, r_fast = best_of(fast, args.repeat)
        t_slow, r_slow = best_of(slow, args.repeat)
        for a, b in zip(r_fast, r_slow):
            assert np.array_equal(a, b), "backend mismatch in %s" % name
        print("%-34s %10.4f s %10.4f s %8.1fx"
              % (name, t_fast, t_slow, t_slow / t_fast))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
