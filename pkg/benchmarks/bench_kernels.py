"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--reps 20000] [--repeat 3]

The first numba call is reported separately since it includes JIT (or
cache load) time.
"""
import argparse
import time

import numpy as np

from qbd import _kernels
from qbd.model import ModelParams, build_generator
from qbd.transient import TransientPath


def best_of(fn, repeat):
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return min(out)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    C = np.array([[0.2, 0.5, 0.3], [0.6, 0.1, 0.3], [0.25, 0.25, 0.5]])
    ccum = np.ascontiguousarray(np.cumsum(C, axis=1))
    times = np.array([0.5, 1.0, 2.0, 5.0])
    gen = build_generator(ModelParams(N=40, lam=1.0, mu=0.8, xi=0.5, C=C))
    ts = [0.5, 2.0, 10.0]

    cases = {
        "gillespie_transient": lambda b: _kernels.gillespie_transient(
            10, 3, 1.0, 0.8, 0.5, ccum, 1, times, np.uint64(7), 0, args.reps, backend=b),
        "uniformize (N=40, d=3)": lambda b: TransientPath(gen, backend=b).solve(ts),
    }
    backends = ["numpy"] + (["numba"] if _kernels.NUMBA_AVAILABLE else [])
    print(f"{'kernel':<26}{'backend':<9}{'first (s)':>11}{'best (s)':>11}")
    for name, fn in cases.items():
        for b in backends:
            t0 = time.perf_counter()
            fn(b)
            first = time.perf_counter() - t0
            print(f"{name:<26}{b:<9}{first:>11.4f}{best_of(lambda: fn(b), args.repeat):>11.4f}")


if __name__ == "__main__":
    main()
