"""Time the compiled and pure-Python hull and PAVA kernels.

Usage: ``python benchmarks/bench_kernels.py [--sizes 1000,10000] [--repeat 5]``
"""

import argparse
import timeit

import numpy as np

from csrisk import _pykernels

try:
    from csrisk import _kernels
except ImportError:
    _kernels = None


def _inputs(n, rng):
    x = np.cumsum(rng.uniform(0.5, 1.5, n))
    y = np.cumsum(rng.normal(size=n))
    w = rng.uniform(0.1, 2.0, n)
    return x, y, w


def bench(sizes, repeat, seed=0):
    rng = np.random.default_rng(seed)
    backends = [("python", _pykernels)] + ([("cython", _kernels)] if _kernels is not None else [])
    rows = []
    for n in sizes:
        x, y, w = _inputs(n, rng)
        for kernel, call in (("hull", lambda mod: mod.lower_hull_indices(x, y)),
                             ("pava", lambda mod: mod.pava(y, w))):
            times = {}
            for name, mod in backends:
                number = max(1, 20_000 // n)
                best = min(timeit.repeat(lambda: call(mod), number=number, repeat=repeat)) / number
                times[name] = best
            rows.append((kernel, n, times))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="100,1000,10000,100000")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]
    print(f"{'kernel':6} {'n':>8} {'python [ms]':>12} {'cython [ms]':>12} {'speedup':>8}")
    for kernel, n, times in bench(sizes, args.repeat):
        py = times["python"] * 1e3
        cy = times.get("cython")
        if cy is None:
            print(f"{kernel:6} {n:8d} {py:12.3f} {'n/a':>12} {'n/a':>8}")
        else:
            print(f"{kernel:6} {n:8d} {py:12.3f} {cy * 1e3:12.3f} {py / (cy * 1e3):8.1f}")


if __name__ == "__main__":
    main()
