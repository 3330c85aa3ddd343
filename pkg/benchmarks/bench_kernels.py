"""Time the numba kernels against their numpy twins.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``.  numba
functions are called once before timing so compilation is excluded.
"""
import argparse
import timeit

import numpy as np

from shuffledp import kernels
from shuffledp.privacy import binomial_pmf


def cases(rng):
    big = binomial_pmf(200_000, 0.15).logmass
    lp = np.append(big, -np.inf)
    lq = np.insert(big, 0, -np.inf)
    rows = rng.integers(1, 1001, size=10_000).astype(np.int64)
    zmask = rng.random((10_000, 1000)) < 0.85
    totals = rng.integers(0, 2000, size=1_000_000).astype(np.int64)
    a, b = rng.random(4001), rng.random(4001)
    return {
        "hockey_stick_logspace n=2e5": ("hockey_stick_logspace", (lp, lq, 1.0)),
        "smoothness_bad_mass n=2e5": ("smoothness_bad_mass", (big, 1.0, 1, 1e-12)),
        "reachable_totals |A|=4 n=400": ("reachable_totals", (np.array([0, 1, 3, 4], dtype=np.int64), 400)),
        "faithful_bin_totals 1e4x1e3": ("faithful_bin_totals", (rows, zmask)),
        "truncating_estimates d=1e6": ("truncating_estimates", (totals, 1000, 0.85)),
        "convolve 4001x4001": ("convolve", (a, b)),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = {name: kernels.load_backend(name) for name in ("numpy", "numba")}
    print(f"{'kernel':32s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for label, (fn, fargs) in cases(np.random.default_rng(0)).items():
        times = {}
        for name, mod in backends.items():
            func = getattr(mod, fn)
            func(*fargs)
            times[name] = min(timeit.repeat(lambda: func(*fargs), number=1, repeat=args.repeat)) * 1e3
        print(f"{label:32s} {times['numpy']:10.3f} {times['numba']:10.3f} {times['numpy'] / times['numba']:8.2f}")


if __name__ == "__main__":
    main()
