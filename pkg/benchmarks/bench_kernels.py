"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from dbg4eth import _pykernels

try:
    from dbg4eth import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    n = 20_000
    y, w = rng.normal(size=n), rng.uniform(0.5, 2.0, n)
    x = np.sort(rng.integers(0, 2000, n).astype(float))
    g, h = rng.normal(size=n), rng.uniform(0.05, 0.25, n)
    conf, lab = rng.uniform(size=n), (rng.random(n) < 0.5).astype(float)
    return {
        "pava (n=20000)": lambda m: m.pava(y, w),
        "best_split (n=20000)": lambda m: m.best_split(x, g, h, 1.0, 1, 1e-3),
        "bin_stats (n=20000)": lambda m: m.bin_stats(conf, lab, 10),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; only the fallback is timed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in cases(rng).items():
        t_py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:<24}{t_py:>12.2f}{'-':>12}{'-':>10}")
            continue
        t_c = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<24}{t_py:>12.2f}{t_c:>12.2f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
