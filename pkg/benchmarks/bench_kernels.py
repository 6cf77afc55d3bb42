"""Time the numba kernels against their numpy fallbacks.

Usage: python3 benchmarks/bench_kernels.py [--M 256] [--cols 60] [--repeat 20]

The end-to-end rows time synthesize/analyze in whichever mode the package was
imported with; run once more under FBMC_DISABLE_NUMBA=1 to compare.
"""
import argparse
import time

import numpy as np

from fbmc_preamble import kernels
from fbmc_preamble._accel import numba_enabled
from fbmc_preamble.filterbank import analyze, design_phydyas, synthesize


def best_of(fn, repeat):
    fn()  # warm-up (includes jit compilation)
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return min(ts)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, default=256)
    ap.add_argument("--cols", type=int, default=60)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)

    filt = design_phydyas(args.M)
    g, M, N = filt.g, args.M, args.cols
    hop = M // 2
    rng = np.random.default_rng(0)
    cols = rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N))
    s = rng.standard_normal((N - 1) * hop + len(g)) + 0j
    grid = rng.standard_normal((M, N))

    rows = [
        ("overlap_add numpy", lambda: kernels.overlap_add_numpy(cols, g, hop)),
        ("fold_windows numpy", lambda: kernels.fold_windows_numpy(s, g, M, hop, N)),
    ]
    if numba_enabled():
        rows += [
            ("overlap_add numba", lambda: kernels.overlap_add_numba(cols, g, hop)),
            ("fold_windows numba", lambda: kernels.fold_windows_numba(s, g, M, hop, N)),
        ]
    mode = "numba" if numba_enabled() else "numpy"
    rows += [
        (f"synthesize [{mode}]", lambda: synthesize(grid, filt)),
        (f"analyze [{mode}]", lambda: analyze(s, filt, N)),
    ]
    print(f"M={M} cols={N} repeat={args.repeat}")
    for name, fn in rows:
        print(f"{name:<24s} {best_of(fn, args.repeat) * 1e3:9.3f} ms")


if __name__ == "__main__":
    main()
