"""Benchmark the compiled SWM kernel against the numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py

Both backends are exercised on identical inputs and their outputs are
checked for agreement before timing.
"""
import argparse
import time

import numpy as np

from thzgen._core import BACKEND, fallback

try:
    from thzgen._core import channel_kernels
except ImportError:
    channel_kernels = None


def make_scene(rng, n_rx, n_tx, n_paths):
    tx = rng.normal(0.0, 0.05, (n_tx, 3))
    rx = rng.normal(0.0, 0.05, (n_rx, 3)) + np.array([6.0, 0.0, 0.0])
    scat = rng.uniform(-3.0, 3.0, (n_paths, 3)) + np.array([3.0, 0.0, 0.0])
    has_scat = np.ones(n_paths, dtype=np.uint8)
    has_scat[0] = 0  # one line-of-sight path
    refl = rng.uniform(0.1, 1.0, n_paths)
    return tx, rx, scat, has_scat, refl


def bench(fn, args, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return out, best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args_ns = parser.parse_args()

    rng = np.random.default_rng(0)
    wavelength = 1e-3
    print(f"active backend at import: {BACKEND}")
    print(f"{'shape':>12} {'paths':>6} {'numpy':>10} {'cython':>10} {'speedup':>8}")
    for n_rx, n_tx in ((8, 16), (64, 256)):
        for n_paths in (4, 16, 64):
            scene = make_scene(rng, n_rx, n_tx, n_paths)
            args = (*scene, wavelength)
            h_np, t_np = bench(fallback.swm_accumulate, args, args_ns.repeats)
            if channel_kernels is None:
                print(f"{n_rx}x{n_tx:>4} {n_paths:>6} {t_np*1e3:>9.2f}ms    (compiled kernel not built)")
                continue
            h_cy, t_cy = bench(channel_kernels.swm_accumulate, args, args_ns.repeats)
            err = np.max(np.abs(h_np - h_cy)) / np.max(np.abs(h_np))
            assert err < 1e-12, f"backend mismatch: {err}"
            print(
                f"{n_rx}x{n_tx:>4} {n_paths:>6} {t_np*1e3:>9.2f}ms {t_cy*1e3:>9.2f}ms"
                f" {t_np/t_cy:>7.2f}x"
            )


if __name__ == "__main__":
    main()
