"""Benchmark the compiled kernel backend against the pure-Python fallback.

Run:  python3 benchmarks/bench_kernels.py [--nodes N] [--points M] [--pack K]

Times the two hot loops (oscillatory phase reduction, greedy sphere packing)
on synthetic data of production-like shape and verifies both backends agree.
The same comparison is available as `carnotwave bench`.
"""

import argparse
import time

import numpy as np

from carnotwave import kernels
from carnotwave.rng import make_rng


def time_fn(fn, *args, repeats=3):
    best = np.inf
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, default=200_000)
    ap.add_argument("--points", type=int, default=128)
    ap.add_argument("--pack", type=int, default=500_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    if kernels.backend_name() != "cython":
        print("note: compiled backend unavailable; comparing python against itself")

    rng = make_rng(args.seed, 99)
    n, m, d1, d2 = args.nodes, args.points, 2, 1
    xt = rng.standard_normal((n, d1))
    ut = rng.standard_normal((n, d2))
    xit = 8.0 * rng.standard_normal((n, d1))
    mu = 8.0 * rng.standard_normal((n, d2))
    absj = np.abs(mu)[:, :, None] * np.eye(d1)[None, :, :]
    coeff = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / n
    px = rng.standard_normal((m, d1))
    pu = rng.standard_normal((m, d2))

    t_py, ref = time_fn(kernels.phase_sum_python, px, pu, xt, ut, xit, mu, absj, coeff)
    t_fast, fast = time_fn(kernels.phase_sum, px, pu, xt, ut, xit, mu, absj, coeff)
    err = float(np.max(np.abs(ref - fast)))
    pairs = n * m
    print(f"phase_sum: {n} nodes x {m} points = {pairs:.2e} pairs")
    print(f"  python fallback : {t_py:8.4f} s   ({pairs / t_py:.2e} pairs/s)")
    print(f"  active ({kernels.backend_name():7s}): {t_fast:8.4f} s   "
          f"({pairs / t_fast:.2e} pairs/s)   speedup x{t_py / t_fast:.1f}")
    print(f"  agreement: {err:.2e}")

    pts = rng.standard_normal((args.pack, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    sep = 0.02
    t_py, mask_py = time_fn(kernels.greedy_pack_python, pts, sep, repeats=1)
    t_fast, mask = time_fn(kernels.greedy_pack, pts, sep, repeats=1)
    print(f"greedy_pack: {args.pack} stream points, separation {sep}")
    print(f"  python fallback : {t_py:8.4f} s")
    print(f"  active ({kernels.backend_name():7s}): {t_fast:8.4f} s   speedup x{t_py / t_fast:.1f}")
    print(f"  identical masks: {bool(np.array_equal(mask, mask_py))}, "
          f"kept {int(mask.sum())}")


if __name__ == "__main__":
    main()
