#!/usr/bin/env python3
"""Compare the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--batch 1000] [--n 8] [--k 4] [--repeat 3]

Both paths are always importable; ``use_numba=`` picks one per call, which
is what ``PEGFORMER_NUMBA`` sets globally.
"""
import argparse
import time

import numpy as np

from pegformer._accel import HAVE_NUMBA
from pegformer.channels import gen_rayleigh
from pegformer.precoding.kernels import sum_se_batch, wmmse_batch


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--batch", type=int, default=1000)
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ds = gen_rayleigh(args.n, args.k, args.batch, 10.0, seed=args.seed)
    H = ds.H
    print(f"numba available: {HAVE_NUMBA}")
    print(f"batch={args.batch} N={args.n} K={args.k}")

    cases = {
        "wmmse": lambda use: wmmse_batch(H, ds.pt, ds.sigma2, use_numba=use)[0],
    }
    V = wmmse_batch(H, ds.pt, ds.sigma2, use_numba=False)[0]
    cases["sum_se"] = lambda use: sum_se_batch(H, V, ds.sigma2, use_numba=use)

    print(f"{'kernel':<10}{'numpy s':>12}{'numba s':>12}{'speedup':>10}{'max diff':>12}")
    for name, fn in cases.items():
        t_np, ref = best_of(lambda: fn(False), args.repeat)
        if not HAVE_NUMBA:
            print(f"{name:<10}{t_np:>12.4f}{'-':>12}{'-':>10}{'-':>12}")
            continue
        fn(True)  # compile / load cache outside the timing
        t_nb, out = best_of(lambda: fn(True), args.repeat)
        diff = float(np.max(np.abs(np.asarray(out) - np.asarray(ref))))
        print(f"{name:<10}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>9.1f}x{diff:>12.2e}")


if __name__ == "__main__":
    main()
