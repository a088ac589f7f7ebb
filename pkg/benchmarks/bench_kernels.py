#!/usr/bin/env python3
"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--players 7 14 18]

Each row reports the best-of-``repeat`` wall time per call in milliseconds.
The jit column is measured after one warm-up call, so compilation is not
included. Outputs of the two variants are compared before timing.
"""

import argparse
import time

import numpy as np

from histml import kernels
from histml._accel import USE_NUMBA, njit


def best_time(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return 1e3 * min(times)


def cases(players, rng):
    for n in players:
        powers = rng.uniform(0.5, 2.0, n)
        yield "subset_sums", f"n={n}", (powers,)
        table = kernels._subset_sums_numpy(powers)
        yield "shapley", f"n={n}", (table, n, kernels.shapley_weights(n))
        perms = np.array([rng.permutation(n) for _ in range(2000)], dtype=np.int64)
        yield "permutation", f"n={n}, 2000 orders", (table, perms)
    for rows, d in ((50, 7), (500, 7), (2000, 10)):
        X = rng.normal(size=(rows, d))
        y = X[:, 0] + 0.1 * rng.normal(size=rows)
        feats = np.arange(d, dtype=np.int64)
        yield "best_split", f"{rows}x{d}", (X, y, feats, 1)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--players", type=int, nargs="+", default=[7, 14, 18])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    jitted = {}
    header = f"{'kernel':<12} {'case':<20} {'numpy ms':>10} {'jit ms':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, label, call_args in cases(args.players, rng):
        numpy_fn = getattr(kernels, f"_{name}_numpy")
        t_np = best_time(numpy_fn, call_args, args.repeat)
        if not USE_NUMBA:
            print(f"{name:<12} {label:<20} {t_np:>10.3f} {'n/a':>10} {'':>8}")
            continue
        if name not in jitted:
            jitted[name] = njit(getattr(kernels, f"_{name}_loop"))
        jit_fn = jitted[name]
        ref, out = numpy_fn(*call_args), jit_fn(*call_args)
        if not np.allclose(np.asarray(ref, dtype=float), np.asarray(out, dtype=float), rtol=1e-9, atol=1e-9):
            raise SystemExit(f"{name} {label}: numpy and jit results differ")
        t_jit = best_time(jit_fn, call_args, args.repeat)
        print(f"{name:<12} {label:<20} {t_np:>10.3f} {t_jit:>10.3f} {t_np / t_jit:>7.1f}x")
    if not USE_NUMBA:
        print("numba disabled (HISTML_DISABLE_NUMBA) or not installed; numpy timings only")


if __name__ == "__main__":
    main()
