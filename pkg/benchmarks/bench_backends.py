#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs each hot kernel on a representative workload with both variants,
checks they agree, and prints the timings side by side.

    python3 benchmarks/bench_backends.py [--repeat N] [--large]

--large bumps the word sizes to where the gap matters (takes longer).
"""
import argparse
import time

import numpy as np

from vdbcode._kernels import HAVE_NUMBA, VARIANTS
from vdbcode.combinatorics import masks_of_weight, masks_up_to_weight


def time_call(func, *args, repeat):
    func(*args)  # warmup (jit compile / cache load)
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        result = func(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def workloads(large):
    rng = np.random.default_rng(0)
    L_pairs = 16 if large else 12
    L_pmf = 14 if large else 10
    n_trials = 2_000_000 if large else 500_000

    values = rng.random(1 << L_pmf)
    values /= values.sum()
    flip = rng.random(L_pmf) * 0.5
    words = rng.integers(0, 1 << L_pmf, size=n_trials, dtype=np.int64)
    uniforms = rng.random((n_trials, L_pmf))

    return [
        ("distance_counts", f"L={L_pairs}, k=3", (L_pairs, masks_of_weight(L_pairs, 3))),
        ("reach_matrix", f"L={L_pairs}, k<=3", (L_pairs, masks_up_to_weight(L_pairs, 3))),
        ("distortion_pmf_flip", f"L={L_pmf}, uniform-ish values", (flip, values)),
        (
            "distortion_pmf_forced",
            f"L={L_pmf}",
            (rng.random(L_pmf) * 0.4, rng.random(L_pmf) * 0.4, values),
        ),
        ("trial_distortions", f"{n_trials} trials, L={L_pmf}", (words, uniforms, flip)),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--large", action="store_true")
    args = parser.parse_args()

    if not HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    print(f"{'kernel':<24} {'workload':<28} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for name, desc, call_args in workloads(args.large):
        t_np, r_np = time_call(VARIANTS["numpy"][name], *call_args, repeat=args.repeat)
        t_nb, r_nb = time_call(VARIANTS["numba"][name], *call_args, repeat=args.repeat)
        if r_np.dtype.kind == "f":
            assert np.allclose(r_np, r_nb, rtol=0, atol=1e-12), name
        else:
            assert np.array_equal(r_np, r_nb), name
        print(f"{name:<24} {desc:<28} {t_np:>9.4f}s {t_nb:>9.4f}s {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
